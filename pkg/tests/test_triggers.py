import numpy as np
import pytest

from swingopt.contract import ContractSpec
from swingopt.factors import ExpJumpSpec, FactorModel, OUFactor
from swingopt.grids import Grid, build_adaptive_x1
from swingopt.solver import solve
from swingopt.triggers import (
    TriggerCurve,
    curve_to_csv,
    lsq_slope,
    trigger_1d,
    trigger_2d_projections,
)


def solve_1d(r=0.05, strike=40.0):
    model = FactorModel((OUFactor(speed=0.5, level=40.0, vol=2.36),))
    contract = ContractSpec.single(
        strike=-strike, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=r
    )
    grid = Grid(
        t_axis=np.linspace(0.0, 1.0, 201),
        z_axis=np.linspace(0.0, 0.5, 101),
        x1_axis=build_adaptive_x1(20.0, 60.0, 121, 40.0),
    )
    return solve(model, contract, grid, retain_times=(0.5,)), grid


def test_trigger_1d_interior_and_monotone():
    res, grid = solve_1d()
    curve = trigger_1d(res, res.surface_at(0.5))
    assert curve.abscissa.size == grid.z_axis.size - 1
    ok = ~curve.missing
    assert ok.sum() > 50
    vals = curve.values[ok]
    # striking at 40 around a mean-40 factor puts the boundary mid-domain
    assert np.all(vals > 30.0) and np.all(vals < 55.0)
    # with less budget remaining it pays to hold out for better prices,
    # so the trigger rises with the volume already taken
    assert np.all(np.diff(vals) >= -1e-8)
    assert vals[-1] > vals[0] + 0.5


def test_trigger_matches_recorded_control():
    res, grid = solve_1d()
    s = res.surface_at(0.5)
    curve = trigger_1d(res, s)
    for k in range(0, grid.z_axis.size - 1, 10):
        if curve.missing[k]:
            continue
        i = int(np.searchsorted(grid.x1_axis, curve.values[k]))
        # control flips from 0 to 1 across the reported crossing
        assert s.control[k, max(i - 1, 0)] == 0
        assert s.control[k, min(i, grid.x1_axis.size - 1)] == 1


def test_trigger_1d_rejects_two_factor():
    model = FactorModel(
        (
            OUFactor(speed=0.014, level=40.0, vol=2.36),
            OUFactor(speed=0.04, jump=ExpJumpSpec(0.04, 0.4, "drift")),
        )
    )
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.0,
        price_row=(1.0, 1.0),
    )
    grid = Grid(
        t_axis=np.linspace(0.0, 1.0, 202),
        z_axis=np.linspace(0.0, 0.5, 101),
        x1_axis=build_adaptive_x1(17.2, 62.8, 41, 40.0),
        x2_axis=np.linspace(0.0, 9.0, 21),
    )
    res = solve(model, contract, grid, retain_times=(0.5,))
    with pytest.raises(ValueError):
        trigger_1d(res, res.surface_at(0.5))
    plane, price = trigger_2d_projections(res, res.surface_at(0.5), z=0.4)
    assert plane.abscissa_name == "x1" and plane.value_name == "x2"
    assert price.abscissa_name == "z" and price.value_name == "price"
    # the plane boundary slopes down: a pricier diffusive factor needs a
    # smaller spike to justify exercising
    slope = lsq_slope(plane, min_value=float(grid.dx2))
    assert -1.0 < slope < -0.1


def test_lsq_slope_exact_on_synthetic_line():
    x = np.linspace(0.0, 1.0, 11)
    curve = TriggerCurve(
        time=0.0,
        abscissa=x,
        values=3.0 - 2.0 * x,
        multiple=np.zeros(11, bool),
        missing=np.zeros(11, bool),
    )
    assert lsq_slope(curve) == pytest.approx(-2.0, abs=1e-12)
    # flagged and excluded points do not perturb an exact fit
    noisy = curve.values.copy()
    noisy[0] = 99.0
    noisy[5] = np.nan
    curve2 = TriggerCurve(0.0, x, noisy, np.zeros(11, bool), np.zeros(11, bool))
    assert lsq_slope(curve2, exclude_first=1) == pytest.approx(-2.0, abs=1e-12)


def test_lsq_slope_needs_two_points():
    curve = TriggerCurve(
        0.0,
        np.array([0.0, 1.0]),
        np.array([np.nan, 1.0]),
        np.zeros(2, bool),
        np.zeros(2, bool),
    )
    with pytest.raises(ValueError):
        lsq_slope(curve)


def test_curve_csv_round_trip():
    res, _ = solve_1d()
    curve = trigger_1d(res, res.surface_at(0.5))
    lines = curve_to_csv(curve).strip().splitlines()
    assert lines[0] == "t,z,x1,multiple,missing"
    assert len(lines) == 1 + curve.abscissa.size
    got = np.array([float(ln.split(",")[2]) for ln in lines[1:]])
    same = np.array_equal(got, curve.values)
    both_nan = np.isnan(got) & np.isnan(curve.values)
    assert same or np.array_equal(got[~both_nan], curve.values[~both_nan])
