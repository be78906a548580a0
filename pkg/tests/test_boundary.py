import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from swingopt.boundary import (
    DecayIntegrand,
    bc_single_factor,
    bc_two_factor_high,
    bc_two_factor_low,
    bc_zero,
    single_factor_boundary_values,
    two_factor_boundary_values,
    two_factor_integrand,
)
from swingopt.contract import ContractSpec
from swingopt.factors import ExpJumpSpec, FactorModel, OUFactor


def two_factor_model(jump_rate=0.4):
    return FactorModel(
        (
            OUFactor(speed=0.014, level=40.0, vol=2.36),
            OUFactor(speed=0.04, jump=ExpJumpSpec(0.04, jump_rate, "drift")),
        )
    )


def contract(r=0.0):
    return ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=r, price_row=(1.0, 1.0)
    )


def test_bc_zero():
    assert bc_zero(0.3, 0.1) == 0.0


def test_closed_form_integral_matches_quadrature_fixed():
    g = DecayIntegrand(r=0.1, terms=((0.0, 35.0), (0.014, -22.8), (0.04, 3.0)))
    got = g.integral(0.2, 0.9)
    want, _ = quad(lambda w: float(g.value(w)), 0.2, 0.9, epsabs=1e-13, epsrel=1e-13)
    assert got == pytest.approx(want, rel=1e-11)


@settings(max_examples=1000, deadline=None)
@given(
    r=st.floats(0.0, 1.0),
    c0=st.floats(-50.0, 80.0),
    b1=st.floats(0.001, 2.0),
    c1=st.floats(-60.0, 60.0),
    b2=st.floats(0.001, 2.0),
    c2=st.floats(-60.0, 60.0),
    w1=st.floats(0.0, 0.9),
    dw=st.floats(0.01, 1.0),
)
def test_closed_form_integral_property(r, c0, b1, c1, b2, c2, w1, dw):
    g = DecayIntegrand(r=r, terms=((0.0, c0), (b1, c1), (b2, c2)))
    got = g.integral(w1, w1 + dw)
    want, _ = quad(lambda w: float(g.value(w)), w1, w1 + dw, epsabs=1e-12, epsrel=1e-12)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_single_factor_high_side_full_budget_window():
    factor = OUFactor(speed=0.014, level=40.0, vol=2.36)
    c = ContractSpec.single(volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01)
    v = bc_single_factor("high", 0.2, 0.1, 61.3, factor, c)
    # immediate exercise for (M - z)/rate = 0.4 years
    g = lambda w: np.exp(-0.01 * w) * ((61.3 - 40.0) * np.exp(-0.014 * w) + 40.0)
    want, _ = quad(g, 0.0, 0.4, epsabs=1e-12)
    assert v == pytest.approx(want, rel=1e-10)


def test_single_factor_low_side_deferred_window():
    factor = OUFactor(speed=0.014, level=40.0, vol=2.36)
    c = ContractSpec.single(volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01)
    v = bc_single_factor("low", 0.2, 0.1, 18.7, factor, c)
    g = lambda w: np.exp(-0.01 * w) * ((18.7 - 40.0) * np.exp(-0.014 * w) + 40.0)
    want, _ = quad(g, 0.8 - 0.4, 0.8, epsabs=1e-12)
    assert v == pytest.approx(want, rel=1e-10)


def test_boundary_zero_at_maturity_and_cap():
    factor = OUFactor(speed=0.014, level=40.0, vol=2.36)
    c = ContractSpec.single(volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01)
    assert bc_single_factor("high", 1.0, 0.1, 61.3, factor, c) == 0.0
    assert bc_single_factor("low", 0.3, 0.5, 18.7, factor, c) == 0.0


def test_two_factor_high_closed_form_vs_quadrature():
    m, c = two_factor_model(), contract(r=0.07)
    v = bc_two_factor_high(0.3, 0.2, 62.8, 4.5, m, c)
    g = two_factor_integrand(m, 62.8, 4.5, c)
    want, _ = quad(lambda w: float(g.value(w)), 0.0, 0.3, epsabs=1e-12)
    assert v == pytest.approx(want, rel=1e-10)


def test_low_boundary_immediate_window_regime():
    # strong discounting beats the rising mean path: exercise right away
    m = two_factor_model(jump_rate=0.014)
    c = contract(r=0.2)
    for t in (0.0, 0.25, 0.5):
        for z in (0.0, 0.2, 0.4):
            _, t1, t2 = bc_two_factor_low(t, z, 17.2, 0.0, m, c)
            assert t1 == pytest.approx(t, abs=1e-6)
            assert t2 == pytest.approx(t + 0.5 - z, abs=1e-6)


def test_low_boundary_deferred_window_regime():
    # zero discounting with a rising mean path: wait until the last window
    m, c = two_factor_model(), contract(r=0.0)
    _, t1, t2 = bc_two_factor_low(0.2, 0.1, 17.2, 0.0, m, c)
    assert t2 == pytest.approx(1.0, abs=1e-9)
    assert t1 == pytest.approx(0.6, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(
    r=st.floats(0.0, 0.5),
    jump_rate=st.floats(0.05, 1.0),
    x2=st.floats(0.0, 9.0),
    t=st.floats(0.0, 0.95),
    z=st.floats(0.0, 0.45),
)
def test_low_boundary_beats_grid_search(r, jump_rate, x2, t, z):
    m = two_factor_model(jump_rate=jump_rate)
    c = contract(r=r)
    val, t1, t2 = bc_two_factor_low(t, z, 17.2, x2, m, c)
    g = two_factor_integrand(m, 17.2, x2, c)
    H = 1.0 - t
    L = min(0.5 - z, H)
    w1s = np.linspace(0.0, H, 60)
    best = 0.0
    for w1 in w1s:
        for w2 in np.linspace(w1, min(w1 + L, H), 30):
            best = max(best, float(g.integral(w1, w2)))
    assert val >= best - 1e-9
    assert t <= t1 <= t2 <= 1.0 + 1e-12
    assert (t2 - t1) <= L + 1e-9


def test_vectorized_matches_scalar_low_boundary():
    z = np.linspace(0.0, 0.5, 9)[:-1]
    x2 = np.linspace(0.0, 9.0, 5)
    for jump_rate, r in ((0.4, 0.0), (0.4, 0.05), (0.014, 0.2), (0.014, 0.01)):
        m = two_factor_model(jump_rate=jump_rate)
        c = contract(r=r)
        for t in (0.0, 0.5, 0.9):
            vec = two_factor_boundary_values("low", t, z, 17.2, x2, m, c)
            sc = np.array(
                [[bc_two_factor_low(t, float(zz), 17.2, float(x), m, c)[0] for x in x2] for zz in z]
            )
            assert np.allclose(vec, sc, rtol=1e-10, atol=1e-10)


def test_vectorized_single_factor_matches_scalar():
    factor = OUFactor(speed=0.014, level=40.0, vol=2.36)
    c = ContractSpec.single(volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01)
    z = np.linspace(0.0, 0.5, 11)
    for side in ("high", "low"):
        vec = single_factor_boundary_values(side, 0.3, z, 61.3, factor, c)
        sc = np.array([bc_single_factor(side, 0.3, float(zz), 61.3, factor, c) for zz in z])
        assert np.allclose(vec, sc, rtol=1e-12, atol=1e-12)
