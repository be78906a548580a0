import numpy as np
import pytest

from swingopt.contract import ContractSpec
from swingopt.factors import ExpJumpSpec, FactorModel, OUFactor
from swingopt.grids import Grid, build_adaptive_x1
from swingopt.mc import evaluate_policy, policy_from_result, unconstrained_policy_fn
from swingopt.solver import solve


def test_deterministic_full_rate_policy_matches_annuity():
    # vol = 0 at the stationary point: price stays at 40, always exercise;
    # the value is the discounted annuity of pay * rate over (M/rate) years
    model = FactorModel((OUFactor(speed=0.3, level=40.0, vol=0.0),))
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.1
    )
    policy = unconstrained_policy_fn(contract)
    out = evaluate_policy(model, contract, policy, [40.0], n_paths=4, steps=2000, seed=1)
    r = 0.1
    want = 40.0 * (1.0 - np.exp(-r * 0.5)) / r
    assert out.stderr == 0.0
    assert out.mean == pytest.approx(want, rel=2e-3)  # left-endpoint rule bias


def test_budget_clipping_and_admissibility():
    model = FactorModel((OUFactor(speed=0.3, level=40.0, vol=0.0),))
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=2.0, horizon=1.0, discount=0.0
    )
    policy = lambda t, z, x: np.full(x.shape[0], 2.0)
    out = evaluate_policy(model, contract, policy, [40.0], n_paths=3, steps=1000, seed=2)
    # full rate exhausts the budget after 0.25 years
    assert out.mean == pytest.approx(40.0 * 0.5, rel=1e-3)


def test_inadmissible_policy_rejected():
    model = FactorModel((OUFactor(speed=0.3, level=40.0, vol=0.0),))
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.0
    )
    policy = lambda t, z, x: np.full(x.shape[0], 5.0)
    with pytest.raises(AssertionError):
        evaluate_policy(model, contract, policy, [40.0], n_paths=2, steps=10, seed=3)


def test_seed_determinism():
    model = FactorModel((OUFactor(speed=0.014, level=40.0, vol=2.36),))
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01
    )
    policy = unconstrained_policy_fn(contract)
    a = evaluate_policy(model, contract, policy, [40.0], n_paths=500, steps=50, seed=7)
    b = evaluate_policy(model, contract, policy, [40.0], n_paths=500, steps=50, seed=7)
    c = evaluate_policy(model, contract, policy, [40.0], n_paths=500, steps=50, seed=8)
    assert a.mean == b.mean and a.stderr == b.stderr
    assert a.mean != c.mean


def test_surface_policy_lower_bounds_and_approaches_pde():
    model = FactorModel((OUFactor(speed=0.014, level=40.0, vol=2.36),))
    contract = ContractSpec.single(
        strike=0.0, volume_cap=0.5, rate_cap=1.0, horizon=1.0, discount=0.01
    )
    grid = Grid(
        t_axis=np.linspace(0.0, 1.0, 253),
        z_axis=np.linspace(0.0, 0.5, 126),
        x1_axis=build_adaptive_x1(18.7, 61.3, 85, 40.0),
    )
    res = solve(model, contract, grid, retain_times=np.linspace(0.0, 1.0, 21))
    pde = res.value_at(0.0, 0.0, 40.0)
    policy = policy_from_result(res)
    out = evaluate_policy(model, contract, policy, [40.0], n_paths=20000, steps=250, seed=11)
    assert abs(out.mean - pde) < 3.0 * out.stderr + 0.02 * abs(pde)


def test_unconstrained_overlay_forces_positive_pay_exercise():
    # with cap = rate * horizon the budget never binds and the surface policy
    # must coincide with the myopic rule everywhere
    model = FactorModel((OUFactor(speed=0.014, level=40.0, vol=2.36),))
    contract = ContractSpec.single(
        strike=-40.0, volume_cap=1.0, rate_cap=1.0, horizon=1.0, discount=0.0
    )
    grid = Grid(
        t_axis=np.linspace(0.0, 1.0, 101),
        z_axis=np.linspace(0.0, 1.0, 51),
        x1_axis=build_adaptive_x1(18.7, 61.3, 41, 40.0),
    )
    res = solve(model, contract, grid, retain_times=(0.0, 0.5))
    policy = policy_from_result(res)
    myopic = unconstrained_policy_fn(contract)
    rng = np.random.default_rng(0)
    x = rng.uniform(18.7, 61.3, size=(200, 1))
    for t in (0.0, 0.5):
        z = np.minimum(t * np.ones(200), 1.0)
        assert np.array_equal(policy(t, z, x), myopic(t, z, x))
