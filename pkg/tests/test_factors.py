import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swingopt.factors import (
    ExpJumpSpec,
    FactorModel,
    OUFactor,
    conditional_mean,
    conditional_variance,
    moment_match,
    simulate_paths,
)


def test_noiseless_path_equals_mean_curve():
    factor = OUFactor(speed=0.014, level=40.0, vol=0.0)
    model = FactorModel((factor,))
    times, paths = simulate_paths(model, [20.0], 0.0, 1.0, 250, 3, seed=7)
    expected = 40.0 + (20.0 - 40.0) * np.exp(-0.014 * times)
    assert np.allclose(paths[:, :, 0], expected[None, :], atol=1e-12)


def test_conditional_moments_jump_level_convention():
    # long-run mean level + f/rate; variance rate vol^2 + 2 f / rate^2
    jump = ExpJumpSpec(frequency=0.04, rate=0.4, mean_effect="level")
    factor = OUFactor(speed=0.014, level=39.9, vol=2.2516, jump=jump)
    m_inf = 39.9 + 0.04 / 0.4
    assert factor.long_run_mean == pytest.approx(m_inf)
    dt = 0.7
    assert conditional_mean(factor, 30.0, dt) == pytest.approx(
        m_inf + (30.0 - m_inf) * np.exp(-0.014 * dt)
    )
    var = (2.2516**2 + 2 * 0.04 / 0.4**2) * (1 - np.exp(-2 * 0.014 * dt)) / (2 * 0.014)
    assert conditional_variance(factor, dt) == pytest.approx(var)


def test_drift_consistency_with_conditional_mean():
    jump = ExpJumpSpec(frequency=0.04, rate=0.4, mean_effect="drift")
    factor = OUFactor(speed=0.04, level=0.0, vol=0.0, jump=jump)
    # pure-jump spike factor: generator drift is plain decay -speed * x
    x = np.array([0.0, 1.0, 5.0])
    assert np.allclose(factor.drift(x), -0.04 * x)


def test_moment_match_values():
    mu, sig = moment_match(40.0, 2.36, 0.04, 0.4)
    assert mu == 39.9
    assert sig == pytest.approx(np.sqrt(2.36**2 - 2 * 0.04 / 0.4**2))


def test_moment_match_identity_without_jumps():
    assert moment_match(40.0, 2.36, 0.0, 0.4) == (40.0, 2.36)


def test_moment_match_rejects_excess_jump_variance():
    with pytest.raises(ValueError):
        moment_match(40.0, 0.1, 5.0, 0.4)


@settings(max_examples=25, deadline=None)
@given(
    speed=st.floats(0.01, 2.0),
    level=st.floats(-10.0, 60.0),
    vol=st.floats(0.0, 3.0),
    x0=st.floats(-20.0, 80.0),
    dt=st.floats(0.05, 1.5),
)
def test_simulated_moments_match_conditional(speed, level, vol, x0, dt):
    factor = OUFactor(speed=speed, level=level, vol=vol)
    model = FactorModel((factor,))
    _, paths = simulate_paths(model, [x0], 0.0, dt, 1, 4000, seed=11)
    final = paths[:, -1, 0]
    mean = conditional_mean(factor, x0, dt)
    std = np.sqrt(conditional_variance(factor, dt))
    assert abs(final.mean() - mean) < 5 * std / np.sqrt(4000) + 1e-9
    if vol > 0.1:
        assert final.std() == pytest.approx(std, rel=0.15)


def test_jump_paths_match_conditional_moments():
    jump = ExpJumpSpec(frequency=2.0, rate=0.8, mean_effect="level")
    factor = OUFactor(speed=0.5, level=10.0, vol=0.7, jump=jump)
    model = FactorModel((factor,))
    n = 40000
    _, paths = simulate_paths(model, [12.0], 0.0, 0.9, 9, n, seed=3)
    final = paths[:, -1, 0]
    mean = conditional_mean(factor, 12.0, 0.9)
    var = conditional_variance(factor, 0.9)
    assert abs(final.mean() - mean) < 5 * np.sqrt(var / n)
    assert final.var() == pytest.approx(var, rel=0.1)


def test_seed_determinism():
    factor = OUFactor(speed=0.2, level=5.0, vol=1.0, jump=ExpJumpSpec(1.0, 0.5))
    model = FactorModel((factor,))
    _, a = simulate_paths(model, [4.0], 0.0, 1.0, 50, 100, seed=42)
    _, b = simulate_paths(model, [4.0], 0.0, 1.0, 50, 100, seed=42)
    assert np.array_equal(a, b)


def test_correlation_validation():
    f = OUFactor(speed=0.1, level=0.0, vol=1.0)
    with pytest.raises(ValueError):
        FactorModel((f, f), correlation=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValueError):
        FactorModel((f, f), correlation=np.array([[1.0, 0.3], [0.2, 1.0]]))


def test_correlated_paths_have_requested_correlation():
    f = OUFactor(speed=0.05, level=0.0, vol=1.0)
    model = FactorModel((f, f), correlation=np.array([[1.0, 0.7], [0.7, 1.0]]))
    _, paths = simulate_paths(model, [0.0, 0.0], 0.0, 0.5, 1, 30000, seed=5)
    inc = paths[:, -1, :]
    rho = np.corrcoef(inc.T)[0, 1]
    assert rho == pytest.approx(0.7, abs=0.03)
