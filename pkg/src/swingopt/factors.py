"""Mean-reverting factor dynamics with optional exponential jumps.

Each factor follows an Ornstein-Uhlenbeck diffusion, optionally augmented by
a compound Poisson process with exponentially distributed positive marks.
Conditional moments are available in closed form, and exact transition
sampling backs the Monte Carlo valuation oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ExpJumpSpec",
    "OUFactor",
    "FactorModel",
    "conditional_mean",
    "conditional_variance",
    "moment_match",
    "sample_path",
    "simulate_paths",
]


@dataclass(frozen=True)
class ExpJumpSpec:
    """Compound Poisson jumps: intensity ``frequency``, Exp(``rate``) marks.

    ``mean_effect`` fixes how the jump inflow enters the long-run mean:

    * ``"level"`` -- the compensator shifts the reversion target, so the
      long-run mean is ``level + frequency/rate``.
    * ``"drift"`` -- raw jump inflow integrated against the decay kernel,
      long-run mean ``level + frequency/(rate*speed)``.
    """

    frequency: float
    rate: float
    mean_effect: str = "level"

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("jump frequency must be positive")
        if self.rate <= 0:
            raise ValueError("jump rate must be positive")
        if self.mean_effect not in ("level", "drift"):
            raise ValueError("mean_effect must be 'level' or 'drift'")

    @property
    def mean_size(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate**2


@dataclass(frozen=True)
class OUFactor:
    """One mean-reverting factor: dX = speed*(level - X)dt + vol dW (+ jumps).

    A factor with vol = 0 and no jump is deterministic; that degenerate case
    is accepted because it is useful as a transport-only oracle.
    """

    speed: float
    level: float = 0.0
    vol: float = 0.0
    jump: ExpJumpSpec | None = None

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("mean-reversion speed must be positive")
        if self.vol < 0:
            raise ValueError("vol must be nonnegative")

    @property
    def long_run_mean(self) -> float:
        if self.jump is None:
            return self.level
        j = self.jump
        if j.mean_effect == "level":
            return self.level + j.frequency / j.rate
        return self.level + j.frequency / (j.rate * self.speed)

    def drift(self, x):
        """Generator drift, with the jump compensator subtracted.

        Chosen so that the mean ODE m' = drift(m) + frequency/rate reproduces
        :func:`conditional_mean` for either jump convention.
        """
        comp = 0.0 if self.jump is None else self.jump.frequency / self.jump.rate
        return self.speed * (self.long_run_mean - x) - comp

    @property
    def total_variance_rate(self) -> float:
        """vol^2 plus the jump contribution f * E[y^2]."""
        out = self.vol**2
        if self.jump is not None:
            out += self.jump.frequency * self.jump.second_moment
        return out


def conditional_mean(factor: OUFactor, x: float, dt: float) -> float:
    """E[X_{t+dt} | X_t = x]."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    m = factor.long_run_mean
    return m + (x - m) * math.exp(-factor.speed * dt)


def conditional_variance(factor: OUFactor, dt: float) -> float:
    """Var(X_{t+dt} | X_t); zero at dt = 0, monotone increasing in dt."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    s = factor.speed
    return factor.total_variance_rate * (-math.expm1(-2.0 * s * dt)) / (2.0 * s)


def moment_match(mu: float, sigma: float, frequency: float, rate: float) -> tuple[float, float]:
    """Level and vol of the jump model matching a Gaussian OU's moments.

    Returns (mu_tilde, sigma_tilde) with mu_tilde = mu - f/rate and
    sigma_tilde = sqrt(sigma^2 - 2 f / rate^2).  Raises if the target
    variance is too small to absorb the jump variance.
    """
    if frequency == 0:
        return mu, sigma
    if frequency < 0 or rate <= 0:
        raise ValueError("frequency must be >= 0 and rate > 0")
    jump_var_rate = 2.0 * frequency / rate**2
    if sigma**2 <= jump_var_rate:
        raise ValueError(
            f"moment matching impossible: sigma^2 = {sigma**2:g} <= "
            f"2 f / rate^2 = {jump_var_rate:g}"
        )
    return mu - frequency / rate, math.sqrt(sigma**2 - jump_var_rate)


@dataclass(frozen=True)
class FactorModel:
    """Ordered collection of factors with an optional Brownian correlation."""

    factors: tuple[OUFactor, ...]
    correlation: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.correlation is not None:
            rho = np.asarray(self.correlation, dtype=float)
            if rho.shape != (self.n_factors, self.n_factors):
                raise ValueError("correlation must be square over all factors")
            if not np.allclose(rho, rho.T):
                raise ValueError("correlation must be symmetric")
            if not np.allclose(np.diag(rho), 1.0):
                raise ValueError("correlation must have unit diagonal")
            if np.any(np.abs(rho) > 1 + 1e-12):
                raise ValueError("correlation entries must lie in [-1, 1]")
            object.__setattr__(self, "correlation", rho)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def has_jumps(self) -> bool:
        return any(f.jump is not None for f in self.factors)

    def correlation_matrix(self) -> np.ndarray:
        if self.correlation is None:
            return np.eye(self.n_factors)
        return self.correlation

    def mean_vector(self, x0: np.ndarray, dt: float) -> np.ndarray:
        return np.array(
            [conditional_mean(f, float(x), dt) for f, x in zip(self.factors, x0)]
        )

    def variance_vector(self, dt: float) -> np.ndarray:
        return np.array([conditional_variance(f, dt) for f in self.factors])


def _decayed_jump_sums(rng, factor: OUFactor, h: float, n_paths: int) -> np.ndarray:
    """Compensated sum of decayed jump marks over one step, per path."""
    j = factor.jump
    s = factor.speed
    out = np.zeros(n_paths)
    counts = rng.poisson(j.frequency * h, size=n_paths)
    hit = np.nonzero(counts)[0]
    for i in hit:
        k = counts[i]
        arrival = rng.uniform(0.0, h, size=k)
        marks = rng.exponential(j.mean_size, size=k)
        out[i] = np.sum(marks * np.exp(-s * (h - arrival)))
    # subtract the compensator so the increment has the closed-form mean
    out -= j.frequency * j.mean_size * (-math.expm1(-s * h)) / s
    return out


def simulate_paths(
    model: FactorModel,
    x0,
    t0: float,
    t1: float,
    steps: int,
    n_paths: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact-transition sampling of all factors.

    Returns ``(times, paths)`` where ``paths`` has shape
    ``(n_paths, steps + 1, n_factors)``.  Deterministic given ``seed``.
    """
    if t1 <= t0:
        raise ValueError("t1 must exceed t0")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.n_factors,):
        raise ValueError("x0 must have one entry per factor")

    rng = np.random.default_rng(seed)
    times = np.linspace(t0, t1, steps + 1)
    h = (t1 - t0) / steps
    chol = np.linalg.cholesky(model.correlation_matrix())

    paths = np.empty((n_paths, steps + 1, model.n_factors))
    paths[:, 0, :] = x0
    gauss_std = np.array(
        [
            math.sqrt(f.vol**2 * (-math.expm1(-2 * f.speed * h)) / (2 * f.speed))
            for f in model.factors
        ]
    )
    decay = np.array([math.exp(-f.speed * h) for f in model.factors])
    pull = np.array([f.long_run_mean for f in model.factors])

    for n in range(steps):
        x = paths[:, n, :]
        mean = pull + (x - pull) * decay
        z = rng.standard_normal((n_paths, model.n_factors)) @ chol.T
        nxt = mean + z * gauss_std
        for k, f in enumerate(model.factors):
            if f.jump is not None:
                nxt[:, k] += _decayed_jump_sums(rng, f, h, n_paths)
        paths[:, n + 1, :] = nxt
    return times, paths


def sample_path(
    model: FactorModel, x0, t0: float, t1: float, steps: int, rng_seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Single sampled path; see :func:`simulate_paths`."""
    times, paths = simulate_paths(model, x0, t0, t1, steps, n_paths=1, seed=rng_seed)
    return times, paths[0]
