"""Swing contract data and the closed-form unconstrained policy and value.

The contract maps factor states to prices through a constant matrix, applies
an affine payoff per commodity, and constrains exercise by per-commodity rate
caps and total volume caps.  When the volume cap does not bind, the optimal
rate is bang-bang on the sign of the payoff and the value has a
Bachelier-type closed form for jump-free factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .factors import FactorModel

__all__ = [
    "ContractSpec",
    "VolumeState",
    "payoff",
    "is_effective",
    "unconstrained_policy",
    "unconstrained_value",
]


@dataclass(frozen=True)
class ContractSpec:
    """Price map, affine payoff and exercise constraints for a swing contract."""

    price_matrix: np.ndarray  # (m, n)
    payoff_matrix: np.ndarray  # (m, m)
    strike: np.ndarray  # (m,)
    volume_cap: np.ndarray  # (m,)
    rate_cap: np.ndarray  # (m,)
    horizon: float
    discount: float = 0.0

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.price_matrix, dtype=float))
        Q = np.atleast_2d(np.asarray(self.payoff_matrix, dtype=float))
        K = np.atleast_1d(np.asarray(self.strike, dtype=float))
        M = np.atleast_1d(np.asarray(self.volume_cap, dtype=float))
        u = np.atleast_1d(np.asarray(self.rate_cap, dtype=float))
        m = B.shape[0]
        if m > B.shape[1]:
            raise ValueError("price matrix must be m x n with m <= n")
        if np.linalg.matrix_rank(B) < m:
            raise ValueError("price matrix must have full row rank")
        if Q.shape != (m, m):
            raise ValueError("payoff matrix must be m x m")
        if K.shape != (m,) or M.shape != (m,) or u.shape != (m,):
            raise ValueError("strike, volume_cap and rate_cap must be m-vectors")
        if np.any(u <= 0):
            raise ValueError("rate caps must be strictly positive")
        if np.any(M < 0):
            raise ValueError("volume caps must be nonnegative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.discount < 0:
            raise ValueError("discount rate must be nonnegative")
        object.__setattr__(self, "price_matrix", B)
        object.__setattr__(self, "payoff_matrix", Q)
        object.__setattr__(self, "strike", K)
        object.__setattr__(self, "volume_cap", M)
        object.__setattr__(self, "rate_cap", u)

    @property
    def n_commodities(self) -> int:
        return self.price_matrix.shape[0]

    @property
    def n_factors(self) -> int:
        return self.price_matrix.shape[1]

    @classmethod
    def single(
        cls,
        strike: float = 0.0,
        volume_cap: float = 0.5,
        rate_cap: float = 1.0,
        horizon: float = 1.0,
        discount: float = 0.0,
        price_row=(1.0,),
    ) -> "ContractSpec":
        """One commodity whose price is a linear combination of the factors."""
        row = np.atleast_1d(np.asarray(price_row, dtype=float))
        return cls(
            price_matrix=row.reshape(1, -1),
            payoff_matrix=np.eye(1),
            strike=np.array([strike]),
            volume_cap=np.array([volume_cap]),
            rate_cap=np.array([rate_cap]),
            horizon=horizon,
            discount=discount,
        )


@dataclass(frozen=True)
class VolumeState:
    """Consumed volume per commodity, bounded by the contract caps."""

    consumed: np.ndarray
    contract: ContractSpec = field(repr=False, default=None)

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.consumed, dtype=float))
        object.__setattr__(self, "consumed", z)
        if self.contract is not None:
            if np.any(z < -1e-15) or np.any(z > self.contract.volume_cap + 1e-12):
                raise ValueError("consumed volume outside [0, volume_cap]")


def payoff(spec: ContractSpec, x) -> np.ndarray:
    """Instantaneous exercise payoff Q (B x) + K."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[-1] != spec.n_factors:
        raise ValueError("state dimension does not match the price matrix")
    p = x @ spec.price_matrix.T
    return p @ spec.payoff_matrix.T + spec.strike


def is_effective(spec: ContractSpec, i: int) -> bool:
    """True iff the volume cap binds: M_i < rate_cap_i * horizon."""
    return bool(spec.volume_cap[i] < spec.rate_cap[i] * spec.horizon)


def unconstrained_policy(spec: ContractSpec, x) -> np.ndarray:
    """Bang-bang rate: full rate where the payoff is strictly positive.

    Ties at zero payoff resolve to no exercise.
    """
    a = payoff(spec, x)
    return np.where(a > 0.0, spec.rate_cap, 0.0)


def _bachelier_call(mean, std):
    """E[max(G, 0)] for G ~ N(mean, std^2), with a clean std -> 0 limit."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    out = np.maximum(mean, 0.0)
    pos = std > 0
    if np.any(pos):
        d = mean[pos] / std[pos]
        out = out.copy()
        out[pos] = mean[pos] * norm.cdf(d) + std[pos] * norm.pdf(d)
    return out


def unconstrained_value(
    spec: ContractSpec,
    model: FactorModel,
    t: float,
    x,
    quad_nodes: int = 64,
) -> float:
    """Discounted expected payoff of the unconstrained bang-bang policy.

    Closed-form Gaussian marginals integrated by Gauss-Legendre quadrature
    over the remaining horizon.  Requires a jump-free model with independent
    Brownian drivers; exact for M >= rate_cap * horizon, an upper bound
    otherwise.
    """
    if model.has_jumps:
        raise ValueError("closed-form value requires a jump-free model; use the MC oracle")
    rho = model.correlation_matrix()
    if not np.allclose(rho, np.eye(model.n_factors)):
        raise ValueError("closed-form value implemented for independent drivers only")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    T, r = spec.horizon, spec.discount
    if t >= T:
        return 0.0
    C = spec.payoff_matrix @ spec.price_matrix  # payoff loadings on factors
    nodes, weights = np.polynomial.legendre.leggauss(quad_nodes)
    s = 0.5 * (T - t) * (nodes + 1.0) + t
    w = 0.5 * (T - t) * weights

    total = 0.0
    for si, wi in zip(s, w):
        dt = si - t
        mean_f = model.mean_vector(x, dt)
        var_f = model.variance_vector(dt)
        a_mean = C @ mean_f + spec.strike
        a_std = np.sqrt(C**2 @ var_f)
        total += wi * np.exp(-r * dt) * float(
            np.dot(spec.rate_cap, _bachelier_call(a_mean, a_std))
        )
    return total
