"""Closed-form boundary values on the truncated state domain.

At the spatial truncation levels the optimal control is known (exercise
immediately at the high boundary, pick the best deterministic window at the
low boundary), so the value reduces to discounted integrals of exponentially
decaying mean paths.  Everything here is evaluated in closed form; the
low-boundary window optimizer enumerates stationary and corner candidates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .contract import ContractSpec
from .factors import FactorModel, OUFactor

__all__ = [
    "DecayIntegrand",
    "bc_zero",
    "bc_single_factor",
    "bc_two_factor_high",
    "bc_two_factor_low",
    "single_factor_integrand",
    "two_factor_integrand",
]

_EMPTY_WINDOW = 1e-12
_BISECT_TOL = 1e-12


@dataclass(frozen=True)
class DecayIntegrand:
    """g(w) = e^{-r w} * sum_k c_k e^{-b_k w}; b_k = 0 encodes a constant."""

    r: float
    terms: tuple[tuple[float, float], ...]  # (decay_rate, coefficient)

    def value(self, w):
        w = np.asarray(w, dtype=float)
        out = np.zeros_like(w)
        for b, c in self.terms:
            out = out + c * np.exp(-b * w)
        return out * np.exp(-self.r * w)

    def integral(self, w1, w2):
        """Closed-form integral of g over [w1, w2] (broadcasts)."""
        w1 = np.asarray(w1, dtype=float)
        w2 = np.asarray(w2, dtype=float)
        out = np.zeros(np.broadcast(w1, w2).shape)
        for b, c in self.terms:
            a = self.r + b
            if abs(a) < 1e-200:  # linear limit; avoids subnormal division
                out = out + c * (w2 - w1)
            else:
                # expm1 keeps full precision as a -> 0
                out = out + c * np.exp(-a * w1) * (-np.expm1(-a * (w2 - w1)) / a)
        return out if out.shape else float(out)


def _bc_decay_coeffs(factor: OUFactor, x_bound: float) -> tuple[float, float]:
    """(constant, decaying coefficient) of the boundary mean path minus level.

    The jump inflow is integrated against the decay kernel, so a jump factor
    contributes frequency/(rate*speed) to the constant part.
    """
    base = factor.level
    if factor.jump is not None:
        base += factor.jump.frequency / (factor.jump.rate * factor.speed)
    return base, x_bound - base


def single_factor_integrand(factor: OUFactor, x_bound: float, contract: ContractSpec) -> DecayIntegrand:
    K = float(contract.strike[0])
    r = contract.discount
    const, coeff = _bc_decay_coeffs(factor, x_bound)
    return DecayIntegrand(r=r, terms=((0.0, const - K), (factor.speed, coeff)))


def two_factor_integrand(
    model: FactorModel, x1_bound: float, x2: float, contract: ContractSpec
) -> DecayIntegrand:
    f1, f2 = model.factors
    K = float(contract.strike[0])
    r = contract.discount
    c1_const, c1 = _bc_decay_coeffs(f1, x1_bound)
    c2_const, c2 = _bc_decay_coeffs(f2, x2)
    return DecayIntegrand(
        r=r,
        terms=((0.0, c1_const + c2_const - K), (f1.speed, c1), (f2.speed, c2)),
    )


def bc_zero(t: float, z: float, x=None) -> float:
    """Value at maturity or with the volume cap exhausted: exactly zero."""
    return 0.0


def _window(side: str, t: float, z: float, contract: ContractSpec) -> tuple[float, float]:
    """Exercise window, in time-since-t units, used at each boundary side."""
    T = contract.horizon
    budget = float(contract.volume_cap[0]) - z
    rate = float(contract.rate_cap[0])
    horizon = max(T - t, 0.0)
    span = max(budget, 0.0) / rate
    if side == "high":
        return 0.0, min(horizon, span)
    if side == "low":
        return max(0.0, horizon - span), horizon
    raise ValueError("side must be 'high' or 'low'")


def bc_single_factor(
    side: str, t: float, z: float, x_bound: float, factor: OUFactor, contract: ContractSpec
) -> float:
    """One-factor boundary value: rate_cap times the windowed mean-path integral.

    High side exercises immediately until the budget runs out; low side defers
    exercise to the last feasible window before maturity.
    """
    w1, w2 = _window(side, t, z, contract)
    if w2 - w1 <= _EMPTY_WINDOW:
        return 0.0
    g = single_factor_integrand(factor, x_bound, contract)
    return float(contract.rate_cap[0]) * g.integral(w1, w2)


def bc_two_factor_high(
    t: float, z: float, x1_max: float, x2: float, model: FactorModel, contract: ContractSpec
) -> float:
    """Two-factor high boundary: exercise at full rate from t until z = M."""
    if x2 < 0:
        raise ValueError("x2 must be nonnegative (positive jumps only)")
    w1, w2 = _window("high", t, z, contract)
    if w2 - w1 <= _EMPTY_WINDOW:
        return 0.0
    g = two_factor_integrand(model, x1_max, x2, contract)
    return float(contract.rate_cap[0]) * g.integral(w1, w2)


def _bracketed_roots(fn, lo: float, hi: float, samples: int = 257) -> list[float]:
    if hi - lo <= 0:
        return []
    w = np.linspace(lo, hi, samples)
    v = fn(w)
    roots = []
    for i in range(samples - 1):
        a, b = v[i], v[i + 1]
        if a == 0.0:
            roots.append(float(w[i]))
        elif a * b < 0.0:
            roots.append(float(brentq(lambda s: float(fn(s)), w[i], w[i + 1], xtol=_BISECT_TOL)))
    if v[-1] == 0.0:
        roots.append(float(w[-1]))
    return roots


def bc_two_factor_low(
    t: float, z: float, x1_min: float, x2: float, model: FactorModel, contract: ContractSpec
) -> tuple[float, float, float]:
    """Two-factor low boundary: best deterministic exercise window.

    Maximizes the windowed integral of the discounted mean path over
    t <= t1 <= t2 <= T subject to rate_cap*(t2 - t1) <= remaining budget.
    Returns ``(value, t1, t2)``.  The empty window (value 0) is always
    feasible, so the result is nonnegative.
    """
    if x2 < 0:
        raise ValueError("x2 must be nonnegative (positive jumps only)")
    T = contract.horizon
    rate = float(contract.rate_cap[0])
    H = max(T - t, 0.0)
    L = max(float(contract.volume_cap[0]) - z, 0.0) / rate
    if H <= _EMPTY_WINDOW or L <= _EMPTY_WINDOW:
        return 0.0, t, t
    g = two_factor_integrand(model, x1_min, x2, contract)

    cands: list[tuple[float, float]] = [(0.0, 0.0), (0.0, min(L, H)), (max(H - L, 0.0), H)]
    if L >= H:
        cands.append((0.0, H))
    roots = _bracketed_roots(g.value, 0.0, H)
    for rt in roots:
        cands.append((rt, min(rt + L, H)))
        cands.append((max(rt - L, 0.0), rt))
    for i, ra in enumerate(roots):
        for rb in roots[i + 1 :]:
            if rb - ra <= L + _EMPTY_WINDOW:
                cands.append((ra, min(rb, ra + L)))
    if L < H:
        # budget-active windows with equal integrand values at both endpoints
        psi = lambda w1: g.value(np.asarray(w1) + L) - g.value(w1)
        for p in _bracketed_roots(psi, 0.0, H - L):
            cands.append((p, p + L))

    best_val, best = 0.0, (0.0, 0.0)
    for w1, w2 in cands:
        if w2 - w1 <= _EMPTY_WINDOW:
            continue
        val = rate * float(g.integral(w1, w2))
        if val > best_val:
            best_val, best = val, (w1, w2)
    return best_val, t + best[0], t + best[1]


# --- vectorized helpers used by the PDE solver -------------------------------

def single_factor_boundary_values(
    side: str, t: float, z_axis: np.ndarray, x_bound: float, factor: OUFactor, contract: ContractSpec
) -> np.ndarray:
    """Boundary values for every z node at one time, closed form."""
    g = single_factor_integrand(factor, x_bound, contract)
    T = contract.horizon
    rate = float(contract.rate_cap[0])
    H = max(T - t, 0.0)
    span = np.maximum(float(contract.volume_cap[0]) - z_axis, 0.0) / rate
    if side == "high":
        w1 = np.zeros_like(z_axis)
        w2 = np.minimum(H, span)
    else:
        w1 = np.maximum(0.0, H - span)
        w2 = np.full_like(z_axis, H)
    out = rate * g.integral(w1, w2)
    out[w2 - w1 <= _EMPTY_WINDOW] = 0.0
    return out


def two_factor_boundary_values(
    side: str,
    t: float,
    z_axis: np.ndarray,
    x1_bound: float,
    x2_axis: np.ndarray,
    model: FactorModel,
    contract: ContractSpec,
) -> np.ndarray:
    """Boundary values over (z, x2) at one time.

    The high side is a direct closed form.  The low side takes a fast path
    whenever the mean-path integrand g is positive and unimodal on the
    residual horizon (true when every decaying-exponential coefficient is
    nonpositive and g(0) > 0): the budget then binds, psi(w1) =
    g(w1 + L) - g(w1) has a single sign change, and the optimal window start
    follows from a vectorized bisection on psi.  Otherwise it falls back to
    the candidate-enumeration optimizer per node.
    """
    T = contract.horizon
    rate = float(contract.rate_cap[0])
    H = max(T - t, 0.0)
    span = np.maximum(float(contract.volume_cap[0]) - z_axis, 0.0) / rate
    out = np.zeros((z_axis.size, x2_axis.size))
    if H <= _EMPTY_WINDOW:
        return out
    for j, x2 in enumerate(x2_axis):
        g = two_factor_integrand(model, x1_bound, float(x2), contract)
        if side == "high":
            w2 = np.minimum(H, span)
            out[:, j] = rate * g.integral(0.0, w2)
            out[w2 <= _EMPTY_WINDOW, j] = 0.0
            continue
        # fast path needs g positive (budget binds) and unimodal on [0, H];
        # g' is a three-term exponential sum, so it has at most two roots and
        # a fine sample of the sign pattern is decisive
        wq = np.linspace(0.0, H, 4097)
        gv = g.value(wq)
        dg = np.sign(np.diff(gv))
        dg = dg[dg != 0.0]
        changes = int(np.sum(dg[1:] != dg[:-1])) if dg.size else 0
        rises_then_falls = changes == 0 or (changes == 1 and dg[0] > 0)
        if float(gv.min()) > 0.0 and rises_then_falls:
            L = np.minimum(span, H)
            free = H - L
            psi0 = g.value(L) - g.value(np.zeros_like(L))
            psiF = g.value(np.full_like(L, H)) - g.value(free)
            w1 = np.zeros_like(L)
            w1 = np.where(psiF >= 0.0, free, w1)
            need = (psi0 > 0.0) & (psiF < 0.0) & (L > _EMPTY_WINDOW)
            if np.any(need):
                lo = np.zeros(int(need.sum()))
                hi = free[need]
                Ln = L[need]
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    rising = (g.value(mid + Ln) - g.value(mid)) > 0.0
                    lo = np.where(rising, mid, lo)
                    hi = np.where(rising, hi, mid)
                w1[need] = 0.5 * (lo + hi)
            out[:, j] = rate * g.integral(w1, w1 + L)
            out[L <= _EMPTY_WINDOW, j] = 0.0
        else:
            for k, z in enumerate(z_axis):
                out[k, j] = bc_two_factor_low(t, float(z), x1_bound, float(x2), model, contract)[0]
    return out
