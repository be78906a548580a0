"""Monte Carlo policy evaluation against exactly simulated factor paths.

This is an independent check on the PDE solver: simulate the factors with
the exact transition law, run a given exercise policy forward with a
left-endpoint rule for the volume and cash accounts, and average the
discounted payoff.  Any admissible policy gives a lower bound on the true
value; the policy extracted from the solved surface should reproduce the
PDE value up to discretization and sampling error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contract import ContractSpec
from .factors import FactorModel, simulate_paths
from .solver import SolveResult

__all__ = ["MCResult", "evaluate_policy", "policy_from_result", "unconstrained_policy_fn"]


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    n_paths: int
    steps: int
    seed: int | None


def unconstrained_policy_fn(contract: ContractSpec):
    """Exercise whenever the instantaneous payoff is positive."""
    C = contract.payoff_matrix @ contract.price_matrix
    k = float(contract.strike[0])
    rate = float(contract.rate_cap[0])

    def policy(t, z, x):
        pay = (x @ C.T)[:, 0] + k
        return np.where(pay > 0.0, rate, 0.0)

    return policy


def policy_from_result(result: SolveResult, t_solver_times: np.ndarray | None = None):
    """Bang-bang policy read off the retained value surfaces.

    The exercise test compares the *exact* instantaneous payoff at the
    simulated state with the interpolated volume derivative of the value
    surface nearest in time; factor coordinates are clamped to the grid for
    the derivative lookup only, so paths that jump beyond the grid still see
    their true payoff.
    """
    grid, contract = result.grid, result.contract
    C = contract.payoff_matrix @ contract.price_matrix  # (1, n)
    k = float(contract.strike[0])
    rate = float(contract.rate_cap[0])
    dz = grid.dz
    surf_times = np.array([s.time for s in result.surfaces])
    vz_tables = []
    for s in result.surfaces:
        vz = np.zeros_like(s.values)
        vz[:-1] = (s.values[1:] - s.values[:-1]) / dz
        vz_tables.append(vz)

    def locate(axis, v):
        i = np.clip(np.searchsorted(axis, v) - 1, 0, axis.size - 2)
        f = np.clip((v - axis[i]) / (axis[i + 1] - axis[i]), 0.0, 1.0)
        return i, f

    T = contract.horizon
    cap = float(contract.volume_cap[0])

    def policy(t, z, x):
        si = int(np.argmin(np.abs(surf_times - t)))
        vz = vz_tables[si]
        iz, fz = locate(grid.z_axis, z)
        i1, f1 = locate(grid.x1_axis, x[:, 0])
        if grid.is_two_factor:
            i2, f2 = locate(grid.x2_axis, x[:, 1])
            v = 0.0
            for az, wz in ((0, 1 - fz), (1, fz)):
                for a1, w1 in ((0, 1 - f1), (1, f1)):
                    for a2, w2 in ((0, 1 - f2), (1, f2)):
                        v = v + wz * w1 * w2 * vz[iz + az, i1 + a1, i2 + a2]
        else:
            v = (
                (1 - fz) * (1 - f1) * vz[iz, i1]
                + (1 - fz) * f1 * vz[iz, i1 + 1]
                + fz * (1 - f1) * vz[iz + 1, i1]
                + fz * f1 * vz[iz + 1, i1 + 1]
            )
        pay = (x @ C.T)[:, 0] + k
        take = pay + v > 0.0
        # once the remaining budget covers every future exercise opportunity
        # the volume constraint is moot and the myopic rule is exactly optimal
        unconstrained = cap - z >= rate * (T - t) - 1e-12
        take = np.where(unconstrained, pay > 0.0, take)
        return np.where(take, rate, 0.0)

    return policy


def evaluate_policy(
    model: FactorModel,
    contract: ContractSpec,
    policy,
    x0,
    *,
    n_paths: int = 20000,
    steps: int = 250,
    seed: int | None = None,
) -> MCResult:
    """Discounted value of ``policy`` run forward on exact factor paths.

    ``policy(t, z, x)`` returns the exercise rate per path given the current
    time, remaining-budget-complement ``z`` (cumulative volume taken), and
    factor state ``x`` of shape (n_paths, n_factors).  Rates are clipped to
    the cap and to the remaining budget; the cash and volume accounts use
    the left endpoint of each step.
    """
    if contract.n_commodities != 1:
        raise ValueError("policy evaluation covers single-commodity contracts")
    T = contract.horizon
    r = contract.discount
    cap = float(contract.volume_cap[0])
    u_max = float(contract.rate_cap[0])
    times, paths = simulate_paths(model, x0, 0.0, T, steps, n_paths, seed=seed)
    dt = T / steps
    C = contract.payoff_matrix @ contract.price_matrix
    k = float(contract.strike[0])

    z = np.zeros(n_paths)
    cash = np.zeros(n_paths)
    for j in range(steps):
        t = float(times[j])
        x = paths[:, j, :]
        u = np.asarray(policy(t, z, x), dtype=float)
        assert np.all(u >= -1e-12) and np.all(u <= u_max + 1e-9), "inadmissible exercise rate"
        u = np.minimum(np.clip(u, 0.0, u_max), (cap - z) / dt)
        pay = (x @ C.T)[:, 0] + k
        cash += np.exp(-r * t) * pay * u * dt
        z += u * dt
    assert np.all(z <= cap + 1e-9), "volume cap violated"
    mean = float(np.mean(cash))
    stderr = float(np.std(cash, ddof=1) / np.sqrt(n_paths))
    return MCResult(mean, stderr, n_paths, steps, seed)
