"""Backward-in-time finite-difference solver for the swing HJB equation.

Scheme: first-order backward Euler in t; the volume transport (bang-bang
control term) and, in the two-factor case, the jump-factor transport are
explicit first-order upwind; the diffusive factor is implicit with a
second-order central stencil on the nonuniform axis; the jump integral is an
explicit midpoint-rule convolution with linear extrapolation beyond the
domain.  Values are exactly zero at maturity and at an exhausted volume cap.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .boundary import (
    single_factor_boundary_values,
    two_factor_boundary_values,
)
from .contract import ContractSpec
from .factors import ExpJumpSpec, FactorModel, OUFactor
from .grids import Grid

__all__ = [
    "CFLWarning",
    "ValueSurface",
    "SolveResult",
    "cfl_number",
    "jump_operator",
    "solve",
    "hjb_residual",
    "surface_to_csv",
]


class CFLWarning(UserWarning):
    """Raised (as a warning) when the explicit transport terms exceed CFL 1."""


def cfl_number(model: FactorModel, contract: ContractSpec, grid: Grid) -> float:
    """Largest CFL number of the explicit transport terms over the grid.

    (dt/dz) * rate_cap, plus (dt/dx2) * speed * x2 maximized over the jump
    axis in the two-factor case.
    """
    c = grid.dt / grid.dz * float(np.max(contract.rate_cap))
    if grid.is_two_factor:
        speed2 = model.factors[1].speed
        c += grid.dt / grid.dx2 * speed2 * float(grid.x2_axis[-1])
    return c


def jump_operator(axis: np.ndarray, jump: ExpJumpSpec, tol: float = 1e-8) -> np.ndarray:
    """Dense matrix J with (J v)_i ~ integral of [v(x_i + y) - v(x_i)] dnu(y).

    Midpoint rule on a uniform y-mesh with step equal to the mean axis
    spacing; shifted values are linearly interpolated between nodes and
    linearly extrapolated from the last two nodes beyond the domain.  The
    y-range is truncated where the remaining tail mass drops below ``tol``
    relative to the jump frequency.
    """
    n = axis.size
    h = float(np.mean(np.diff(axis)))
    y_cut = math.log(1.0 / tol) / jump.rate
    n_q = max(1, int(math.ceil(y_cut / h)))
    y_mid = (np.arange(n_q) + 0.5) * h
    w = jump.frequency * jump.rate * np.exp(-jump.rate * y_mid) * h

    J = np.zeros((n, n))
    x_hi = axis[-1]
    gap = axis[-1] - axis[-2]
    for i in range(n):
        targets = axis[i] + y_mid
        inside = targets <= x_hi
        if np.any(inside):
            idx = np.searchsorted(axis, targets[inside], side="right") - 1
            idx = np.clip(idx, 0, n - 2)
            frac = (targets[inside] - axis[idx]) / (axis[idx + 1] - axis[idx])
            np.add.at(J[i], idx, w[inside] * (1.0 - frac))
            np.add.at(J[i], idx + 1, w[inside] * frac)
        out = ~inside
        if np.any(out):
            d = (targets[out] - x_hi) / gap
            J[i, n - 1] += np.sum(w[out] * (1.0 + d))
            J[i, n - 2] -= np.sum(w[out] * d)
        J[i, i] -= np.sum(w)
    return J


@dataclass
class ValueSurface:
    """Discounted value on one time slice, with the recorded bang-bang control.

    ``control`` holds 0/1 flags (1 means exercise at the full rate), computed
    from the slice's own upwind volume derivative so that trigger extraction
    agrees with the solver exactly.  ``next_values`` optionally keeps the
    slice one time step later for residual diagnostics.
    """

    time: float
    values: np.ndarray
    control: np.ndarray
    next_values: np.ndarray | None = None
    next_time: float | None = None


@dataclass
class SolveResult:
    grid: Grid
    model: FactorModel
    contract: ContractSpec
    surfaces: list[ValueSurface] = field(default_factory=list)

    def surface_at(self, t: float) -> ValueSurface:
        best = min(self.surfaces, key=lambda s: abs(s.time - t))
        if abs(best.time - t) > 0.5 * self.grid.dt + 1e-12:
            raise KeyError(f"no retained surface near t = {t}")
        return best

    def value_at(self, t: float, z: float, x1: float, x2: float | None = None) -> float:
        """Multilinear interpolation of the retained surface nearest to t."""
        s = self.surface_at(t)
        return _interp_surface(self.grid, s.values, z, x1, x2)


def _interp_surface(grid: Grid, values: np.ndarray, z, x1, x2=None) -> float:
    def locate(axis, v):
        i = int(np.clip(np.searchsorted(axis, v) - 1, 0, axis.size - 2))
        f = (v - axis[i]) / (axis[i + 1] - axis[i])
        return i, float(np.clip(f, 0.0, 1.0))

    iz, fz = locate(grid.z_axis, z)
    i1, f1 = locate(grid.x1_axis, x1)
    if grid.is_two_factor:
        i2, f2 = locate(grid.x2_axis, x2)
        block = values[iz : iz + 2, i1 : i1 + 2, i2 : i2 + 2]
        wz = np.array([1 - fz, fz])
        w1 = np.array([1 - f1, f1])
        w2 = np.array([1 - f2, f2])
        return float(np.einsum("abc,a,b,c->", block, wz, w1, w2))
    block = values[iz : iz + 2, i1 : i1 + 2]
    return float(np.array([1 - fz, fz]) @ block @ np.array([1 - f1, f1]))


def _x1_stencil(axis: np.ndarray, drift: np.ndarray, half_var: float):
    """Lower/diag/upper coefficients of drift*d/dx + half_var*d2/dx2, interior."""
    hm = axis[1:-1] - axis[:-2]
    hp = axis[2:] - axis[1:-1]
    a = drift[1:-1]
    lo = -a * hp / (hm * (hm + hp)) + 2.0 * half_var / (hm * (hm + hp))
    di = a * (hp - hm) / (hm * hp) - 2.0 * half_var / (hm * hp)
    up = a * hm / (hp * (hm + hp)) + 2.0 * half_var / (hp * (hm + hp))
    return lo, di, up


def _build_implicit(axis, drift, half_var, dt, r, linear_bc: bool):
    """Sparse LU of (1/dt + r)I - L_x over interior nodes.

    Returns (lu, lo, up, s_lo, s_hi) where lo/up are the boundary couplings of
    the first/last interior rows and s_lo/s_hi the extrapolation weights used
    when ``linear_bc`` replaces Dirichlet data.
    """
    n = axis.size
    lo, di, up = _x1_stencil(axis, drift, half_var)
    main = (1.0 / dt + r) - di
    lower = -lo
    upper = -up
    s_lo = s_hi = None
    if linear_bc:
        # eliminate the boundary nodes with V linear in x at each end
        s_lo = (axis[1] - axis[0]) / (axis[2] - axis[1])
        s_hi = (axis[-1] - axis[-2]) / (axis[-2] - axis[-3])
        main = main.copy()
        upper = upper.copy()
        lower = lower.copy()
        main[0] += lower[0] * (1.0 + s_lo)
        upper[0] += -lower[0] * s_lo
        main[-1] += upper[-1] * (1.0 + s_hi)
        lower[-1] += -upper[-1] * s_hi
    m = n - 2
    A = sp.diags(
        [lower[1:], main, upper[:-1]], offsets=[-1, 0, 1], shape=(m, m), format="csc"
    )
    return splu(A), lo, up, s_lo, s_hi


def _check_cfl(model, contract, grid):
    c = cfl_number(model, contract, grid)
    if c > 1.0 + 1e-12:
        warnings.warn(
            f"CFL number {c:.6g} exceeds 1; the explicit transport terms may be unstable",
            CFLWarning,
            stacklevel=3,
        )
    return c


def _record_control(payoff_field, values, dz, rate):
    """Bang-bang flags from a slice's own forward volume difference."""
    vz = np.empty_like(values)
    vz[:-1] = (values[1:] - values[:-1]) / dz
    vz[-1] = 0.0
    ctrl = (payoff_field + vz > 0.0).astype(np.int8)
    ctrl[-1] = 0
    return ctrl


def solve(
    model: FactorModel,
    contract: ContractSpec,
    grid: Grid,
    *,
    jump_tol: float = 1e-8,
    retain_times=(),
    linear_x1_bc: bool = False,
    store_next: bool = False,
    bc_low=None,
    bc_high=None,
) -> SolveResult:
    """Solve the HJB equation backward from maturity on the given grid.

    ``retain_times`` lists the slice times to keep (snapped to grid nodes);
    t = 0 is always retained.  ``bc_low``/``bc_high`` override the default
    closed-form Dirichlet data (signature ``f(t, z_axis)`` for one factor or
    ``f(t, z_axis, x2_axis)`` for two); ``linear_x1_bc`` instead imposes a
    zero second derivative at the price-axis ends.
    """
    if contract.n_commodities != 1:
        raise ValueError("the PDE solver covers single-commodity contracts")
    _check_cfl(model, contract, grid)
    if grid.is_two_factor:
        return _solve_2d(
            model, contract, grid, jump_tol, retain_times, linear_x1_bc, store_next, bc_low, bc_high
        )
    return _solve_1d(
        model, contract, grid, jump_tol, retain_times, linear_x1_bc, store_next, bc_low, bc_high
    )


def _retain_index(t_axis, retain_times):
    keep = {0}
    for t in retain_times:
        keep.add(int(np.argmin(np.abs(t_axis - t))))
    return keep


def _payoff_axis(contract: ContractSpec, price: np.ndarray) -> np.ndarray:
    q = float(contract.payoff_matrix[0, 0])
    return q * price + float(contract.strike[0])


def _finish_step(V, n_finite_check, t):
    if not np.all(np.isfinite(V)):
        bad = np.argwhere(~np.isfinite(V))[0]
        raise FloatingPointError(f"non-finite value at t={t:.6g}, node index {tuple(bad)}")


def _solve_1d(model, contract, grid, jump_tol, retain_times, linear_bc, store_next, bc_low, bc_high):
    factor = model.factors[0]
    t_ax, z_ax, x_ax = grid.t_axis, grid.z_axis, grid.x1_axis
    nt, nz, nx = t_ax.size, z_ax.size, x_ax.size
    dt, dz = grid.dt, grid.dz
    r = contract.discount
    rate = float(contract.rate_cap[0])
    price = x_ax * float(contract.price_matrix[0, 0])
    pay = _payoff_axis(contract, price)

    drift = factor.drift(x_ax)
    half_var = 0.5 * factor.vol**2
    lu, lo, up, _, _ = _build_implicit(x_ax, drift, half_var, dt, r, linear_bc)
    Jmat = jump_operator(x_ax, factor.jump, jump_tol) if factor.jump is not None else None

    if bc_low is None:
        bc_low = lambda t, z: single_factor_boundary_values("low", t, z, x_ax[0], factor, contract)
    if bc_high is None:
        bc_high = lambda t, z: single_factor_boundary_values("high", t, z, x_ax[-1], factor, contract)

    keep = _retain_index(t_ax, retain_times)
    surfaces = {}
    V = np.zeros((nz, nx))
    if (nt - 1) in keep:
        surfaces[nt - 1] = ValueSurface(t_ax[-1], V.copy(), np.zeros((nz, nx), np.int8))

    for n in range(nt - 2, -1, -1):
        t = float(t_ax[n])
        v = V
        vz = (v[1:] - v[:-1]) / dz  # rows 0..nz-2; row nz-1 stays zero
        h_ctrl = pay[None, :] + vz
        src = rate * np.maximum(h_ctrl, 0.0)
        rhs = v[:-1] / dt + src
        if Jmat is not None:
            rhs += v[:-1] @ Jmat.T

        Vn = np.zeros((nz, nx))
        inner = rhs[:, 1:-1].T.copy()  # (nx-2, nz-1)
        if linear_bc:
            sol = lu.solve(inner)
            Vn[:-1, 1:-1] = sol.T
            s_lo = (x_ax[1] - x_ax[0]) / (x_ax[2] - x_ax[1])
            s_hi = (x_ax[-1] - x_ax[-2]) / (x_ax[-2] - x_ax[-3])
            Vn[:-1, 0] = (1 + s_lo) * Vn[:-1, 1] - s_lo * Vn[:-1, 2]
            Vn[:-1, -1] = (1 + s_hi) * Vn[:-1, -2] - s_hi * Vn[:-1, -3]
        else:
            b_lo = bc_low(t, z_ax[:-1])
            b_hi = bc_high(t, z_ax[:-1])
            inner[0] += lo[0] * b_lo
            inner[-1] += up[-1] * b_hi
            sol = lu.solve(inner)
            Vn[:-1, 1:-1] = sol.T
            Vn[:-1, 0] = b_lo
            Vn[:-1, -1] = b_hi
        _finish_step(Vn, None, t)
        if n in keep:
            ctrl = _record_control(pay[None, :], Vn, dz, rate)
            surfaces[n] = ValueSurface(
                t,
                Vn.copy(),
                ctrl,
                next_values=V.copy() if store_next else None,
                next_time=float(t_ax[n + 1]) if store_next else None,
            )
        V = Vn

    out = SolveResult(grid, model, contract)
    out.surfaces = [surfaces[i] for i in sorted(surfaces)]
    return out


def _solve_2d(model, contract, grid, jump_tol, retain_times, linear_bc, store_next, bc_low, bc_high):
    f1, f2 = model.factors
    t_ax, z_ax, x1, x2 = grid.t_axis, grid.z_axis, grid.x1_axis, grid.x2_axis
    nt, nz, n1, n2 = t_ax.size, z_ax.size, x1.size, x2.size
    dt, dz, dx2 = grid.dt, grid.dz, grid.dx2
    r = contract.discount
    rate = float(contract.rate_cap[0])
    b = contract.price_matrix[0]
    pay = _payoff_axis(contract, b[0] * x1[:, None] + b[1] * x2[None, :])  # (n1, n2)

    drift1 = f1.drift(x1)
    lu, lo, up, _, _ = _build_implicit(x1, drift1, 0.5 * f1.vol**2, dt, r, linear_bc)
    drift2 = f2.drift(x2)  # = -speed2 * x2, nonpositive
    Jmat = jump_operator(x2, f2.jump, jump_tol) if f2.jump is not None else None

    if bc_low is None:
        bc_low = lambda t, z, xx2: two_factor_boundary_values("low", t, z, x1[0], xx2, model, contract)
    if bc_high is None:
        bc_high = lambda t, z, xx2: two_factor_boundary_values("high", t, z, x1[-1], xx2, model, contract)

    keep = _retain_index(t_ax, retain_times)
    surfaces = {}
    V = np.zeros((nz, n1, n2))
    if (nt - 1) in keep:
        surfaces[nt - 1] = ValueSurface(t_ax[-1], V.copy(), np.zeros((nz, n1, n2), np.int8))

    for n in range(nt - 2, -1, -1):
        t = float(t_ax[n])
        v = V
        vz = (v[1:] - v[:-1]) / dz  # (nz-1, n1, n2)
        src = rate * np.maximum(pay[None] + vz, 0.0)
        rhs = v[:-1] / dt + src
        # jump-factor transport, upwind toward decreasing x2 (drift <= 0)
        dvx2 = np.zeros_like(v[:-1])
        dvx2[..., 1:] = (v[:-1, :, 1:] - v[:-1, :, :-1]) / dx2
        rhs += drift2[None, None, :] * dvx2
        if Jmat is not None:
            rhs += np.einsum("zij,kj->zik", v[:-1], Jmat)

        Vn = np.zeros((nz, n1, n2))
        inner = rhs[:, 1:-1, :]  # (nz-1, n1-2, n2)
        if linear_bc:
            flat = np.moveaxis(inner, 1, 0).reshape(n1 - 2, -1)
            sol = lu.solve(flat).reshape(n1 - 2, nz - 1, n2)
            Vn[:-1, 1:-1, :] = np.moveaxis(sol, 0, 1)
            s_lo = (x1[1] - x1[0]) / (x1[2] - x1[1])
            s_hi = (x1[-1] - x1[-2]) / (x1[-2] - x1[-3])
            Vn[:-1, 0, :] = (1 + s_lo) * Vn[:-1, 1, :] - s_lo * Vn[:-1, 2, :]
            Vn[:-1, -1, :] = (1 + s_hi) * Vn[:-1, -2, :] - s_hi * Vn[:-1, -3, :]
        else:
            b_lo = bc_low(t, z_ax[:-1], x2)  # (nz-1, n2)
            b_hi = bc_high(t, z_ax[:-1], x2)
            inner = inner.copy()
            inner[:, 0, :] += lo[0] * b_lo
            inner[:, -1, :] += up[-1] * b_hi
            flat = np.moveaxis(inner, 1, 0).reshape(n1 - 2, -1)
            sol = lu.solve(flat).reshape(n1 - 2, nz - 1, n2)
            Vn[:-1, 1:-1, :] = np.moveaxis(sol, 0, 1)
            Vn[:-1, 0, :] = b_lo
            Vn[:-1, -1, :] = b_hi
        _finish_step(Vn, None, t)
        if n in keep:
            ctrl = _record_control(pay[None], Vn, dz, rate)
            surfaces[n] = ValueSurface(
                t,
                Vn.copy(),
                ctrl,
                next_values=V.copy() if store_next else None,
                next_time=float(t_ax[n + 1]) if store_next else None,
            )
        V = Vn

    out = SolveResult(grid, model, contract)
    out.surfaces = [surfaces[i] for i in sorted(surfaces)]
    return out


def hjb_residual(result: SolveResult, surface: ValueSurface, jump_tol: float = 1e-8):
    """Pointwise residual of the HJB equation at interior nodes of one slice.

    Requires the surface to have been retained with ``store_next=True``.
    Returns a dict with the residual under the recorded control, under each
    constant control, and under the pointwise supremum.
    """
    if surface.next_values is None:
        raise ValueError("surface was retained without its successor slice; re-solve with store_next=True")
    grid, model, contract = result.grid, result.model, result.contract
    V, Vnext = surface.values, surface.next_values
    dt_slice = surface.next_time - surface.time
    r = contract.discount
    rate = float(contract.rate_cap[0])
    z_ax, x1 = grid.z_axis, grid.x1_axis
    dz = grid.dz

    vt = (Vnext - V) / dt_slice
    vz = np.zeros_like(V)
    vz[:-1] = (V[1:] - V[:-1]) / dz

    if grid.is_two_factor:
        f1, f2 = model.factors
        b = contract.price_matrix[0]
        pay = _payoff_axis(contract, b[0] * x1[:, None] + b[1] * grid.x2_axis[None, :])[None]
        lo, di, up = _x1_stencil(x1, f1.drift(x1), 0.5 * f1.vol**2)
        lx = np.zeros_like(V)
        lx[:, 1:-1, :] = (
            lo[None, :, None] * V[:, :-2, :]
            + di[None, :, None] * V[:, 1:-1, :]
            + up[None, :, None] * V[:, 2:, :]
        )
        dvx2 = np.zeros_like(V)
        dvx2[..., 1:] = (V[..., 1:] - V[..., :-1]) / grid.dx2
        lx += f2.drift(grid.x2_axis)[None, None, :] * dvx2
        if f2.jump is not None:
            lx += np.einsum("zij,kj->zik", V, jump_operator(grid.x2_axis, f2.jump, jump_tol))
        interior = np.s_[:-1, 1:-1, :]
    else:
        factor = model.factors[0]
        pay = _payoff_axis(contract, x1 * float(contract.price_matrix[0, 0]))[None]
        lo, di, up = _x1_stencil(x1, factor.drift(x1), 0.5 * factor.vol**2)
        lx = np.zeros_like(V)
        lx[:, 1:-1] = lo[None] * V[:, :-2] + di[None] * V[:, 1:-1] + up[None] * V[:, 2:]
        if factor.jump is not None:
            lx += V @ jump_operator(x1, factor.jump, jump_tol).T
        interior = np.s_[:-1, 1:-1]

    base = vt + lx - r * V
    h = pay + vz
    res_zero = base
    res_full = base + rate * h
    res_sup = base + rate * np.maximum(h, 0.0)
    res_recorded = base + rate * h * surface.control
    return {
        "recorded": res_recorded[interior],
        "zero": res_zero[interior],
        "full": res_full[interior],
        "sup": res_sup[interior],
        "trigger": h[interior],
    }


def surface_to_csv(result: SolveResult, surface: ValueSurface) -> str:
    """One row per node: t,z,x1[,x2],value,control at full precision."""
    grid = result.grid
    buf = io.StringIO()
    t_repr = repr(float(surface.time))
    if grid.is_two_factor:
        buf.write("t,z,x1,x2,value,control\n")
        for k, z in enumerate(grid.z_axis):
            for i, a in enumerate(grid.x1_axis):
                for j, bb in enumerate(grid.x2_axis):
                    buf.write(
                        f"{t_repr},{float(z)!r},{float(a)!r},{float(bb)!r},"
                        f"{float(surface.values[k, i, j])!r},{int(surface.control[k, i, j])}\n"
                    )
    else:
        buf.write("t,z,x1,value,control\n")
        for k, z in enumerate(grid.z_axis):
            for i, a in enumerate(grid.x1_axis):
                buf.write(
                    f"{t_repr},{float(z)!r},{float(a)!r},"
                    f"{float(surface.values[k, i])!r},{int(surface.control[k, i])}\n"
                )
    return buf.getvalue()
