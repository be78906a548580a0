"""Trigger-curve extraction from solved value surfaces.

The optimal control is bang-bang: exercise at the full rate wherever the
immediate payoff exceeds the marginal lost option value (minus the volume
derivative of the value function).  For a single diffusive factor the
exercise region at fixed time is bounded by a trigger price per remaining
volume level; in the two-factor case the boundary is a curve in the factor
plane for each volume level, and its projection onto the price axis.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .solver import SolveResult, ValueSurface

__all__ = ["TriggerCurve", "trigger_1d", "trigger_2d_projections", "lsq_slope", "curve_to_csv"]


@dataclass
class TriggerCurve:
    """Trigger locations along an abscissa, with per-point validity flags.

    ``multiple`` marks abscissa points where the exercise indicator changes
    sign more than once (the leftmost crossing is reported); ``missing``
    marks points with no crossing inside the domain (NaN value).
    """

    time: float
    abscissa: np.ndarray
    values: np.ndarray
    multiple: np.ndarray
    missing: np.ndarray
    abscissa_name: str = "z"
    value_name: str = "x1"


def _exercise_indicator(surface: ValueSurface, pay: np.ndarray, dz: float) -> np.ndarray:
    vz = np.zeros_like(surface.values)
    vz[:-1] = (surface.values[1:] - surface.values[:-1]) / dz
    return pay + vz


def _leftmost_crossings(axis: np.ndarray, h_rows: np.ndarray):
    """Linear-interpolated zero crossings of each row of h along axis.

    Returns (values, multiple, missing).  A row written entirely with one
    sign has no crossing; sign changes beyond the first set ``multiple``.
    """
    n_rows = h_rows.shape[0]
    out = np.full(n_rows, np.nan)
    multi = np.zeros(n_rows, bool)
    miss = np.zeros(n_rows, bool)
    sign = h_rows > 0.0
    flips = sign[:, 1:] != sign[:, :-1]
    for k in range(n_rows):
        idx = np.flatnonzero(flips[k])
        if idx.size == 0:
            miss[k] = True
            continue
        if idx.size > 1:
            multi[k] = True
        i = idx[0]
        h0, h1 = h_rows[k, i], h_rows[k, i + 1]
        out[k] = axis[i] + (axis[i + 1] - axis[i]) * h0 / (h0 - h1)
    return out, multi, miss


def trigger_1d(result: SolveResult, surface: ValueSurface) -> TriggerCurve:
    """Trigger factor level per volume node, for the single-factor model."""
    grid, contract = result.grid, result.contract
    if grid.is_two_factor:
        raise ValueError("trigger_1d expects a single-factor solve")
    pay = (
        float(contract.payoff_matrix[0, 0]) * float(contract.price_matrix[0, 0]) * grid.x1_axis
        + float(contract.strike[0])
    )
    h = _exercise_indicator(surface, pay[None, :], grid.dz)
    # skip z = cap: there V_z is pinned to zero and exercise never pays
    vals, multi, miss = _leftmost_crossings(grid.x1_axis, h[:-1])
    return TriggerCurve(surface.time, grid.z_axis[:-1].copy(), vals, multi, miss)


def trigger_2d_projections(result: SolveResult, surface: ValueSurface, z: float, x2: float = 0.0):
    """Two projections of the two-factor exercise boundary.

    Returns ``(plane_curve, price_curve)``: the jump-factor trigger level as
    a function of the diffusive factor at the volume level nearest ``z``
    (the factor-plane projection), and the trigger *price* as a function of
    volume at the jump-factor level nearest ``x2`` (the price-volume
    projection).
    """
    grid, contract = result.grid, result.contract
    if not grid.is_two_factor:
        raise ValueError("trigger_2d_projections expects a two-factor solve")
    b = contract.price_matrix[0]
    pay = (
        float(contract.payoff_matrix[0, 0]) * (b[0] * grid.x1_axis[:, None] + b[1] * grid.x2_axis[None, :])
        + float(contract.strike[0])
    )
    h = _exercise_indicator(surface, pay[None], grid.dz)

    iz = min(int(np.argmin(np.abs(grid.z_axis - z))), grid.z_axis.size - 2)
    vals, multi, miss = _leftmost_crossings(grid.x2_axis, h[iz])
    plane = TriggerCurve(
        surface.time, grid.x1_axis.copy(), vals, multi, miss, abscissa_name="x1", value_name="x2"
    )

    j2 = int(np.argmin(np.abs(grid.x2_axis - x2)))
    x1_vals, p_multi, p_miss = _leftmost_crossings(grid.x1_axis, h[:-1, :, j2])
    price = TriggerCurve(
        surface.time,
        grid.z_axis[:-1].copy(),
        b[0] * x1_vals + b[1] * grid.x2_axis[j2],
        p_multi,
        p_miss,
        abscissa_name="z",
        value_name="price",
    )
    return plane, price


def lsq_slope(curve: TriggerCurve, exclude_first: int = 0, min_value: float | None = None) -> float:
    """Least-squares slope of the curve, skipping flagged and leading points.

    ``min_value`` drops points whose value falls below it, e.g. to exclude
    the point where the boundary meets the axis of the jump factor.
    """
    keep = ~(curve.missing | np.isnan(curve.values))
    keep[:exclude_first] = False
    if min_value is not None:
        keep &= ~(curve.values < min_value)
    x = curve.abscissa[keep]
    y = curve.values[keep]
    if x.size < 2:
        raise ValueError("fewer than two usable points for a slope fit")
    return float(np.polyfit(x, y, 1)[0])


def curve_to_csv(curve: TriggerCurve) -> str:
    buf = io.StringIO()
    buf.write(f"t,{curve.abscissa_name},{curve.value_name},multiple,missing\n")
    t_repr = repr(float(curve.time))
    for a, v, m, s in zip(curve.abscissa, curve.values, curve.multiple, curve.missing):
        buf.write(f"{t_repr},{float(a)!r},{float(v)!r},{int(m)},{int(s)}\n")
    return buf.getvalue()
