"""Subcommand orchestration shared by the HTTP service and the CLI.

Each runner takes a validated RunConfig and returns ``(summary, artifacts,
appends)``: a JSON-able summary dict, a mapping of artifact file names to
text content (CSV data and gnuplot scripts), and a mapping of ledger file
names to rows that callers append rather than overwrite.  Runners never
touch the filesystem; callers decide where artifacts land.
"""
from __future__ import annotations

import hashlib
import time

import numpy as np

from .boundary import single_factor_boundary_values, two_factor_boundary_values
from .config import RunConfig, build_contract, build_grid, build_model, echo_config
from .mc import evaluate_policy, policy_from_result
from .solver import cfl_number, solve, surface_to_csv
from .triggers import curve_to_csv, lsq_slope, trigger_1d, trigger_2d_projections

__all__ = ["run_solve", "run_trigger", "run_cfl", "run_boundary_check", "run_mc_check", "config_hash"]


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(echo_config(cfg).encode()).hexdigest()[:12]


def _surface_plot_script(csv_name: str, tag: str, two_factor: bool) -> str:
    lines = [
        "set datafile separator ','",
        "set dgrid3d 40,40",
        "set hidden3d",
        f"set title 'value surface {tag}'",
        "set xlabel 'z'",
        "set ylabel 'x1'",
        "set zlabel 'V'",
    ]
    col = "5" if two_factor else "4"
    lines.append(f"splot '{csv_name}' every ::1 using 2:3:{col} with lines notitle")
    lines.append(f"pause -1")
    return "\n".join(lines) + "\n"


def _curve_plot_script(csv_name: str, tag: str, xlab: str, ylab: str) -> str:
    return "\n".join(
        [
            "set datafile separator ','",
            f"set title 'trigger curve {tag}'",
            f"set xlabel '{xlab}'",
            f"set ylabel '{ylab}'",
            f"plot '{csv_name}' every ::1 using 2:3 with lines notitle",
            "pause -1",
        ]
    ) + "\n"


def _solved(cfg: RunConfig, paper_scale: bool, **kw):
    model = build_model(cfg)
    contract = build_contract(cfg)
    grid = build_grid(cfg, paper_scale=paper_scale)
    result = solve(model, contract, grid, retain_times=cfg.retain_times, **kw)
    return model, contract, grid, result


def run_solve(cfg: RunConfig, paper_scale: bool = False):
    model, contract, grid, result = _solved(cfg, paper_scale)
    artifacts = {"config_echo.ini": echo_config(cfg)}
    slices = []
    for s in result.surfaces:
        tag = f"t{s.time:.4f}".replace(".", "p")
        csv_name = f"surface_{tag}.csv"
        artifacts[csv_name] = surface_to_csv(result, s)
        artifacts[f"surface_{tag}.gp"] = _surface_plot_script(csv_name, tag, grid.is_two_factor)
        x0 = cfg.model.x0
        v0 = result.value_at(s.time, 0.0, x0[0], x0[1] if len(x0) > 1 else None)
        slices.append({"time": s.time, "value_at_x0_z0": v0})
    summary = {
        "subcommand": "solve",
        "example": cfg.example,
        "config_hash": config_hash(cfg),
        "paper_scale": paper_scale,
        "cfl": cfl_number(model, contract, grid),
        "slices": slices,
        "value_t0": slices[0]["value_at_x0_z0"],
    }
    return summary, artifacts, {}


def run_trigger(cfg: RunConfig, paper_scale: bool = False, t: float = 0.5, z: float = 0.0):
    model, contract, grid, result = _solved(cfg, paper_scale)
    surface = result.surface_at(t)
    artifacts = {"config_echo.ini": echo_config(cfg)}
    summary = {
        "subcommand": "trigger",
        "example": cfg.example,
        "config_hash": config_hash(cfg),
        "time": surface.time,
    }
    if grid.is_two_factor:
        plane, price = trigger_2d_projections(result, surface, z)
        artifacts["trigger_plane.csv"] = curve_to_csv(plane)
        artifacts["trigger_price.csv"] = curve_to_csv(price)
        artifacts["trigger_plane.gp"] = _curve_plot_script("trigger_plane.csv", cfg.example, "x1", "x2")
        artifacts["trigger_price.gp"] = _curve_plot_script("trigger_price.csv", cfg.example, "z", "price")
        summary["slope_plane"] = lsq_slope(plane, min_value=grid.dx2)
        summary["n_missing"] = int(np.sum(plane.missing))
        summary["n_multiple"] = int(np.sum(plane.multiple))
    else:
        curve = trigger_1d(result, surface)
        artifacts["trigger_z.csv"] = curve_to_csv(curve)
        artifacts["trigger_z.gp"] = _curve_plot_script("trigger_z.csv", cfg.example, "z", "x1")
        summary["n_missing"] = int(np.sum(curve.missing))
        summary["n_multiple"] = int(np.sum(curve.multiple))
    return summary, artifacts, {}


def run_cfl(cfg: RunConfig, paper_scale: bool = False):
    model = build_model(cfg)
    contract = build_contract(cfg)
    grid = build_grid(cfg, paper_scale=paper_scale)
    c = cfl_number(model, contract, grid)
    # C scales linearly in dt, so the stability edge is dt / C
    max_dt = grid.dt / c if c > 0 else float("inf")
    summary = {
        "subcommand": "cfl",
        "example": cfg.example,
        "config_hash": config_hash(cfg),
        "paper_scale": paper_scale,
        "cfl": c,
        "stable": bool(c <= 1.0),
        "max_stable_dt": max_dt,
    }
    return summary, {"config_echo.ini": echo_config(cfg)}, {}


def run_boundary_check(cfg: RunConfig, paper_scale: bool = False, t: float = 0.5, z: float = 0.4):
    """Interior consistency of the closed-form upper boundary data.

    Solves the PDE with the model-free linear (zero second derivative)
    closure instead of the Dirichlet data, then compares the solved values
    near the upper price boundary against the closed-form expression.
    """
    model, contract, grid, result = _solved(cfg, paper_scale, linear_x1_bc=True)
    surface = result.surface_at(t)
    iz = int(np.argmin(np.abs(grid.z_axis - z)))
    tt = surface.time
    zz = float(grid.z_axis[iz])
    rows = []
    lines = ["x1,x2,pde_value,closed_form,abs_diff,ratio"] if grid.is_two_factor else [
        "x1,pde_value,closed_form,abs_diff,ratio"
    ]
    for i in (-3, -2, -1):
        x1 = float(grid.x1_axis[i])
        if grid.is_two_factor:
            bc = two_factor_boundary_values("high", tt, np.array([zz]), x1, grid.x2_axis, model, contract)[0]
            pde = surface.values[iz, i, :]
            diff = np.abs(pde - bc)
            ratio = diff / np.maximum(np.abs(bc), 1e-300)
            worst = int(np.argmax(ratio))
            rows.append({"x1": x1, "max_abs_diff": float(diff.max()), "max_ratio": float(ratio[worst])})
            for j, x2 in enumerate(grid.x2_axis):
                lines.append(f"{x1!r},{x2!r},{pde[j]!r},{bc[j]!r},{diff[j]!r},{ratio[j]!r}")
        else:
            factor = model.factors[0]
            bc = float(single_factor_boundary_values("high", tt, np.array([zz]), x1, factor, contract)[0])
            pde = float(surface.values[iz, i])
            diff = abs(pde - bc)
            ratio = diff / max(abs(bc), 1e-300)
            rows.append({"x1": x1, "max_abs_diff": diff, "max_ratio": ratio})
            lines.append(f"{x1!r},{pde!r},{bc!r},{diff!r},{ratio!r}")
    summary = {
        "subcommand": "boundary-check",
        "example": cfg.example,
        "config_hash": config_hash(cfg),
        "time": tt,
        "z": zz,
        "nodes": rows,
        "worst_ratio": max(r["max_ratio"] for r in rows),
    }
    artifacts = {
        "config_echo.ini": echo_config(cfg),
        "boundary_check.csv": "\n".join(lines) + "\n",
    }
    return summary, artifacts, {}


def run_mc_check(cfg: RunConfig, paper_scale: bool = False, seed: int | None = None):
    t_start = time.perf_counter()
    model = build_model(cfg)
    contract = build_contract(cfg)
    grid = build_grid(cfg, paper_scale=paper_scale)
    # the forward policy needs value slices across the whole horizon, not
    # just the display times
    ladder = np.linspace(0.0, contract.horizon, 21)
    retain = sorted(set(np.round(ladder, 12)) | set(cfg.retain_times))
    result = solve(model, contract, grid, retain_times=retain)
    x0 = np.array(cfg.model.x0)
    v_pde = result.value_at(0.0, 0.0, x0[0], x0[1] if x0.size > 1 else None)
    policy = policy_from_result(result)
    mc = evaluate_policy(
        model,
        contract,
        policy,
        x0,
        n_paths=cfg.mc_paths,
        steps=cfg.mc_steps,
        seed=cfg.seed if seed is None else seed,
    )
    wall = time.perf_counter() - t_start
    summary = {
        "subcommand": "mc-check",
        "example": cfg.example,
        "config_hash": config_hash(cfg),
        "pde_value": v_pde,
        "mc_mean": mc.mean,
        "mc_stderr": mc.stderr,
        "n_paths": mc.n_paths,
        "steps": mc.steps,
        "seed": mc.seed,
        "gap": v_pde - mc.mean,
        "wall_seconds": wall,
    }
    header = "config_hash,example,n_paths,steps,seed,pde_value,mc_mean,mc_stderr,wall_seconds"
    row = (
        f"{config_hash(cfg)},{cfg.example},{mc.n_paths},{mc.steps},{mc.seed},"
        f"{v_pde!r},{mc.mean!r},{mc.stderr!r},{wall:.3f}"
    )
    appends = {"mc_ledger.csv": (header, row)}
    return summary, {"config_echo.ini": echo_config(cfg)}, appends
