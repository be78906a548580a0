"""Swing-option valuation under Lévy-OU factor dynamics.

Finite-difference HJB solver with closed-form truncated-domain boundary
conditions, bang-bang trigger extraction, and closed-form / Monte Carlo
cross-checks, fronted by an HTTP service and a CLI.
"""
from .boundary import (
    bc_single_factor,
    bc_two_factor_high,
    bc_two_factor_low,
    single_factor_boundary_values,
    two_factor_boundary_values,
)
from .config import RunConfig, build_contract, build_grid, build_model, load_preset, parse_config
from .contract import ContractSpec, unconstrained_policy, unconstrained_value
from .factors import ExpJumpSpec, FactorModel, OUFactor, moment_match, simulate_paths
from .grids import Grid, build_adaptive_x1
from .mc import evaluate_policy, policy_from_result
from .solver import SolveResult, ValueSurface, cfl_number, hjb_residual, jump_operator, solve
from .triggers import TriggerCurve, lsq_slope, trigger_1d, trigger_2d_projections

__version__ = "0.1.0"

__all__ = [
    "ExpJumpSpec",
    "OUFactor",
    "FactorModel",
    "moment_match",
    "simulate_paths",
    "ContractSpec",
    "unconstrained_policy",
    "unconstrained_value",
    "bc_single_factor",
    "bc_two_factor_high",
    "bc_two_factor_low",
    "single_factor_boundary_values",
    "two_factor_boundary_values",
    "Grid",
    "build_adaptive_x1",
    "solve",
    "SolveResult",
    "ValueSurface",
    "cfl_number",
    "jump_operator",
    "hjb_residual",
    "TriggerCurve",
    "trigger_1d",
    "trigger_2d_projections",
    "lsq_slope",
    "evaluate_policy",
    "policy_from_result",
    "RunConfig",
    "parse_config",
    "load_preset",
    "build_model",
    "build_contract",
    "build_grid",
]
