"""Run configuration: INI grammar, validation, presets, and model builders.

Grammar: ``key = value`` lines grouped in ``[run]``, ``[model]``,
``[contract]`` and ``[scheme]`` sections.  Unknown keys are rejected with
the offending line number.  List-valued keys (``x0``, ``price_loadings``,
``retain_times``) are whitespace-separated numbers.  Scheme keys come in a
production pair: plain keys define the fine reference grid, ``desk_*`` keys
the coarser default used unless the paper-scale flag is set.
"""
from __future__ import annotations

import configparser
import io
import warnings
from importlib import resources
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .contract import ContractSpec
from .factors import ExpJumpSpec, FactorModel, OUFactor, moment_match
from .grids import Grid, build_adaptive_x1

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_preset",
    "preset_names",
    "echo_config",
    "build_model",
    "build_contract",
    "build_grid",
]

PRESETS = ("ex1", "ex2", "ex3")


class ConfigError(ValueError):
    pass


class JumpParams(BaseModel):
    frequency: float = Field(ge=0)
    rate: float = Field(gt=0)
    mean_effect: Literal["level", "drift"] = "level"


class FactorParams(BaseModel):
    speed: float = Field(ge=0)
    level: float = 0.0
    vol: float = Field(default=0.0, ge=0)
    jump: Optional[JumpParams] = None


class ModelParams(BaseModel):
    factors: list[FactorParams] = Field(min_length=1, max_length=2)
    x0: list[float]
    moment_match: bool = False

    @model_validator(mode="after")
    def _check(self):
        if len(self.x0) != len(self.factors):
            raise ValueError("x0 must supply one value per factor")
        if self.moment_match and self.factors[0].jump is None:
            raise ValueError("moment_match requires jump parameters on the first factor")
        return self


class ContractParams(BaseModel):
    strike: float = 0.0
    volume_cap: float = Field(gt=0)
    rate_cap: float = Field(gt=0)
    horizon: float = Field(gt=0)
    discount: float = Field(ge=0)
    price_loadings: list[float] = Field(default_factory=lambda: [1.0])


class SchemeParams(BaseModel):
    x1_min: float
    x1_max: float
    x1_nodes: int = Field(ge=3)
    t_steps: int = Field(ge=2)
    z_steps: int = Field(ge=2)
    cluster_center: Optional[float] = None
    cluster_strength: float = Field(default=0.15, ge=0)
    x2_max: Optional[float] = None
    x2_nodes: Optional[int] = Field(default=None, ge=3)
    desk_x1_nodes: Optional[int] = Field(default=None, ge=3)
    desk_t_steps: Optional[int] = Field(default=None, ge=2)
    desk_z_steps: Optional[int] = Field(default=None, ge=2)
    desk_x2_nodes: Optional[int] = Field(default=None, ge=3)

    @model_validator(mode="after")
    def _check(self):
        if self.x1_max <= self.x1_min:
            raise ValueError("x1_max must exceed x1_min")
        if (self.x2_max is None) != (self.x2_nodes is None):
            raise ValueError("x2_max and x2_nodes must be given together")
        return self


class RunConfig(BaseModel):
    example: Literal["ex1", "ex2", "ex3", "custom"]
    model: ModelParams
    contract: ContractParams
    scheme: SchemeParams
    out_dir: Optional[str] = None
    seed: int = 0
    retain_times: list[float] = Field(default_factory=lambda: [0.0])
    mc_paths: int = Field(default=100_000, gt=0)
    mc_steps: int = Field(default=250, gt=0)

    @model_validator(mode="after")
    def _check(self):
        two = len(self.model.factors) == 2
        if two and self.scheme.x2_max is None:
            raise ValueError("two-factor models need x2_max/x2_nodes in [scheme]")
        if not two and self.scheme.x2_max is not None:
            raise ValueError("x2_max/x2_nodes only apply to two-factor models")
        if len(self.contract.price_loadings) != len(self.model.factors):
            raise ValueError("price_loadings must supply one weight per factor")
        return self


_SECTION_KEYS = {
    "run": {"example", "seed", "out_dir", "retain_times", "mc_paths", "mc_steps"},
    "model": {
        "factors",
        "x0",
        "moment_match",
        "speed1",
        "level1",
        "vol1",
        "jump_frequency1",
        "jump_rate1",
        "jump_mean_effect1",
        "speed2",
        "level2",
        "vol2",
        "jump_frequency2",
        "jump_rate2",
        "jump_mean_effect2",
    },
    "contract": {"strike", "volume_cap", "rate_cap", "horizon", "discount", "price_loadings"},
    "scheme": {
        "x1_min",
        "x1_max",
        "x1_nodes",
        "t_steps",
        "z_steps",
        "cluster_center",
        "cluster_strength",
        "x2_max",
        "x2_nodes",
        "desk_x1_nodes",
        "desk_t_steps",
        "desk_z_steps",
        "desk_x2_nodes",
    },
}

_REQUIRED = {
    "run": {"example"},
    "model": {"factors", "x0", "speed1", "level1"},
    "contract": {"volume_cap", "rate_cap", "horizon", "discount"},
    "scheme": {"x1_min", "x1_max", "x1_nodes", "t_steps", "z_steps"},
}


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
        elif current == section and "=" in s and not s.startswith(("#", ";")):
            if s.split("=", 1)[0].strip().lower() == key:
                return i
    return None


def _floats(s: str) -> list[float]:
    return [float(tok) for tok in s.split()]


def _jump_params(sec, i: int) -> Optional[JumpParams]:
    freq = sec.get(f"jump_frequency{i}")
    rate = sec.get(f"jump_rate{i}")
    if freq is None and rate is None:
        return None
    if freq is None or rate is None:
        raise ConfigError(f"jump_frequency{i} and jump_rate{i} must be given together")
    return JumpParams(
        frequency=float(freq),
        rate=float(rate),
        mean_effect=sec.get(f"jump_mean_effect{i}", "level"),
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate INI config text; errors carry line numbers."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    missing = []
    for section, req in _REQUIRED.items():
        if not cp.has_section(section):
            missing.append(f"section [{section}] with keys: {', '.join(sorted(req))}")
        else:
            for key in sorted(req - set(cp[section])):
                missing.append(f"[{section}] {key}")
    if missing:
        raise ConfigError("missing required configuration: " + "; ".join(missing))

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in cp[section]:
            if key not in _SECTION_KEYS[section]:
                line = _line_of(text, section, key)
                where = f" (line {line})" if line else ""
                raise ConfigError(f"unknown key '{key}' in [{section}]{where}")

    run, mdl, con, sch = cp["run"], cp["model"], cp["contract"], cp["scheme"]
    try:
        n_factors = int(mdl["factors"])
        factors = []
        for i in range(1, n_factors + 1):
            if f"speed{i}" not in mdl:
                raise ConfigError(f"[model] factors = {n_factors} but speed{i} is missing")
            factors.append(
                FactorParams(
                    speed=float(mdl[f"speed{i}"]),
                    level=float(mdl.get(f"level{i}", 0.0)),
                    vol=float(mdl.get(f"vol{i}", 0.0)),
                    jump=_jump_params(mdl, i),
                )
            )
        cfg = RunConfig(
            example=run["example"],
            model=ModelParams(
                factors=factors,
                x0=_floats(mdl["x0"]),
                moment_match=mdl.getboolean("moment_match", fallback=False),
            ),
            contract=ContractParams(
                strike=float(con.get("strike", 0.0)),
                volume_cap=float(con["volume_cap"]),
                rate_cap=float(con["rate_cap"]),
                horizon=float(con["horizon"]),
                discount=float(con["discount"]),
                price_loadings=_floats(con.get("price_loadings", "1 " * n_factors)),
            ),
            scheme=SchemeParams(
                x1_min=float(sch["x1_min"]),
                x1_max=float(sch["x1_max"]),
                x1_nodes=int(sch["x1_nodes"]),
                t_steps=int(sch["t_steps"]),
                z_steps=int(sch["z_steps"]),
                cluster_center=float(sch["cluster_center"]) if "cluster_center" in sch else None,
                cluster_strength=float(sch.get("cluster_strength", 0.15)),
                x2_max=float(sch["x2_max"]) if "x2_max" in sch else None,
                x2_nodes=int(sch["x2_nodes"]) if "x2_nodes" in sch else None,
                desk_x1_nodes=int(sch["desk_x1_nodes"]) if "desk_x1_nodes" in sch else None,
                desk_t_steps=int(sch["desk_t_steps"]) if "desk_t_steps" in sch else None,
                desk_z_steps=int(sch["desk_z_steps"]) if "desk_z_steps" in sch else None,
                desk_x2_nodes=int(sch["desk_x2_nodes"]) if "desk_x2_nodes" in sch else None,
            ),
            out_dir=run.get("out_dir") or None,
            seed=run.getint("seed", fallback=0),
            retain_times=_floats(run.get("retain_times", "0")),
            mc_paths=run.getint("mc_paths", fallback=100_000),
            mc_steps=run.getint("mc_steps", fallback=250),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def preset_names() -> tuple[str, ...]:
    return PRESETS


def load_preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; available: {', '.join(PRESETS)}")
    text = resources.files("swingopt.configs").joinpath(f"{name}.ini").read_text()
    return parse_config(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return " ".join(repr(float(x)) for x in v)
    return str(v)


def echo_config(cfg: RunConfig) -> str:
    """Resolved config as INI text; parse_config(echo_config(c)) == c."""
    buf = io.StringIO()
    buf.write("[run]\n")
    buf.write(f"example = {cfg.example}\n")
    buf.write(f"seed = {cfg.seed}\n")
    if cfg.out_dir is not None:
        buf.write(f"out_dir = {cfg.out_dir}\n")
    buf.write(f"retain_times = {_fmt(cfg.retain_times)}\n")
    buf.write(f"mc_paths = {cfg.mc_paths}\n")
    buf.write(f"mc_steps = {cfg.mc_steps}\n\n")

    buf.write("[model]\n")
    buf.write(f"factors = {len(cfg.model.factors)}\n")
    buf.write(f"x0 = {_fmt(cfg.model.x0)}\n")
    buf.write(f"moment_match = {_fmt(cfg.model.moment_match)}\n")
    for i, f in enumerate(cfg.model.factors, start=1):
        buf.write(f"speed{i} = {_fmt(f.speed)}\n")
        buf.write(f"level{i} = {_fmt(f.level)}\n")
        buf.write(f"vol{i} = {_fmt(f.vol)}\n")
        if f.jump is not None:
            buf.write(f"jump_frequency{i} = {_fmt(f.jump.frequency)}\n")
            buf.write(f"jump_rate{i} = {_fmt(f.jump.rate)}\n")
            buf.write(f"jump_mean_effect{i} = {f.jump.mean_effect}\n")
    buf.write("\n[contract]\n")
    c = cfg.contract
    buf.write(f"strike = {_fmt(c.strike)}\n")
    buf.write(f"volume_cap = {_fmt(c.volume_cap)}\n")
    buf.write(f"rate_cap = {_fmt(c.rate_cap)}\n")
    buf.write(f"horizon = {_fmt(c.horizon)}\n")
    buf.write(f"discount = {_fmt(c.discount)}\n")
    buf.write(f"price_loadings = {_fmt(c.price_loadings)}\n")

    buf.write("\n[scheme]\n")
    s = cfg.scheme
    buf.write(f"x1_min = {_fmt(s.x1_min)}\n")
    buf.write(f"x1_max = {_fmt(s.x1_max)}\n")
    buf.write(f"x1_nodes = {s.x1_nodes}\n")
    buf.write(f"t_steps = {s.t_steps}\n")
    buf.write(f"z_steps = {s.z_steps}\n")
    if s.cluster_center is not None:
        buf.write(f"cluster_center = {_fmt(s.cluster_center)}\n")
    buf.write(f"cluster_strength = {_fmt(s.cluster_strength)}\n")
    for key in ("x2_max", "x2_nodes", "desk_x1_nodes", "desk_t_steps", "desk_z_steps", "desk_x2_nodes"):
        v = getattr(s, key)
        if v is not None:
            buf.write(f"{key} = {_fmt(v)}\n")
    return buf.getvalue()


def build_model(cfg: RunConfig) -> FactorModel:
    """Instantiate the factor model, applying moment matching if requested."""
    factors = []
    for i, fp in enumerate(cfg.model.factors):
        level, vol = fp.level, fp.vol
        jump = None
        if fp.jump is not None:
            jump = ExpJumpSpec(fp.jump.frequency, fp.jump.rate, fp.jump.mean_effect)
        if i == 0 and cfg.model.moment_match:
            level, vol = moment_match(level, vol, jump.frequency, jump.rate)
            alt = float(np.sqrt(fp.vol**2 - jump.frequency / jump.rate))
            if abs(vol - alt) > 1e-9:
                warnings.warn(
                    f"moment-matched vol {vol:.6g} follows the variance-rate formula "
                    f"sqrt(vol^2 - 2f/rate^2); the alternative sqrt(vol^2 - f/rate) "
                    f"convention would give {alt:.6g}",
                    stacklevel=2,
                )
        factors.append(OUFactor(speed=fp.speed, level=level, vol=vol, jump=jump))
    return FactorModel(tuple(factors))


def build_contract(cfg: RunConfig) -> ContractSpec:
    c = cfg.contract
    return ContractSpec.single(
        price_row=c.price_loadings,
        strike=c.strike,
        volume_cap=c.volume_cap,
        rate_cap=c.rate_cap,
        horizon=c.horizon,
        discount=c.discount,
    )


def build_grid(cfg: RunConfig, paper_scale: bool = False, refine: int = 1) -> Grid:
    """Build the Grid at desk scale (default) or the fine reference scale.

    ``refine`` multiplies the step counts and (x-node counts - 1) for
    refinement studies.
    """
    s = cfg.scheme
    if paper_scale:
        x1_nodes, t_steps, z_steps, x2_nodes = s.x1_nodes, s.t_steps, s.z_steps, s.x2_nodes
    else:
        x1_nodes = s.desk_x1_nodes or s.x1_nodes
        t_steps = s.desk_t_steps or s.t_steps
        z_steps = s.desk_z_steps or s.z_steps
        x2_nodes = s.desk_x2_nodes or s.x2_nodes
    if refine != 1:
        x1_nodes = (x1_nodes - 1) * refine + 1
        t_steps *= refine
        z_steps *= refine
        if x2_nodes is not None:
            x2_nodes = (x2_nodes - 1) * refine + 1
    center = s.cluster_center if s.cluster_center is not None else 0.5 * (s.x1_min + s.x1_max)
    strength = s.cluster_strength if s.cluster_center is not None else 0.0
    x1 = build_adaptive_x1(s.x1_min, s.x1_max, x1_nodes, center, cluster_strength=strength)
    t_axis = np.linspace(0.0, cfg.contract.horizon, t_steps + 1)
    z_axis = np.linspace(0.0, cfg.contract.volume_cap, z_steps + 1)
    x2_axis = None
    if len(cfg.model.factors) == 2:
        x2_axis = np.linspace(0.0, s.x2_max, x2_nodes)
    return Grid(t_axis=t_axis, z_axis=z_axis, x1_axis=x1, x2_axis=x2_axis)
