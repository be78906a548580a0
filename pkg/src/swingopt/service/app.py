"""HTTP service exposing the valuation engine.

Requests carry raw config text plus a few overrides; responses carry a
summary, the artifact files as text, and ledger rows to append.  The
service holds no state, so the CLI can run it in-process or talk to a
remote instance identically.
"""
from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .. import runner
from ..config import ConfigError, echo_config, load_preset, parse_config, preset_names

app = FastAPI(title="swingopt", version="0.1.0")


class RunRequest(BaseModel):
    config_text: Optional[str] = None
    preset: Optional[str] = None
    paper_scale: bool = False
    seed: Optional[int] = None
    time: Optional[float] = Field(default=None, description="slice time for trigger/boundary-check")
    z: Optional[float] = Field(default=None, description="volume level for trigger/boundary-check")


class RunResponse(BaseModel):
    summary: dict
    artifacts: dict[str, str]
    appends: dict[str, tuple[str, str]]


class ParseResponse(BaseModel):
    valid: bool
    echo: str
    example: str


def _resolve_config(req: RunRequest):
    if (req.config_text is None) == (req.preset is None):
        raise HTTPException(422, "provide exactly one of config_text or preset")
    try:
        cfg = load_preset(req.preset) if req.preset else parse_config(req.config_text)
    except ConfigError as exc:
        raise HTTPException(422, str(exc))
    if req.seed is not None:
        cfg = cfg.model_copy(update={"seed": req.seed})
    return cfg


@app.get("/health")
def health():
    return {"status": "ok", "presets": list(preset_names())}


@app.post("/config/parse", response_model=ParseResponse)
def config_parse(req: RunRequest):
    cfg = _resolve_config(req)
    return ParseResponse(valid=True, echo=echo_config(cfg), example=cfg.example)


_RUNNERS = {
    "solve": lambda cfg, req: runner.run_solve(cfg, paper_scale=req.paper_scale),
    "trigger": lambda cfg, req: runner.run_trigger(
        cfg,
        paper_scale=req.paper_scale,
        t=0.5 if req.time is None else req.time,
        z=0.0 if req.z is None else req.z,
    ),
    "cfl": lambda cfg, req: runner.run_cfl(cfg, paper_scale=req.paper_scale),
    "boundary-check": lambda cfg, req: runner.run_boundary_check(
        cfg,
        paper_scale=req.paper_scale,
        t=0.5 if req.time is None else req.time,
        z=0.4 if req.z is None else req.z,
    ),
    "mc-check": lambda cfg, req: runner.run_mc_check(cfg, paper_scale=req.paper_scale, seed=req.seed),
}


@app.post("/run/{subcommand}", response_model=RunResponse)
def run(subcommand: str, req: RunRequest):
    if subcommand not in _RUNNERS:
        raise HTTPException(404, f"unknown subcommand '{subcommand}'; expected one of {sorted(_RUNNERS)}")
    cfg = _resolve_config(req)
    try:
        summary, artifacts, appends = _RUNNERS[subcommand](cfg, req)
    except (ValueError, FloatingPointError, KeyError) as exc:
        raise HTTPException(422, f"{type(exc).__name__}: {exc}")
    return RunResponse(summary=summary, artifacts=artifacts, appends=appends)
