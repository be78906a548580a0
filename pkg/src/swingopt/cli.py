"""Command-line front end: a thin HTTP client of the valuation service.

By default the service runs in-process over an ASGI transport; pass
``--server URL`` to talk to a remote instance instead.  Artifacts returned
by the service are written under the output directory, which resolves as
``--out`` flag, then the ``SWINGOPT_OUT`` environment variable, then the
config's ``out_dir``, then ``./swingopt_out``.
"""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

SUBCOMMANDS = ("solve", "trigger", "cfl", "boundary-check", "mc-check")
OUT_ENV = "SWINGOPT_OUT"


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    # in-process: drive the ASGI app through a synchronous httpx client
    from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _out_dir(flag: str | None, config_out: str | None) -> Path:
    path = flag or os.environ.get(OUT_ENV) or config_out or "swingopt_out"
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_artifacts(out: Path, artifacts: dict, appends: dict) -> list[str]:
    written = []
    for name, text in artifacts.items():
        (out / name).write_text(text)
        written.append(str(out / name))
    for name, (header, row) in appends.items():
        target = out / name
        if not target.exists():
            target.write_text(header + "\n")
        with target.open("a") as fh:
            fh.write(row + "\n")
        written.append(str(target))
    return written


@click.command()
@click.argument("subcommand", type=click.Choice(SUBCOMMANDS))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="INI config file")
@click.option("--preset", type=str, default=None, help="built-in config name (ex1, ex2, ex3)")
@click.option("--out", "out_flag", type=click.Path(file_okay=False), default=None, help="output directory")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--paper-scale", is_flag=True, help="use the fine reference grid instead of the desk grid")
@click.option("--time", "t_slice", type=float, default=None, help="slice time for trigger/boundary-check")
@click.option("--z", "z_level", type=float, default=None, help="volume level for trigger/boundary-check")
@click.option("--server", type=str, default=None, help="remote service URL (default: run in-process)")
def main(subcommand, config_path, preset, out_flag, seed, paper_scale, t_slice, z_level, server):
    """Price swing contracts and run the solver's consistency checks."""
    if (config_path is None) == (preset is None):
        click.echo("error: provide exactly one of --config or --preset", err=True)
        sys.exit(2)
    body = {
        "config_text": Path(config_path).read_text() if config_path else None,
        "preset": preset,
        "paper_scale": paper_scale,
        "seed": seed,
        "time": t_slice,
        "z": z_level,
    }
    with _client(server) as client:
        resp = client.post(f"/run/{subcommand}", json=body)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(1)
    payload = resp.json()
    summary = payload["summary"]

    config_out = None
    echo = payload["artifacts"].get("config_echo.ini", "")
    for line in echo.splitlines():
        if line.strip().startswith("out_dir"):
            config_out = line.split("=", 1)[1].strip()
    out = _out_dir(out_flag, config_out)
    written = _write_artifacts(out, payload["artifacts"], payload["appends"])

    if subcommand == "cfl":
        click.echo(f"CFL number: {summary['cfl']:.7f}")
        click.echo("stable" if summary["stable"] else "unstable")
        click.echo(f"max stable dt: {summary['max_stable_dt']:.8g}")
    else:
        click.echo(json.dumps(summary, indent=2))
    for path in written:
        click.echo(f"wrote {path}")
    sys.exit(0)


if __name__ == "__main__":
    main()
