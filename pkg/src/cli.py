"""Command-line front end: run a verification suite and write a JSON or CSV report.

    python -m src.cli mass --A 1 --schedule 10,20,40
    python -m src.cli quotient --Atilde 1 --rho0 1 --grid 300,1000,3000 --format csv --out scan.csv

Exit status is 0 when every check passes, 1 when a check fails and 2 on bad arguments.
"""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import click
import pandas as pd
from pydantic import ValidationError

from .checks import run_report
from .config import configure_logging
from .schemas import Report, RunConfig

logger = logging.getLogger(__name__)

COMMANDS = ["mass", "flux", "identities", "kohn", "bubble", "quotient", "variation", "examples", "suite"]

# config-file keys that map onto RunConfig fields with another name
KEY_ALIASES = {"jet-order": "jet_order", "lam": "lambda"}


def read_config_file(path: str) -> dict[str, str]:
    """key = value lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for number, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {number}: expected key = value", param_hint="--config")
        key, value = (part.strip() for part in line.split("=", 1))
        out[KEY_ALIASES.get(key, key)] = value
    return out


def _float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in str(value).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of numbers, got {value!r}") from None


def build_config(command: str, file_values: dict[str, str], flags: dict[str, Any]) -> RunConfig:
    """Config file first, flags override it; pydantic rejects unknown keys and bad ranges."""
    merged: dict[str, Any] = dict(file_values)
    merged.update({k: v for k, v in flags.items() if v is not None})
    for key in ("schedule", "grid"):
        if key in merged and isinstance(merged[key], str):
            merged[key] = _float_list(merged[key])
    merged["command"] = command
    return RunConfig.model_validate(merged)


def render_json(report: Report) -> str:
    """Canonical key order; floats as their shortest round-tripping repr."""
    payload = report.model_dump(by_alias=True)
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def render_csv(report: Report) -> str:
    if report.rows:
        frame = pd.DataFrame(report.rows)
    else:
        frame = pd.DataFrame([c.model_dump(by_alias=True) for c in report.checks])
    return frame.to_csv(index=False, float_format="%.17g")


@click.command()
@click.argument("command", type=click.Choice(COMMANDS))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key = value file; flags override it")
@click.option("--A", "A", type=float, default=None, help="mass parameter of the asymptotically flat model")
@click.option("--lambda", "lam", type=float, default=None, help="bubble concentration")
@click.option("--rho0", type=float, default=None, help="gluing radius")
@click.option("--Atilde", "Atilde", type=float, default=None, help="constant term of the Green's function")
@click.option("--schedule", type=str, default=None, help="comma-separated mass radii, e.g. 10,20,40")
@click.option("--grid", type=str, default=None, help="comma-separated lambda values of the deficit scan")
@click.option("--jet-order", "jet_order", type=int, default=None, help="Taylor order of the jets")
@click.option("--tol", type=float, default=None, help="tolerance overriding every comparison of the run")
@click.option("--seed", type=int, default=None, help="seed of all random sampling")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="report path (default: stdout)")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default=None)
@click.option("--timing", is_flag=True, help="include wall-clock timings (the report is then not reproducible)")
@click.option("--log-level", default=None, help="logging level, default from PH_LOG_LEVEL")
def main(
    command: str,
    config_path: Optional[str],
    A: Optional[float],
    lam: Optional[float],
    rho0: Optional[float],
    Atilde: Optional[float],
    schedule: Optional[str],
    grid: Optional[str],
    jet_order: Optional[int],
    tol: Optional[float],
    seed: Optional[int],
    out: Optional[str],
    fmt: Optional[str],
    timing: bool,
    log_level: Optional[str],
):
    """Run one verification suite (or all of them with 'suite')."""
    configure_logging(log_level)
    file_values = read_config_file(config_path) if config_path else {}
    flags = {
        "A": A,
        "lambda": lam,
        "rho0": rho0,
        "Atilde": Atilde,
        "schedule": schedule,
        "grid": grid,
        "jet_order": jet_order,
        "tol": tol,
        "seed": seed,
        "out": out,
        "format": fmt,
    }
    try:
        cfg = build_config(command, file_values, flags)
    except ValidationError as e:
        raise click.UsageError(str(e)) from None

    report = run_report(cfg, timing)
    text = render_csv(report) if cfg.format == "csv" else render_json(report)
    if cfg.out:
        Path(cfg.out).write_text(text)
        logger.info("report written to %s", cfg.out)
    else:
        click.echo(text, nl=False)

    failed = [c.name for c in report.checks if not c.passed]
    for name in failed:
        click.echo(f"FAILED: {name}", err=True)
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
