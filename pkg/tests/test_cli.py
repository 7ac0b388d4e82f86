import io
import json

import pandas as pd
import pytest
from click.testing import CliRunner

from src.cli import build_config, main, read_config_file


@pytest.fixture
def runner():
    return CliRunner()


def test_flux_report(runner):
    result = runner.invoke(main, ["flux"])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["schema"] == 1
    assert report["command"] == "flux"
    assert report["timing"] == {}
    assert all(check["pass"] for check in report["checks"])
    assert report["parameters"]["lambda"] == 1000.0


def test_reports_are_reproducible(runner):
    first = runner.invoke(main, ["flux", "--seed", "7"])
    second = runner.invoke(main, ["flux", "--seed", "7"])
    assert first.exit_code == second.exit_code == 0
    assert first.stdout == second.stdout


def test_timing_is_opt_in(runner):
    result = runner.invoke(main, ["flux", "--timing"])
    assert "flux" in json.loads(result.stdout)["timing"]


def test_csv_output(runner, tmp_path):
    out = tmp_path / "flux.csv"
    result = runner.invoke(main, ["flux", "--format", "csv", "--out", str(out)])
    assert result.exit_code == 0
    frame = pd.read_csv(io.StringIO(out.read_text()))
    assert list(frame["name"]) == ["flux of rho^-2", "flux radius independence"]
    assert frame["pass"].all()


@pytest.mark.parametrize(
    "args",
    [
        ["flux", "--jet-order", "20"],
        ["quotient", "--grid", "5", "--rho0", "1"],
        ["mass", "--schedule", "20,10"],
        ["torus"],
    ],
)
def test_bad_arguments_exit_with_usage_error(runner, args):
    assert runner.invoke(main, args).exit_code == 2


def test_config_file(runner, tmp_path):
    good = tmp_path / "run.cfg"
    good.write_text("# mass run\nA = 0   # no mass\nschedule = 10, 20, 40\njet-order = 4\n")
    assert read_config_file(str(good)) == {"A": "0", "schedule": "10, 20, 40", "jet_order": "4"}
    result = runner.invoke(main, ["mass", "--config", str(good)])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["parameters"]["A"] == 0.0

    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert runner.invoke(main, ["flux", "--config", str(bad)]).exit_code == 2


def test_flags_override_the_config_file():
    cfg = build_config("quotient", {"rho0": "0.5", "lambda": "100"}, {"rho0": 1.0, "grid": "300,1000"})
    assert cfg.rho0 == 1.0
    assert cfg.lam == 100.0
    assert cfg.grid == [300.0, 1000.0]
