"""
Unit tests for the toolkit command line.
"""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from scripts.toolkit import cli


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


@pytest.fixture
def runner(temp_dir, monkeypatch):
    monkeypatch.setenv("DEFAULT_TIME_LOG_DIR", str(temp_dir / "logs"))
    return CliRunner()


class TestVerify:
    """Test the verify and report commands."""

    def test_t2_passes(self, runner, temp_dir):
        """Test verify exits 0 and the report command emits the density."""
        out = temp_dir / "t2"

        result = runner.invoke(cli, ["verify", "--config", str(CONFIG_DIR / "t2.json"),
                                     "--out-dir", str(out)])

        assert result.exit_code == 0, result.output
        assert "all checks passed" in result.output

        result = runner.invoke(cli, ["report", str(out), "--emit", "density"])

        assert result.exit_code == 0, result.output
        assert str(out / "density.csv") in result.output

    def test_build_runs_family_suite_only(self, runner, temp_dir):
        """Test build writes a report with the im suite alone."""
        out = temp_dir / "build"

        result = runner.invoke(cli, ["build", "--config", str(CONFIG_DIR / "d3_cox.json"),
                                     "--out-dir", str(out)])

        assert result.exit_code == 0, result.output
        assert list(json.loads((out / "report.json").read_text())["suites"]) == ["im"]

    def test_invalid_scenario(self, runner, temp_dir):
        """Test an invalid scenario exits 1."""
        path = temp_dir / "bad.json"
        path.write_text(json.dumps({"engine": "mc", "model": "natural",
                                    "suites": ["natural"]}))

        result = runner.invoke(cli, ["verify", "--config", str(path)])

        assert result.exit_code == 1

    def test_missing_artifact(self, runner, temp_dir):
        """Test emitting an artifact the run did not produce exits 1."""
        out = temp_dir / "copula"
        runner.invoke(cli, ["order-stats", "--config", str(CONFIG_DIR / "copula_d3.json"),
                            "--out-dir", str(out)])

        result = runner.invoke(cli, ["report", str(out), "--emit", "drift"])

        assert result.exit_code == 1
