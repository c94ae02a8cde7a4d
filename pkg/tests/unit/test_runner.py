"""
End-to-end tests of the scenario runner on the shipped configurations.
"""

from pathlib import Path

import pytest

from src.runner import (
    REPORT_NAME,
    ConfigError,
    ScenarioConfig,
    SuiteError,
    load_config,
    load_report,
    run,
)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


def scenario(name, out_dir, **overrides):
    return load_config(CONFIG_DIR / name).with_overrides(out_dir=str(out_dir), **overrides)


class TestTreeScenarios:
    """Test the tree-engine scenarios."""

    def test_t2(self, temp_dir):
        """Test every T2 suite passes and writes its artifacts."""
        report = run(scenario("t2.json", temp_dir))

        assert report.passed, report.summary()
        assert set(report.artifacts) >= {"family.csv", "density.csv", "cox_measure.csv",
                                         "drift.csv"}
        assert (temp_dir / REPORT_NAME).exists()

    def test_t2_details(self, temp_dir):
        """Test the recorded decision, excluded atoms and immersion flag."""
        report = run(scenario("t2.json", temp_dir), write=False)

        assert report.suites["im"].details["differentiable"]
        assert report.suites["cox"].details["differentiable"]
        assert report.suites["enlargement"].details["immersed"] is False
        assert report.suites["enlargement"].details["min_density_after_default"] == pytest.approx(2.0)

    def test_d3_cox(self, temp_dir):
        """Test the Cox scenario is immersed and passes every suite."""
        report = run(scenario("d3_cox.json", temp_dir))

        assert report.passed, report.summary()
        assert report.suites["enlargement"].details["immersed"] is True
        assert "immersion_M" in {c.name for c in report.suites["enlargement"].checks}

    def test_copula(self, temp_dir):
        """Test the copula scenario writes the order-statistic law."""
        report = run(scenario("copula_d3.json", temp_dir))

        assert report.passed, report.summary()
        assert "order_cdf.csv" in report.artifacts

    def test_d3_natural(self, temp_dir):
        """Test the natural tree scenario on D3 collapses to the Cox family."""
        report = run(scenario("d3_natural.json", temp_dir))

        assert report.passed, report.summary()

    def test_suite_subset(self, temp_dir):
        """Test running a subset of the configured suites."""
        report = run(scenario("t2.json", temp_dir), suites=["im"], write=False)

        assert list(report.suites) == ["im"]
        assert not (temp_dir / REPORT_NAME).exists()


class TestDeterminism:
    """Test repeated runs."""

    def test_byte_identical_reports(self, temp_dir):
        """Test two runs of T2 write identical reports and artifacts."""
        run(scenario("t2.json", temp_dir / "first"))
        run(scenario("t2.json", temp_dir / "second"))

        first = (temp_dir / "first" / REPORT_NAME).read_bytes()
        second = (temp_dir / "second" / REPORT_NAME).read_bytes()

        assert first == second
        assert load_report(temp_dir / "first")["passed"]


class TestFailures:
    """Test domain errors surfacing through the runner."""

    def test_decreasing_compensator(self, temp_dir):
        """Test a Cox scenario with a decreasing A fails with SuiteError."""
        config = ScenarioConfig.from_dict({
            "name": "bad-cox",
            "model": "cox",
            "tree": {"times": [0, 1, 2], "branching": [[1.0], [1.0]],
                     "hidden": [0.5, 0.5], "tau": {"ss#0": 1, "ss#1": "inf"},
                     "A": [0.0, 0.5, 0.4]},
            "suites": ["im"],
            "out_dir": str(temp_dir),
        })

        with pytest.raises(SuiteError, match="im suite failed"):
            run(config)

    def test_missing_seed(self):
        """Test Monte Carlo scenarios without a seed never reach the runner."""
        data = {"engine": "mc", "model": "natural", "suites": ["natural"]}

        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)


@pytest.mark.slow
class TestMonteCarloScenario:
    """Test the simulated natural scenario at reduced size."""

    def test_natural_mc(self, temp_dir):
        """Test the natural and enlargement suites on 2000 paths."""
        report = run(scenario("natural_mc.json", temp_dir, paths=2000))

        assert set(report.suites) == {"natural", "enlargement"}
        assert {"mtilde", "finite_difference", "reconstruction"} <= {
            c.name for c in report.suites["natural"].checks}
        assert "density.csv" in report.artifacts
