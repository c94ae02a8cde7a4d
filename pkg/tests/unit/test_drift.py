"""
Unit tests for the drift of base martingales in the enlarged filtration.
"""

import numpy as np
import pytest

from src.enlargement import (
    full_drift,
    g_martingale_test,
    jeulin_yor_drift,
    mc_full_drift,
)
from src.families import NotDifferentiable, azema, differentiate, im_from_time
from src.filtration import AdaptedProcess, RandomTime, doob_meyer
from src.natural import MCModelConfig, markov_pair, simulate_model


@pytest.fixture
def t2_setup(t2, t2_tau):
    decomposition = doob_meyer(t2, azema(t2, t2_tau))
    p = differentiate(im_from_time(t2, t2_tau), decomposition.A)
    return decomposition, p


@pytest.fixture
def t2_driver(t2):
    return AdaptedProcess(t2, np.array([[0.0] * 4, [1.0, 1.0, -1.0, -1.0],
                                        [2.0, 0.0, 0.0, -2.0]]), "Y")


class TestJeulinYor:
    """Test the pre-default compensator."""

    def test_driver_values(self, t2, t2_tau, t2_driver):
        """Test the stopped driver is compensated by -1 on dd at level 2."""
        drift = jeulin_yor_drift(t2, t2_tau, t2_driver)

        np.testing.assert_allclose(drift.increments[2], [0.0, 0.0, 0.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(drift.increments[1], 0.0, atol=1e-12)
        np.testing.assert_allclose(drift.B.values[2], [-0.75] * 4)
        assert drift.test.passed

    def test_stopped_raw_driver_fails(self, t2, t2_tau, t2_driver):
        """Test the uncompensated stopped driver is not a G-martingale."""
        drift = jeulin_yor_drift(t2, t2_tau, t2_driver)
        stopped = drift.compensated + np.cumsum(drift.increments, axis=0)

        assert not g_martingale_test(t2, t2_tau, stopped).passed


class TestFullDrift:
    """Test compensation on both sides of default."""

    def test_driver(self, t2, t2_tau, t2_setup, t2_driver):
        """Test the post-default drift of +1 on du and the compensated values."""
        decomposition, p = t2_setup

        report = full_drift(t2, t2_tau, p, t2_driver, decomposition=decomposition)

        np.testing.assert_allclose(report.post_increments[2], [0.0, 0.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(report.compensated[2], [2.0, 0.0, -1.0, -1.0], atol=1e-12)
        assert report.passed
        assert not report.zero_drift

    def test_deterministic_compensator_gives_zero_drift(self, t2, t2_tau, t2_setup):
        """Test the martingale part of Z is a G-martingale when A is deterministic."""
        decomposition, p = t2_setup

        report = full_drift(t2, t2_tau, p, decomposition.M, decomposition=decomposition)

        assert report.zero_drift
        assert report.passed

    def test_cox_time(self, d3, d3_tau, d3_A):
        """Test a Cox time on D3 leaves the martingale part of Z undrifted."""
        decomposition = doob_meyer(d3, azema(d3, d3_tau))
        p = differentiate(im_from_time(d3, d3_tau), d3_A)

        report = full_drift(d3, d3_tau, p, decomposition.M, decomposition=decomposition)

        assert report.zero_drift
        assert report.to_dict()["test"]["passed"]

    def test_random_trees(self, tree_corpus):
        """Test the compensated martingale part of Z on random trees."""
        tested = 0
        for tree, tau, _ in tree_corpus:
            tau = RandomTime(tree, np.maximum(tau.index, 1))
            decomposition = doob_meyer(tree, azema(tree, tau))
            try:
                p = differentiate(im_from_time(tree, tau), decomposition.A)
            except NotDifferentiable:
                continue
            report = full_drift(tree, tau, p, decomposition.M, decomposition=decomposition)
            assert report.test.max_residual <= 1e-10
            tested += 1
        assert tested > 0

    def test_horizon(self, t2, t2_tau, t2_setup, t2_driver):
        """Test a shorter horizon truncates the report."""
        _, p = t2_setup

        report = full_drift(t2, t2_tau, p, t2_driver, horizon=2)

        assert report.up_to == 2
        assert report.compensated.shape == (2, 4)


class TestMonteCarloDrift:
    """Test the simulated drift report."""

    @pytest.fixture
    def small_mc(self):
        return simulate_model(MCModelConfig(step=1e-2, steps=50, paths=200, seed=1,
                                            block_size=100))

    def test_report_layout(self, small_mc):
        """Test one t-statistic per bucket and the path count."""
        report = mc_full_drift(markov_pair(0.1), small_mc, stride=10, seed=5)

        assert len(report.pre_tstats) == 4
        assert len(report.post_tstats) == 4
        assert report.n_paths == 200
        assert 0.0 <= report.defaulted <= 1.0
        assert report.to_dict()["paths"] == 200

    def test_seeded(self, small_mc):
        """Test equal seeds give equal statistics."""
        first = mc_full_drift(markov_pair(0.1), small_mc, stride=10, seed=5, process="Y")
        second = mc_full_drift(markov_pair(0.1), small_mc, stride=10, seed=5, process="Y")

        assert first.pre_tstats == second.pre_tstats

    def test_unknown_process(self, small_mc):
        """Test processes other than M and Y raise ValueError."""
        with pytest.raises(ValueError):
            mc_full_drift(markov_pair(0.1), small_mc, stride=10, seed=5, process="X")
