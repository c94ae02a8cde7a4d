"""
Unit tests for the density of the image measure against the Cox measure.
"""

import numpy as np
import pytest

from src.cox import (
    NotAbsolutelyContinuous,
    closed_form_density,
    cox_measure,
    decide_differentiable,
    density_martingale_residual,
    density_process,
    dual_projection_identity,
    girsanov_residual,
    image_measure,
    radon_nikodym,
)
from src.families import NotDifferentiable, azema, differentiate, im_from_time
from src.filtration import AdaptedProcess, doob_meyer


@pytest.fixture
def t2_setup(t2, t2_tau):
    decomp = doob_meyer(t2, azema(t2, t2_tau))
    return decomp, image_measure(t2, t2_tau), cox_measure(t2, decomp.A)


class TestRadonNikodym:
    """Test atom-mass ratios on T2."""

    def test_level_one_values(self, t2_setup):
        """Test 2 on (d, 1), 0 on (u, 1) and Z_1 / (1 - A_1) on the lumps."""
        _, Qimg, Qcox = t2_setup

        level = radon_nikodym(Qimg, Qcox, 1)

        assert level.values[2, 1] == pytest.approx(2.0)
        assert level.values[0, 1] == pytest.approx(0.0)
        assert level.values[0, 3] == pytest.approx(4.0 / 3.0)
        assert level.values[2, 3] == pytest.approx(2.0 / 3.0)

    def test_doubly_null_atoms_excluded(self, t2_setup):
        """Test u = 0 atoms carry no mass under either measure and are excluded."""
        _, Qimg, Qcox = t2_setup

        level = radon_nikodym(Qimg, Qcox, 1)

        assert not level.defined[:, 0].any()
        assert np.isnan(level.values[:, 0]).all()
        assert {atom["u"] for atom in level.excluded} == {"0"}

    def test_closed_form(self, t2, t2_tau, t2_setup):
        """Test the ratio equals the closed form on every defined cell."""
        decomp, Qimg, Qcox = t2_setup
        p = differentiate(im_from_time(t2, t2_tau), decomp.A)

        for k in range(t2.n_levels):
            level = radon_nikodym(Qimg, Qcox, k)
            closed = closed_form_density(t2, decomp.Z, decomp.A, p, k)
            np.testing.assert_allclose(level.values[level.defined],
                                       closed[level.defined], atol=1e-12)

    def test_not_absolutely_continuous(self, t2, t2_tau):
        """Test a default where A carries no mass yields a witness."""
        A = AdaptedProcess.deterministic(t2, [0.0, 0.0, 0.75])

        with pytest.raises(NotAbsolutelyContinuous) as excinfo:
            radon_nikodym(image_measure(t2, t2_tau), cox_measure(t2, A), 1)

        witness = excinfo.value.witness
        assert (witness["level"], witness["node"], witness["u"]) == (1, "d", "1")
        assert witness["leaves"] == ["du"]

    def test_d3_density_is_one(self, d3, d3_tau, d3_A):
        """Test the Cox time of D3 has density one wherever defined."""
        process = density_process(image_measure(d3, d3_tau), cox_measure(d3, d3_A))

        for level in process.levels:
            np.testing.assert_allclose(level.values[level.defined], 1.0)


class TestDensityProcess:
    """Test martingale and Girsanov properties of the density process."""

    def test_girsanov(self, t2_setup):
        """Test E^img[h] = E^cox[h P_k] on atom indicators."""
        _, Qimg, Qcox = t2_setup
        process = density_process(Qimg, Qcox)

        for level in process.levels:
            assert girsanov_residual(Qimg, Qcox, level) <= 1e-12

    def test_martingale(self, t2_setup):
        """Test the density is a Cox martingale on the product filtration."""
        _, Qimg, Qcox = t2_setup

        assert density_martingale_residual(Qcox, density_process(Qimg, Qcox)) <= 1e-12

    def test_random_trees(self, tree_corpus):
        """Test Girsanov and martingale residuals against the Azema compensator."""
        for tree, tau, _ in tree_corpus:
            A = doob_meyer(tree, azema(tree, tau)).A
            if A.values.max() > 1.0:
                continue
            Qimg, Qcox = image_measure(tree, tau), cox_measure(tree, A)
            try:
                process = density_process(Qimg, Qcox)
            except NotAbsolutelyContinuous:
                continue
            for level in process.levels:
                assert girsanov_residual(Qimg, Qcox, level) <= 1e-10
            assert density_martingale_residual(Qcox, process) <= 1e-10


class TestDecision:
    """Test the differentiability decision."""

    def test_agrees_with_family_density(self, t2, t2_tau, t2_setup):
        """Test the decision density equals the density of the family."""
        decomp, _, _ = t2_setup

        decision = decide_differentiable(t2, t2_tau, decomp.A)

        assert decision
        np.testing.assert_allclose(decision.density.values,
                                   differentiate(im_from_time(t2, t2_tau), decomp.A).values,
                                   atol=1e-12)

    def test_dual_projection_identity(self, t2, t2_tau, t2_setup):
        """Test sum p_v(v) dA_v is the optional dual projection of the default indicator."""
        decomp, _, _ = t2_setup

        decision = decide_differentiable(t2, t2_tau, decomp.A)

        assert dual_projection_identity(t2, t2_tau, decomp.A, decision.density) <= 1e-12

    def test_decisions_agree_on_random_trees(self, tree_corpus):
        """Test both routes reach the same verdict and density for random and Azema A."""
        agreed = 0
        for tree, tau, A in tree_corpus:
            compensator = doob_meyer(tree, azema(tree, tau)).A
            candidates = [A] if compensator.values.max() > 1.0 + 1e-12 else [A, compensator]
            for candidate in candidates:
                decision = decide_differentiable(tree, tau, candidate)
                try:
                    p = differentiate(im_from_time(tree, tau), candidate)
                except NotDifferentiable:
                    p = None
                assert bool(decision) == (p is not None)
                if p is not None:
                    np.testing.assert_allclose(decision.density.values, p.values, atol=1e-10)
                    agreed += 1
        assert agreed > 0

    def test_exhausted_compensator(self, s3, s3_tau):
        """Test both routes reject A reaching 1 on a surviving node at the same atom."""
        A = doob_meyer(s3, azema(s3, s3_tau)).A

        decision = decide_differentiable(s3, s3_tau, A)
        with pytest.raises(NotDifferentiable) as excinfo:
            differentiate(im_from_time(s3, s3_tau), A)

        assert not decision
        assert decision.witness["level"] == excinfo.value.level == 2
        assert decision.witness["node"] == excinfo.value.node
        assert decision.witness["u"] == excinfo.value.u == ">2"
        assert decision.witness["leaves"] == ["a"]

    def test_witness_on_failure(self, t2, t2_tau):
        """Test the failed decision carries the violating atom."""
        A = AdaptedProcess.deterministic(t2, [0.0, 0.0, 0.75])

        decision = decide_differentiable(t2, t2_tau, A)

        assert not decision
        assert decision.witness["node"] == "d"
