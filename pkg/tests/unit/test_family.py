"""
Unit tests for increasing families of martingales.
"""

import csv

import numpy as np
import pytest

from src.families import (
    AxiomViolation,
    IMFamily,
    TwoParamField,
    azema,
    azema_from_family,
    check_axioms,
    check_imz,
    complete_extension,
    cox_family,
    im_from_time,
    sample_from_im,
    verify_mint,
)
from src.filtration import AdaptedProcess, LevelMismatch


class TestFamilyFromTime:
    """Test M^u_t = Q[tau <= u | F_t]."""

    def test_t2_values(self, t2, t2_tau):
        """Test the conditional default probabilities on T2."""
        im = im_from_time(t2, t2_tau)

        np.testing.assert_allclose(im.at(1, 1), [0.0, 0.5])
        np.testing.assert_allclose(im.at(1, 2), [0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(im.at(2, 2), [0.0, 1.0, 1.0, 1.0])
        np.testing.assert_allclose(im.values[-1], 1.0)

    def test_axioms_on_random_trees(self, tree_corpus):
        """Test families of random times pass the complete axioms and iM_Z."""
        for tree, tau, _ in tree_corpus:
            im = im_from_time(tree, tau)
            assert check_axioms(im, complete=True).passed
            assert check_imz(im, azema(tree, tau)).passed

    def test_diagonal_gives_azema(self, tree_corpus):
        """Test 1 - M^t_t is the Azema supermartingale."""
        for tree, tau, _ in tree_corpus:
            np.testing.assert_allclose(azema_from_family(im_from_time(tree, tau)).values,
                                       azema(tree, tau).values, atol=1e-12)

    def test_shape_checked(self, t2):
        """Test a cube of the wrong shape raises LevelMismatch."""
        with pytest.raises(LevelMismatch):
            IMFamily(t2, np.zeros((3, 3, 4)))

    def test_export_csv(self, t2, t2_tau, temp_dir):
        """Test one row per (u, t, node)."""
        path = im_from_time(t2, t2_tau).export_csv(temp_dir / "family.csv")

        with open(path) as f:
            rows = list(csv.DictReader(f))

        assert len(rows) == 4 * (1 + 2 + 4)
        assert rows[-1]["u"] == "inf"


class TestCoxFamily:
    """Test the family M^u_t = E[A_u | F_t]."""

    def test_axioms_and_imz(self, tree_corpus):
        """Test Cox families pass the axioms and iM_Z with Z = 1 - A."""
        for tree, _, A in tree_corpus:
            im = cox_family(tree, A)
            assert check_axioms(im, complete=True).passed
            assert check_imz(im, 1.0 - A).passed

    def test_d3_matches_time_family(self, d3, d3_tau, d3_A):
        """Test the D3 Cox family equals the family of its default time."""
        np.testing.assert_allclose(cox_family(d3, d3_A).values,
                                   im_from_time(d3, d3_tau).values, atol=1e-12)

    def test_a_above_one_rejected(self, t2):
        """Test A > 1 raises AxiomViolation."""
        with pytest.raises(AxiomViolation):
            cox_family(t2, AdaptedProcess.deterministic(t2, [0.0, 0.5, 1.5]))

    def test_decreasing_a_rejected(self, t2):
        """Test a decreasing A raises AxiomViolation."""
        with pytest.raises(AxiomViolation):
            cox_family(t2, AdaptedProcess.deterministic(t2, [0.0, 0.5, 0.2]))


class TestAxioms:
    """Test axiom violations and the complete extension."""

    def test_decreasing_in_u_detected(self, t2, t2_tau):
        """Test a family that drops in u fails with the size of the drop."""
        values = np.array(im_from_time(t2, t2_tau).values)
        values[0] = 0.5

        report = check_axioms(IMFamily(t2, values))

        assert not report.passed
        assert report.monotone == pytest.approx(0.5)

    def test_imz_diagonal_violation(self, t2, t2_tau):
        """Test a Z that disagrees with the diagonal is reported node-wise."""
        im = im_from_time(t2, t2_tau)
        Z = AdaptedProcess.deterministic(t2, [1.0, 1.0, 1.0])

        report = check_imz(im, Z)

        assert not report.passed
        assert {v["kind"] for v in report.violations} == {"diagonal", "band"}

    def test_complete_extension(self, tree_corpus):
        """Test the extension restores the values before the diagonal."""
        for tree, _, A in tree_corpus:
            im = cox_family(tree, A)
            values = np.array(im.values)
            for u in range(1, tree.grid.u_size):
                values[u, :min(u, tree.last_level)] = 0.0
            np.testing.assert_allclose(complete_extension(IMFamily(tree, values)).values,
                                       im.values, atol=1e-12)


class TestVerifyMint:
    """Test E[f(tau)] = E[sum_u f(u) d_u M^u_t]."""

    def test_indicator_on_t2(self, t2, t2_tau):
        """Test f = 1{u <= 1} at level 1 gives matching sides."""
        im = im_from_time(t2, t2_tau)

        residual = verify_mint(t2, t2_tau, im, lambda leaf, u: float(u <= 1), 1)

        assert residual <= 1e-12

    def test_node_and_time_indicator_on_t2(self, t2, t2_tau):
        """Test f = 1{node d} 1{u = 2} at level 1 has both sides equal to 1/4."""
        im = im_from_time(t2, t2_tau)
        f = np.zeros((4, t2.grid.u_size))
        f[[2, 3], 2] = 1.0

        assert t2.expectation(f[np.arange(4), t2_tau.index]) == pytest.approx(0.25)
        assert t2.expectation(np.sum(f.T * im.u_increments(1), axis=0)) == pytest.approx(0.25)
        assert verify_mint(t2, t2_tau, im, f, 1) <= 1e-12

    def test_measurable_payoffs_on_random_trees(self, tree_corpus):
        """Test node-measurable payoffs at every level."""
        rng = np.random.default_rng(11)
        for tree, tau, _ in tree_corpus:
            im = im_from_time(tree, tau)
            for t in range(tree.n_levels):
                node_payoff = rng.normal(size=(tree.n_nodes(t), tree.grid.u_size))
                f = node_payoff[tree.node_of_leaf[t]]
                assert verify_mint(tree, tau, im, f, t) <= 1e-10

    def test_non_measurable_payoff_rejected(self, t2, t2_tau):
        """Test a payoff that splits a level-1 node raises LevelMismatch."""
        im = im_from_time(t2, t2_tau)
        f = np.zeros((4, 4))
        f[0] = 1.0

        with pytest.raises(LevelMismatch):
            verify_mint(t2, t2_tau, im, f, 1)


class TestSampling:
    """Test sampling from the product measure."""

    def test_sample_matches_default_time(self, t2, t2_tau):
        """Test draws from a family of a time reproduce the time exactly."""
        sample = sample_from_im(im_from_time(t2, t2_tau), seed=5, n=2000)

        np.testing.assert_array_equal(sample.u, t2_tau.index[sample.leaf])

    def test_seeded_determinism(self, d3, d3_A):
        """Test equal seeds give equal draws."""
        im = cox_family(d3, d3_A)

        first = sample_from_im(im, seed=9, n=500)
        second = sample_from_im(im, seed=9, n=500)

        np.testing.assert_array_equal(first.u, second.u)
        np.testing.assert_array_equal(first.leaf, second.leaf)

    def test_empirical_cdf(self, t2, t2_tau):
        """Test per-node frequencies against the family at level 1."""
        sample = sample_from_im(im_from_time(t2, t2_tau), seed=1, n=10_000)

        est, se = sample.empirical_cdf(1, 1)

        assert est[0] == 0.0
        assert abs(est[1] - 0.5) <= 4 * se[1] + 1e-3

    def test_invalid_family_rejected(self, t2, t2_tau):
        """Test sampling a family that fails the axioms raises AxiomViolation."""
        values = np.array(im_from_time(t2, t2_tau).values)
        values[-1] = 0.5

        with pytest.raises(AxiomViolation):
            sample_from_im(IMFamily(t2, values), seed=0)


class TestTwoParamField:
    """Test lookups on Monte Carlo fields."""

    def test_lookup(self):
        """Test values are found by start and step."""
        field = TwoParamField(values=np.arange(12.0).reshape(2, 3, 2),
                              starts=np.array([0, 5]), steps=np.array([0, 5, 10]),
                              weights=np.full(2, 0.5))

        np.testing.assert_allclose(field.at(5, 10), [10.0, 11.0])
        with pytest.raises(LevelMismatch):
            field.at(3, 10)
