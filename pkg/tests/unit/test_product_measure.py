"""
Unit tests for image and Cox measures on the product space.
"""

import csv

import numpy as np
import pytest

from src.cox import (
    COX,
    BadNormalization,
    ProductMeasure,
    atom_masses,
    check_cox_property,
    cox_conditional_expectation,
    cox_measure,
    image_measure,
    product_atoms,
)
from src.filtration import AdaptedProcess


@pytest.fixture
def t2_A(t2):
    return AdaptedProcess.deterministic(t2, [0.0, 0.25, 0.75], "A")


class TestCoxMeasure:
    """Test construction and normalization of the Cox measure."""

    def test_t2_weights(self, t2, t2_A):
        """Test leaf mass times dA with the remainder at infinity."""
        Q = cox_measure(t2, t2_A)

        np.testing.assert_allclose(Q.weights[0], [0.0, 0.0625, 0.125, 0.0625])
        np.testing.assert_allclose(Q.leaf_marginal(), t2.leaf_prob)
        assert Q.tag == COX

    def test_cox_property(self, tree_corpus):
        """Test Q[u <= s | F_t] = A_s for s <= t on random trees."""
        for tree, _, A in tree_corpus:
            assert check_cox_property(tree, cox_measure(tree, A), A) <= 1e-12

    def test_a_above_one_rejected(self, t2):
        """Test A_n > 1 raises BadNormalization."""
        with pytest.raises(BadNormalization):
            cox_measure(t2, AdaptedProcess.deterministic(t2, [0.0, 0.5, 1.2]))

    def test_declared_infinity_mass_checked(self, t2, t2_A):
        """Test an infinity mass that does not complete A to 1 is rejected."""
        cox_measure(t2, t2_A, infinity_mass=0.25)

        with pytest.raises(BadNormalization):
            cox_measure(t2, t2_A, infinity_mass=0.5)

    def test_marginal_mismatch_rejected(self, t2):
        """Test weights whose leaf marginal misses the leaf masses are rejected."""
        with pytest.raises(BadNormalization):
            ProductMeasure(t2, np.full((4, 4), 0.1), COX)

    def test_export_csv(self, t2, t2_A, temp_dir):
        """Test one row per (leaf, u)."""
        path = cox_measure(t2, t2_A).export_csv(temp_dir / "cox.csv")

        with open(path) as f:
            rows = list(csv.DictReader(f))

        assert len(rows) == 16
        assert rows[3] == {"leaf": "uu", "u": "inf", "weight": "0.0625"}


class TestImageMeasure:
    """Test the image measure of a random time."""

    def test_integrate_indicator(self, t2, t2_tau):
        """Test E[1{u <= 1}] = Q[tau <= 1]."""
        Q = image_measure(t2, t2_tau)
        h = np.zeros((4, 4))
        h[:, :2] = 1.0

        assert Q.integrate(h) == pytest.approx(0.25)

    def test_u_marginal(self, d3, d3_tau):
        """Test the u-marginal is the law of tau."""
        np.testing.assert_allclose(image_measure(d3, d3_tau).u_marginal(),
                                   [0.0, 0.3, 0.3, 0.4])


class TestProductAtoms:
    """Test the atoms of F_k joined with the stopped time."""

    def test_atom_layout(self, t2):
        """Test slots beyond level k share one lump per node."""
        labels = product_atoms(t2, 1)

        assert labels[0, 2] == labels[0, 3]
        assert labels[0, 1] != labels[0, 2]
        assert labels[0, 1] != labels[2, 1]

    def test_masses_sum_to_one(self, t2, t2_A):
        """Test atom masses partition the unit mass."""
        for k in range(t2.n_levels):
            assert atom_masses(cox_measure(t2, t2_A), k).sum() == pytest.approx(1.0)

    def test_conditional_expectation_nan_on_null_atoms(self, t2, t2_A):
        """Test conditioning is undefined on atoms without Cox mass."""
        Q = cox_measure(t2, t2_A)

        cond = cox_conditional_expectation(Q, np.ones((4, 4)), 1)

        assert np.isnan(cond[:, 0]).all()
        np.testing.assert_allclose(cond[:, 1:], 1.0)
