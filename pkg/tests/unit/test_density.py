"""
Unit tests for densities of differentiable families.
"""

import csv

import numpy as np
import pytest

from src.families import (
    NotDifferentiable,
    azema,
    cox_family,
    density_martingale_residual,
    differentiate,
    im_from_time,
    nullset_residual,
    reconstruct,
    reconstruction_residual,
)
from src.filtration import AdaptedProcess, doob_meyer


@pytest.fixture
def t2_density(t2, t2_tau):
    decomp = doob_meyer(t2, azema(t2, t2_tau))
    return differentiate(im_from_time(t2, t2_tau), decomp.A)


class TestDifferentiate:
    """Test the density of the T2 family with respect to its compensator."""

    def test_t2_values(self, t2_density):
        """Test p_1(1) = 2 on d, p_2(1) = 4 on du and p_2(2) = 2 on ud, dd."""
        np.testing.assert_allclose(t2_density.at(1, 1), [0.0, 2.0])
        np.testing.assert_allclose(t2_density.at(2, 1), [0.0, 0.0, 4.0, 0.0])
        np.testing.assert_allclose(t2_density.at(2, 2), [0.0, 2.0, 0.0, 2.0])

    def test_atoms(self, t2_density):
        """Test atoms sit where dA is positive."""
        np.testing.assert_array_equal(t2_density.atoms[:, 0], [False, True, True, False])

    def test_density_on_time(self, t2_density, t2_tau):
        """Test p_2(tau) leaf-wise, zero where default has not happened."""
        np.testing.assert_allclose(t2_density.on_time(2, t2_tau.index), [0.0, 2.0, 4.0, 2.0])

    def test_cox_density_is_one(self, d3, d3_A):
        """Test a Cox family has density one at every atom."""
        p = differentiate(cox_family(d3, d3_A), d3_A)

        for k in range(d3.n_levels):
            for v in range(1, k + 1):
                np.testing.assert_allclose(p.at(k, v), 1.0)

    def test_missing_mass_reported(self, t2, t2_tau):
        """Test a jump off the atoms of A names level, node and u."""
        A = AdaptedProcess.deterministic(t2, [0.0, 0.0, 0.75])

        with pytest.raises(NotDifferentiable) as excinfo:
            differentiate(im_from_time(t2, t2_tau), A)

        assert excinfo.value.level == 1
        assert excinfo.value.node == "d"
        assert excinfo.value.u == "1"

    def test_exhausted_compensator(self, s3, s3_tau):
        """Test A reaching 1 on a node that still survives is reported past t_2."""
        A = doob_meyer(s3, azema(s3, s3_tau)).A
        np.testing.assert_allclose(A.values[2], [1.0, 1.0, 0.5])

        with pytest.raises(NotDifferentiable) as excinfo:
            differentiate(im_from_time(s3, s3_tau), A)

        assert excinfo.value.level == 2
        assert excinfo.value.node == s3.node_label(2, s3.leaf_index("a"))
        assert excinfo.value.u == ">2"

    def test_exhausted_compensator_before_horizon(self, s3, s3_tau):
        """Test the family is differentiable while A stays below 1."""
        A = doob_meyer(s3, azema(s3, s3_tau)).A

        p = differentiate(im_from_time(s3, s3_tau), A, up_to=2)

        np.testing.assert_allclose(p.at(1, 1), [0.0, 2.0])

    def test_horizon_limits_levels(self, t2, t2_tau):
        """Test up_to stops before the missing mass at level 2."""
        A = AdaptedProcess.deterministic(t2, [0.0, 0.25, 0.25])

        p = differentiate(im_from_time(t2, t2_tau), A, up_to=2)

        assert p.up_to == 2
        np.testing.assert_allclose(p.at(1, 1), [0.0, 2.0])


class TestDensityProperties:
    """Test reconstruction and martingale properties of densities."""

    def test_reconstruction(self, t2, t2_tau, t2_density):
        """Test M^u_k = sum_{v <= u} p_k(v) dA_v for u <= k."""
        assert reconstruction_residual(im_from_time(t2, t2_tau), t2_density) <= 1e-12
        assert np.isnan(reconstruct(t2_density)[2, 1]).all()

    def test_density_is_martingale(self, t2_density):
        """Test k -> p_k(v) is a martingale on atoms."""
        assert density_martingale_residual(t2_density) <= 1e-12

    def test_random_cox_families(self, tree_corpus):
        """Test Cox families of random A reconstruct from their densities."""
        for tree, _, A in tree_corpus:
            im = cox_family(tree, A)
            p = differentiate(im, A)
            assert reconstruction_residual(im, p) <= 1e-10
            assert density_martingale_residual(p) <= 1e-10

    def test_nullset_stays_null(self, t2_density):
        """Test sets where p_b vanishes carry no later density mass."""
        assert nullset_residual(t2_density, 1) <= 1e-12

    def test_export_rows_at_atoms(self, t2_density, temp_dir):
        """Test export writes only atom rows."""
        path = t2_density.export_csv(temp_dir / "density.csv")

        with open(path) as f:
            rows = list(csv.DictReader(f))

        assert len(rows) == 2 + 4 + 4
        assert rows[0] == {"level": "1", "node": "u", "u": "1", "value": "0.0"}
