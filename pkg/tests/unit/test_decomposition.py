"""
Unit tests for the Doob-Meyer decomposition, dual projections and the
first-zero check.
"""

import numpy as np
import pytest

from src.families import azema
from src.filtration import (
    AdaptedProcess,
    NotIncreasing,
    NotSupermartingale,
    check_first_zero,
    doob_meyer,
    dual_projection,
    dual_projection_residual,
    martingale_residual,
    predictable_bracket,
)


class TestDoobMeyer:
    """Test the decomposition of Azema supermartingales."""

    def test_t2_fixture_values(self, t2, t2_tau):
        """Test dA_1 = 1/4, dA_2 = 1/2 and M_1 = (1.25, .75) on T2."""
        decomp = doob_meyer(t2, azema(t2, t2_tau))

        np.testing.assert_allclose(decomp.dA[1], 0.25)
        np.testing.assert_allclose(decomp.dA[2], 0.5)
        np.testing.assert_allclose(decomp.M.at(1), [1.25, 0.75])
        assert martingale_residual(t2, decomp.M) <= 1e-12

    def test_reconstructs_z(self, tree_corpus):
        """Test Z = M - A with A predictable on random trees."""
        for tree, tau, _ in tree_corpus:
            decomp = doob_meyer(tree, azema(tree, tau))
            np.testing.assert_allclose(decomp.M.values - decomp.A.values, decomp.Z.values,
                                       atol=1e-12)
            for k in range(1, tree.n_levels):
                assert tree.is_measurable(decomp.A.values[k], k - 1)
            assert np.all(decomp.dA >= 0)

    def test_submartingale_rejected(self, t2):
        """Test an increasing deterministic process raises NotSupermartingale."""
        Z = AdaptedProcess.deterministic(t2, [0.1, 0.2, 0.3])

        with pytest.raises(NotSupermartingale):
            doob_meyer(t2, Z)

    def test_predictable_one_minus_z(self, t2, t2_tau):
        """Test ^p(1-Z)_1 = 1 - Z_0 + dA_1."""
        decomp = doob_meyer(t2, azema(t2, t2_tau))

        np.testing.assert_allclose(decomp.predictable_one_minus_z()[1], 0.25)


class TestDualProjection:
    """Test optional and predictable dual projections."""

    def test_optional_projection_of_default_indicator(self, tree_corpus):
        """Test the defining property over every indicator test process."""
        for tree, tau, _ in tree_corpus:
            raw = tau.jump_process()
            for mode in ("optional", "predictable"):
                projection = dual_projection(tree, raw, mode=mode)
                assert dual_projection_residual(tree, raw, projection, mode) <= 1e-12

    def test_predictable_projection_is_compensator(self, t2, t2_tau):
        """Test the predictable projection of 1{tau <= k} is the Doob-Meyer A."""
        projection = dual_projection(t2, t2_tau.jump_process(), mode="predictable")
        decomp = doob_meyer(t2, azema(t2, t2_tau))

        np.testing.assert_allclose(projection.values, decomp.A.values, atol=1e-12)

    def test_decreasing_raw_rejected(self, t2):
        """Test a decreasing raw path raises NotIncreasing."""
        raw = np.array([[1.0] * 4, [0.0] * 4, [0.0] * 4])

        with pytest.raises(NotIncreasing):
            dual_projection(t2, raw)

    def test_signed_raw_allowed(self, t2):
        """Test increasing=False projects signed increments."""
        raw = np.array([[0.0] * 4, [1.0, 1.0, -1.0, -1.0], [0.0] * 4])

        projection = dual_projection(t2, raw, mode="predictable", increasing=False)

        np.testing.assert_allclose(projection.values[1], 0.0)

    def test_unknown_mode(self, t2):
        """Test an unknown mode raises ValueError."""
        with pytest.raises(ValueError):
            dual_projection(t2, np.zeros((3, 4)), mode="forward")


class TestBracket:
    """Test the predictable bracket."""

    def test_bracket_of_m_with_itself(self, t2, t2_tau):
        """Test d<M, M>_1 = E[dM_1^2] = 1/16 on T2."""
        decomp = doob_meyer(t2, azema(t2, t2_tau))

        bracket = predictable_bracket(t2, decomp.M, decomp.M)

        np.testing.assert_allclose(bracket.values[1], 1.0 / 16.0)


class TestFirstZero:
    """Test the first-zero check of nonnegative supermartingales."""

    def test_azema_passes(self, tree_corpus):
        """Test Azema supermartingales do not jump at their first double zero."""
        for tree, tau, _ in tree_corpus:
            report = check_first_zero(tree, azema(tree, tau))
            assert report.passed

    def test_bracket_part(self, t2, t2_tau):
        """Test the bracket part vanishes for the martingale part of Z."""
        Z = azema(t2, t2_tau)
        decomp = doob_meyer(t2, Z)

        report = check_first_zero(t2, Z, decomp.M)

        assert report.bracket_residual == pytest.approx(0.0, abs=1e-12)

    def test_negative_process_rejected(self, t2):
        """Test negative values raise NotSupermartingale."""
        Y = AdaptedProcess.deterministic(t2, [0.0, -1.0, -1.0])

        with pytest.raises(NotSupermartingale):
            check_first_zero(t2, Y)
