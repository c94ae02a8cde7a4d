"""
Unit tests for natural-equation flows, the iM_Z family and the flow density.
"""

import numpy as np
import pytest

from src.families import azema, check_axioms, check_imz, cox_family, differentiate
from src.filtration import doob_meyer
from src.natural import (
    MCModelConfig,
    SchemeUnstable,
    StepModel,
    alternating_driver,
    build_imz,
    density_from_flow,
    finite_difference_check,
    flow_is_monotone,
    kappa,
    markov_pair,
    simulate_model,
    solve_flow,
    solve_flows,
)


@pytest.fixture
def t2_model(t2, t2_tau):
    return StepModel.from_tree(doob_meyer(t2, azema(t2, t2_tau)), alternating_driver(t2))


@pytest.fixture
def small_mc():
    """Fifty steps of the simulated model on 200 paths."""
    return simulate_model(MCModelConfig(step=1e-2, steps=50, paths=200, seed=1,
                                        block_size=100))


class TestSolveFlows:
    """Test the Euler recursion."""

    def test_zero_g_scales_by_one_plus_dm(self, t2_model):
        """Test X_2 = X_1 (1 + dm_2) for the flow started at level 1."""
        flow = solve_flow(markov_pair(0.0), t2_model, 1)

        np.testing.assert_allclose(flow.at(1), [0.0, 0.0, 0.5, 0.5])
        np.testing.assert_allclose(flow.at(2), [0.0, 0.0, 0.5, 0.5])
        assert np.isnan(flow.X[0]).all()

    def test_start_value_override(self, t2_model):
        """Test an explicit start value replaces 1 - Z_u."""
        flow = solve_flow(markov_pair(0.0), t2_model, 0, x0=0.4)

        np.testing.assert_allclose(flow.at(1), [0.0, 0.0, 0.8, 0.8])

    def test_band_guard(self, t2_model):
        """Test a flow leaving the guard band raises SchemeUnstable."""
        with pytest.raises(SchemeUnstable):
            solve_flows(markov_pair(0.0), t2_model, [0], x0=2.0)

    def test_bad_start(self, t2_model):
        """Test a start beyond the last step raises ValueError."""
        with pytest.raises(ValueError):
            solve_flows(markov_pair(0.0), t2_model, [3])

    def test_kappa_without_g(self, t2_model):
        """Test kappa = 1 + dm when g vanishes."""
        k = kappa(markov_pair(0.0), t2_model)

        np.testing.assert_allclose(k[0], 1.0)
        np.testing.assert_allclose(k[1:], 1.0 + t2_model.dm[1:])


class TestFamilyAndDensity:
    """Test the iM_Z family from flows and its density."""

    def test_family_passes_axioms(self, t2, t2_tau, t2_model):
        """Test the flow family is an iM_Z family on T2."""
        im = build_imz(markov_pair(0.0), t2_model)

        assert check_axioms(im).passed
        assert check_imz(im, azema(t2, t2_tau)).passed
        np.testing.assert_allclose(im.at(1, 2), [0.0, 0.0, 0.5, 0.5])

    def test_flow_density_matches_family_density(self, t2, t2_tau, t2_model):
        """Test the flow density equals the density of the flow family."""
        pair = markov_pair(0.0)
        decomp = doob_meyer(t2, azema(t2, t2_tau))

        from_flow = density_from_flow(pair, t2_model)
        from_family = differentiate(build_imz(pair, t2_model), decomp.A)

        np.testing.assert_allclose(from_flow.values, from_family.values, atol=1e-12)
        np.testing.assert_allclose(from_flow.at(2, 2), [0.0, 2.0, 1.0, 1.0])

    def test_deterministic_z_collapses_to_cox(self, d3, d3_A):
        """Test deterministic Z with g = 0 gives the Cox family."""
        decomp = doob_meyer(d3, 1.0 - d3_A)
        model = StepModel.from_tree(decomp, alternating_driver(d3))

        im = build_imz(markov_pair(0.0), model)

        np.testing.assert_allclose(im.values, cox_family(d3, d3_A).values, atol=1e-12)

    def test_simulated_family_needs_starts(self, small_mc):
        """Test simulated models require explicit start steps."""
        with pytest.raises(ValueError):
            build_imz(markov_pair(0.1), small_mc)


class TestFlowProperties:
    """Test derivative iterates and monotonicity."""

    def test_finite_difference(self, small_mc):
        """Test the derivative iterate against central differences."""
        error = finite_difference_check(markov_pair(0.1), small_mc, 0, 0.3)

        assert error <= 1e-3

    def test_monotone_on_simulated_paths(self, small_mc):
        """Test ordered starts stay ordered on common noise."""
        assert flow_is_monotone(markov_pair(0.1), small_mc, 0, 0.2, 0.4)

    def test_crossing_on_killed_branch(self, t2_model):
        """Test flows cross where 1 + dm vanishes and F moves them apart."""
        assert not flow_is_monotone(markov_pair(0.1), t2_model, 0, 0.2, 0.4)

    def test_simulated_density_is_derivative(self, small_mc):
        """Test the simulated flow density is the derivative iterate."""
        starts = [0, 10, 20]

        field = density_from_flow(markov_pair(0.1), small_mc, starts, keep=[30])

        assert field.values.shape == (3, 1, small_mc.n_paths)
        assert np.all(np.isfinite(field.at(20, 30)))
