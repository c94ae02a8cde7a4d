"""
Unit tests for Markovian pairs, jump sets and the jump conditions.
"""

import numpy as np
import pytest

from src.families import azema
from src.filtration import doob_meyer
from src.natural import (
    CallableG,
    ConditionViolated,
    ConstantG,
    EmptyJumpSetAtStep,
    FlowBundle,
    SaturatingShape,
    StepModel,
    alternating_driver,
    markov_pair,
    solve_flows,
    validate_pair,
)


@pytest.fixture
def t2_model(t2, t2_tau):
    return StepModel.from_tree(doob_meyer(t2, azema(t2, t2_tau)), alternating_driver(t2))


class Steep:
    """Shape breaking |phi(x)/x| <= 1."""

    def __call__(self, x):
        return 1.5 * np.tanh(np.asarray(x, dtype=float))

    def derivative(self, x):
        return 1.5 / np.cosh(np.asarray(x, dtype=float)) ** 2


class TestShapes:
    """Test the saturating shape and g variants."""

    def test_saturating_shape(self):
        """Test identity on [0, 1] and the saturating tails."""
        phi = SaturatingShape()

        assert phi(0.5) == pytest.approx(0.5)
        assert phi(3.0) == pytest.approx(2.0 - np.exp(-2.0))
        assert phi(-1.0) == pytest.approx(np.exp(-1.0) - 1.0)
        assert phi.derivative(0.0) == pytest.approx(1.0)

    def test_constant_g_shape(self):
        """Test ConstantG broadcasts over x with a trailing dimension."""
        g = ConstantG((0.1, 0.2))

        assert g(0.0, np.zeros(5)).shape == (5, 2)
        np.testing.assert_allclose(g.derivative(0.0, np.zeros(5)), 0.0)

    def test_callable_g_derivative(self):
        """Test the central-difference derivative of a callable g."""
        g = CallableG(lambda t, x: x ** 2)

        np.testing.assert_allclose(g.derivative(0.0, np.array([0.5, 1.0]))[:, 0],
                                   [1.0, 2.0], rtol=1e-6)


class TestMarkovPair:
    """Test pair construction and the jump-set oracle."""

    def test_functional_vanishes_at_zero(self):
        """Test F(t, 0) = 0 through phi(0) = 0."""
        pair = markov_pair(0.3)

        np.testing.assert_allclose(pair.functional.value(0.0, np.array([0.0]), 0.5), 0.0)

    def test_steep_shape_rejected(self):
        """Test a shape above the diagonal raises ValueError."""
        with pytest.raises(ValueError):
            markov_pair(0.1, phi=Steep())

    def test_dimension_mismatch(self, t2_model):
        """Test a two-dimensional g against a one-dimensional driver."""
        with pytest.raises(ValueError):
            markov_pair(ConstantG((0.1, 0.2)), model=t2_model)

    def test_jump_set_membership(self):
        """Test zero jumps are admissible and large jumps are not."""
        jump_set = markov_pair(1.0).jump_set

        assert jump_set.contains(0.0, 0.0, 0.0, 0.5)
        assert not jump_set.contains(0.6, 0.0, 0.0, 0.5)

    def test_empty_jump_set(self):
        """Test 1 + dm <= 0 raises EmptyJumpSetAtStep."""
        with pytest.raises(EmptyJumpSetAtStep):
            markov_pair(0.0).jump_set.contains(0.0, 0.0, -1.0, 0.5)


class TestValidatePair:
    """Test the three jump conditions along flows."""

    def test_zero_g_sits_on_the_boundary(self, t2_model):
        """Test dm = -1 on the u node is a boundary point, not a violation."""
        pair = markov_pair(0.0)
        flows = solve_flows(pair, t2_model, range(t2_model.n_steps))

        report = validate_pair(pair, t2_model, flows)

        assert report.passed
        assert report.min_slack["i"] == pytest.approx(0.0)
        assert ("i", 1, "uu") in report.boundary

    def test_violation_names_condition_and_location(self, t2_model):
        """Test a flow below ^p(1-Z) with a negative F breaks the first condition."""
        pair = markov_pair(1.0)
        flows = FlowBundle(starts=np.array([0]), x0=np.full((1, 4), 0.5),
                           keep=np.arange(3), X=np.full((1, 3, 4), 0.5),
                           DX=np.ones((1, 3, 4)))

        with pytest.raises(ConditionViolated) as excinfo:
            validate_pair(pair, t2_model, flows)

        assert "i" in excinfo.value.conditions
        assert excinfo.value.location["i"]["step"] == 1
        assert excinfo.value.location["i"]["path"] == "uu"

    def test_gaps_in_recorded_steps_rejected(self, t2_model):
        """Test flows recorded on non-consecutive steps raise ValueError."""
        pair = markov_pair(0.0)
        flows = solve_flows(pair, t2_model, [0], keep=[0, 2])

        with pytest.raises(ValueError):
            validate_pair(pair, t2_model, flows)
