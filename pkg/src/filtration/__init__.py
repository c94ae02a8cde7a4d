"""
Exact finite-filtration engine.

Scenario trees, adapted processes and random times, conditional
expectations, the Doob-Meyer decomposition, dual projections and the
right-inverse / normalization utilities used by every other area.
"""

from .tree import (
    ATOM_EPS,
    MASS_TOL,
    TOL,
    InvalidSpec,
    LevelMismatch,
    ScenarioTree,
    TimeGrid,
    binary_tree,
    build_tree,
    load_tree_spec,
    random_tree,
)
from .processes import (
    AdaptedProcess,
    RandomTime,
    cond_expect,
    is_martingale,
    martingale_residual,
    optional_projection,
)
from .decomposition import (
    Decomposition,
    FirstZeroReport,
    NotIncreasing,
    NotSupermartingale,
    check_first_zero,
    doob_meyer,
    dual_projection,
    dual_projection_residual,
    predictable_bracket,
)
from .change_of_variable import (
    NormalizedIncrease,
    RightInverse,
    StepLinearFunction,
    change_of_variable_residual,
    check_inverse_identities,
    exp_integral,
    normalize_A,
    right_inverse,
    stieltjes_integral,
)

__all__ = [
    'ATOM_EPS',
    'MASS_TOL',
    'TOL',
    'InvalidSpec',
    'LevelMismatch',
    'ScenarioTree',
    'TimeGrid',
    'binary_tree',
    'build_tree',
    'load_tree_spec',
    'random_tree',
    'AdaptedProcess',
    'RandomTime',
    'cond_expect',
    'is_martingale',
    'martingale_residual',
    'optional_projection',
    'Decomposition',
    'FirstZeroReport',
    'NotIncreasing',
    'NotSupermartingale',
    'check_first_zero',
    'doob_meyer',
    'dual_projection',
    'dual_projection_residual',
    'predictable_bracket',
    'NormalizedIncrease',
    'RightInverse',
    'StepLinearFunction',
    'change_of_variable_residual',
    'check_inverse_identities',
    'exp_integral',
    'normalize_A',
    'right_inverse',
    'stieltjes_integral',
]
