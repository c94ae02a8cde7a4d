"""
Progressive enlargement: parametered projections, conditional
expectations given the enlarged filtration, optional splitting and the
drift of base-filtration martingales.
"""

from .progressive import (
    GTestReport,
    NotGAdapted,
    PtsReport,
    ZeroAzema,
    ZeroDensity,
    conditional_expectation,
    conditional_expectation_residual,
    describe_g_atom,
    g_atoms,
    g_cond_expect,
    g_martingale_test,
    g_measurability_error,
    key_lemma,
    pts_check,
)
from .projection import (
    ParamProjection,
    cox_projection_residual,
    projection_identity_residual,
    projection_identity_sweep,
    parametered_projection,
)
from .splitting import SplitPair, optional_split, split_residual
from .drift import (
    T_BOUND,
    DriftReport,
    JeulinYorDrift,
    MCDriftReport,
    ZeroAzemaPredictable,
    ZeroDensityPredictable,
    full_drift,
    jeulin_yor_drift,
    mc_full_drift,
)

__all__ = [
    'GTestReport',
    'NotGAdapted',
    'PtsReport',
    'ZeroAzema',
    'ZeroDensity',
    'conditional_expectation',
    'conditional_expectation_residual',
    'describe_g_atom',
    'g_atoms',
    'g_cond_expect',
    'g_martingale_test',
    'g_measurability_error',
    'key_lemma',
    'pts_check',
    'ParamProjection',
    'cox_projection_residual',
    'projection_identity_residual',
    'projection_identity_sweep',
    'parametered_projection',
    'SplitPair',
    'optional_split',
    'split_residual',
    'T_BOUND',
    'DriftReport',
    'JeulinYorDrift',
    'MCDriftReport',
    'ZeroAzemaPredictable',
    'ZeroDensityPredictable',
    'full_drift',
    'jeulin_yor_drift',
    'mc_full_drift',
]
