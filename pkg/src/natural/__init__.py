"""
Natural-equation machinery: m-tilde, Markovian pairs, flows, the iM_Z
family built from flows and the flow density, on trees and on simulated
paths.
"""

from .step_model import (
    PP_EPS,
    HyZViolated,
    MTilde,
    StepModel,
    TreeDriver,
    ZeroPredictableProjection,
    alternating_driver,
    build_mtilde,
    mtilde_increments,
)
from .pair import (
    CallableG,
    ConditionViolated,
    ConstantG,
    EmptyJumpSetAtStep,
    JumpSet,
    MarkovFunctional,
    NaturalPair,
    PairReport,
    SaturatingShape,
    markov_pair,
    validate_pair,
)
from .flow import (
    BAND_GUARD,
    FlowBundle,
    FlowSolution,
    ReconstructionCheck,
    SchemeUnstable,
    build_imz,
    density_from_flow,
    finite_difference_check,
    flow_is_monotone,
    kappa,
    mc_reconstruction_check,
    solve_flow,
    solve_flows,
)
from .monte_carlo import (
    MCModelConfig,
    bucket_tstats,
    dump_paths,
    mtilde_tstats,
    simulate_model,
)

__all__ = [
    'PP_EPS',
    'HyZViolated',
    'MTilde',
    'StepModel',
    'TreeDriver',
    'ZeroPredictableProjection',
    'alternating_driver',
    'build_mtilde',
    'mtilde_increments',
    'CallableG',
    'ConditionViolated',
    'ConstantG',
    'EmptyJumpSetAtStep',
    'JumpSet',
    'MarkovFunctional',
    'NaturalPair',
    'PairReport',
    'SaturatingShape',
    'markov_pair',
    'validate_pair',
    'BAND_GUARD',
    'FlowBundle',
    'FlowSolution',
    'ReconstructionCheck',
    'SchemeUnstable',
    'build_imz',
    'density_from_flow',
    'finite_difference_check',
    'flow_is_monotone',
    'kappa',
    'mc_reconstruction_check',
    'solve_flow',
    'solve_flows',
    'MCModelConfig',
    'bucket_tstats',
    'dump_paths',
    'mtilde_tstats',
    'simulate_model',
]
