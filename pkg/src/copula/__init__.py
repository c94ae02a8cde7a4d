"""
Copulas and order statistics of copula-coupled default times.
"""

from .copulas import (
    COPULAS,
    ClaytonCopula,
    ComonotoneCopula,
    Copula,
    CopulaReport,
    FGMCopula,
    GumbelCopula,
    InvalidCopula,
    ProductCopula,
    check_copula_axioms,
    make_copula,
)
from .order_statistics import (
    MAX_TIMES,
    CombinatorialOverflow,
    JointModel,
    JointSample,
    NotDifferentiableMarginal,
    RankMap,
    brute_force_joint_order_cdf,
    brute_force_order_cdf,
    export_order_cdf,
    integrate_order_density,
    order_cdf,
    order_density,
    order_density_on_paths,
    order_density_residual,
    order_stats,
    path_reconstruction_residual,
    rank_conservation_residual,
    sample_joint,
    sorted_times,
    union_coefficients,
    xi_density,
    xi_density_continuous,
    xi_density_on_paths,
)

__all__ = [
    'COPULAS',
    'ClaytonCopula',
    'ComonotoneCopula',
    'Copula',
    'CopulaReport',
    'FGMCopula',
    'GumbelCopula',
    'InvalidCopula',
    'ProductCopula',
    'check_copula_axioms',
    'make_copula',
    'MAX_TIMES',
    'CombinatorialOverflow',
    'JointModel',
    'JointSample',
    'NotDifferentiableMarginal',
    'RankMap',
    'brute_force_joint_order_cdf',
    'brute_force_order_cdf',
    'export_order_cdf',
    'integrate_order_density',
    'order_cdf',
    'order_density',
    'order_density_on_paths',
    'order_density_residual',
    'order_stats',
    'path_reconstruction_residual',
    'rank_conservation_residual',
    'sample_joint',
    'sorted_times',
    'union_coefficients',
    'xi_density',
    'xi_density_continuous',
    'xi_density_on_paths',
]
