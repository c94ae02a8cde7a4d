"""
Increasing families of martingales (iM / iM_Z) and their densities.
"""

from .family import (
    AxiomReport,
    AxiomViolation,
    IMFamily,
    IMZReport,
    ProductSample,
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
from .density import (
    DensityField,
    NotDifferentiable,
    density_martingale_residual,
    differentiate,
    increments_of,
    nullset_residual,
    reconstruct,
    reconstruction_residual,
)

__all__ = [
    'AxiomReport',
    'AxiomViolation',
    'IMFamily',
    'IMZReport',
    'ProductSample',
    'TwoParamField',
    'azema',
    'azema_from_family',
    'check_axioms',
    'check_imz',
    'complete_extension',
    'cox_family',
    'im_from_time',
    'sample_from_im',
    'verify_mint',
    'DensityField',
    'NotDifferentiable',
    'density_martingale_residual',
    'differentiate',
    'increments_of',
    'nullset_residual',
    'reconstruct',
    'reconstruction_residual',
]
