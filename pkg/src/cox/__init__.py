"""
Product space, Cox measure and the Radon-Nikodym density process.
"""

from .product_measure import (
    COX,
    IMAGE,
    BadNormalization,
    ProductMeasure,
    atom_masses,
    check_cox_property,
    cox_conditional_expectation,
    cox_measure,
    image_measure,
    product_atoms,
)
from .radon_nikodym import (
    DensityLevel,
    DensityProcess,
    DifferentiabilityDecision,
    NotAbsolutelyContinuous,
    closed_form_density,
    decide_differentiable,
    density_martingale_residual,
    density_process,
    dual_projection_identity,
    girsanov_residual,
    radon_nikodym,
)

__all__ = [
    'COX',
    'IMAGE',
    'BadNormalization',
    'ProductMeasure',
    'atom_masses',
    'check_cox_property',
    'cox_conditional_expectation',
    'cox_measure',
    'image_measure',
    'product_atoms',
    'DensityLevel',
    'DensityProcess',
    'DifferentiabilityDecision',
    'NotAbsolutelyContinuous',
    'closed_form_density',
    'decide_differentiable',
    'density_martingale_residual',
    'density_process',
    'dual_projection_identity',
    'girsanov_residual',
    'radon_nikodym',
]
