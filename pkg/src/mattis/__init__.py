"""Numerics for mean-field spin glasses with Mattis interaction.

High-temperature limit free energies via fixed points of the
replica-symmetric and cascade functionals, Hamilton-Jacobi consistency
checks, Legendre-transform rate functions for the mean magnetization, and
exact finite-size oracles for everything at desk scale.
"""

from .errors import (
    CapabilityError,
    MattisError,
    ModelWarning,
    NonConvergenceError,
    NumericalQualityError,
    ValidationError,
)
from .model_core import (
    DiscreteMeasure,
    ModelSpec,
    PiecewisePath,
    SpeciesSpec,
    SymMatrix,
    XiPoly,
    XiTerm,
    beta_star_lower_bound,
    model_from_json,
    model_to_json,
    path_integral_theta,
    rbm_model,
    scalar_pspin_model,
    t_star_lower_bound,
    xi_eval_suite,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "DiscreteMeasure",
    "MattisError",
    "ModelSpec",
    "ModelWarning",
    "NonConvergenceError",
    "NumericalQualityError",
    "PiecewisePath",
    "SpeciesSpec",
    "SymMatrix",
    "ValidationError",
    "XiPoly",
    "XiTerm",
    "beta_star_lower_bound",
    "model_from_json",
    "model_to_json",
    "path_integral_theta",
    "rbm_model",
    "scalar_pspin_model",
    "t_star_lower_bound",
    "xi_eval_suite",
    "__version__",
]
