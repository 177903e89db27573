"""Numerical laboratory for a scalar field on hyperbolic half-space.

Closed-form propagators and boundary quadratic forms, a Gaussian lattice
field with a Wick-ordered quartic interaction, boundary generating
functionals evaluated two dual ways, Gram-matrix positivity
certification, and the shrinking-box suppression study.
"""

from .bumps import BoundaryTestFunction, GaussianBump
from .errors import AdslabError, BudgetError, NumericalError, ValidationError
from .geometry import BulkPoint, ConformalMap
from .interaction import (RatioEstimate, TrivialityReport, fit_exponent,
                          triviality_run)
from .kernels import SpectralParams, spectral_params
from .lattice import LatticeModel, LatticeSpec, build_model
from .positivity import GramReport

__version__ = "0.1.0"

__all__ = [
    "AdslabError",
    "BoundaryTestFunction",
    "BudgetError",
    "BulkPoint",
    "ConformalMap",
    "GaussianBump",
    "GramReport",
    "LatticeModel",
    "LatticeSpec",
    "NumericalError",
    "RatioEstimate",
    "SpectralParams",
    "TrivialityReport",
    "ValidationError",
    "__version__",
    "build_model",
    "fit_exponent",
    "spectral_params",
    "triviality_run",
]
