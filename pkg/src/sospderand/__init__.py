"""Approximate second-order stationary points and derandomization by optimization.

Modules:

* :mod:`~sospderand.optim` -- perturbed gradient descent, Hessian descent, certification.
* :mod:`~sospderand.smoothing` -- smooth ReLU and smoothed threshold indicators.
* :mod:`~sospderand.reparam` -- Monte Carlo estimators for ``E g(W z + b)`` objectives.
* :mod:`~sospderand.nn` -- teacher-student structure discovery and the bias toy.
* :mod:`~sospderand.maxcut` -- derandomized hyperplane rounding for MAXCUT.
* :mod:`~sospderand.jl` -- learned deterministic Johnson-Lindenstrauss maps.
"""

__version__ = "0.1.0"

from .errors import CapabilityError, NumericalAbort, PrecisionError
from .objective import FunctionObjective, SmoothObjective, quadratic
from .optim import (
    HDConfig,
    PGDConfig,
    SOSPReport,
    check_sosp,
    hessian_descent,
    min_eig,
    min_eig_hvp,
    pgd_minimize,
)
from .params import ParamVector

__all__ = [
    "CapabilityError",
    "FunctionObjective",
    "HDConfig",
    "NumericalAbort",
    "PGDConfig",
    "ParamVector",
    "PrecisionError",
    "SOSPReport",
    "SmoothObjective",
    "check_sosp",
    "hessian_descent",
    "min_eig",
    "min_eig_hvp",
    "pgd_minimize",
    "quadratic",
]
