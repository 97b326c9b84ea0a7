"""Convexity-bias correction for plug-in estimates of convex functions and
functionals: shifting and scaling corrections estimated by bootstrap, the
analytic covariance correction, benchmark problem families, and numeric
checks of the theory's sufficient conditions."""

from .core import (
    BootstrapPlan,
    DebiasEstimate,
    DegenerateDenominatorError,
    UnsupportedMethodError,
    bootstrap_means,
    covariance_debias,
    exact_expectation_debias,
    exact_resample_expectation,
    scale_debias,
    shift_debias,
)
from .objectives import DomainError, EvaluationError, Objective
from .observations import (
    ContractError,
    EuclideanPoint,
    Observation,
    ObservationSet,
    WeightedEmpirical,
    mean_observation,
)
from .resampling import RandomStream, draw_counts, split

__all__ = [
    "BootstrapPlan",
    "ContractError",
    "DebiasEstimate",
    "DegenerateDenominatorError",
    "DomainError",
    "EuclideanPoint",
    "EvaluationError",
    "Objective",
    "Observation",
    "ObservationSet",
    "RandomStream",
    "UnsupportedMethodError",
    "WeightedEmpirical",
    "bootstrap_means",
    "covariance_debias",
    "draw_counts",
    "exact_expectation_debias",
    "exact_resample_expectation",
    "mean_observation",
    "scale_debias",
    "shift_debias",
    "split",
]

__version__ = "0.1.0"
