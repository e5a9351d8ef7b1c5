"""Data-driven decision methods benchmarked against sample average approximation."""

__version__ = "0.1.0"

from .distributions import GaussianMixture2, MomentPair, MultivariateT, ScaledBeta
from .exceptions import (
    ConfigError,
    DegenerateBandwidthError,
    EmptySampleError,
    EstimationError,
    SaaBenchError,
    SingularCovarianceError,
    UnsupportedDistributionError,
)
from .harness import ExperimentConfig, ImprovementRecord, paired_improvement, run_experiment
from .methods import MethodSpec
from .quadratic import DecisionBox, QuadraticCost

__all__ = [
    "ConfigError",
    "DecisionBox",
    "DegenerateBandwidthError",
    "EmptySampleError",
    "EstimationError",
    "ExperimentConfig",
    "GaussianMixture2",
    "ImprovementRecord",
    "MethodSpec",
    "MomentPair",
    "MultivariateT",
    "QuadraticCost",
    "SaaBenchError",
    "ScaledBeta",
    "SingularCovarianceError",
    "UnsupportedDistributionError",
    "paired_improvement",
    "run_experiment",
]
