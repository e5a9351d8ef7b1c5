"""Method specifications and the sample -> predictive-moments dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import bayes, estimators
from .distributions import ScaledBeta
from .quadratic import sample_moments

METHOD_NAMES = ("saa", "bagging", "kernel", "mle", "bayes")
METHOD_CODES = {name: i for i, name in enumerate(METHOD_NAMES)}


@dataclass(frozen=True)
class MethodSpec:
    """One decision method and every hyperparameter it might use.

    Only the fields relevant to ``name`` are read; the rest keep their
    defaults so specs stay comparable and hashable.
    """

    name: str
    bagging: estimators.BaggingSpec = field(default_factory=estimators.BaggingSpec)
    kernel: estimators.KernelSpec = field(default_factory=estimators.KernelSpec)
    mle: estimators.MleFamily = field(default_factory=estimators.MleFamily)
    beta_prior: bayes.BetaPrior = field(default_factory=bayes.BetaPrior)
    mixture_prior: bayes.MixturePrior = field(default_factory=bayes.MixturePrior)
    portfolio_prior: bayes.PortfolioPrior = field(default_factory=bayes.PortfolioPrior)
    chain: bayes.ChainSettings = field(default_factory=bayes.ChainSettings)
    t_nu: float = 3.0
    mc_predictive: bool = False

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; expected one of {METHOD_NAMES}")

    @property
    def code(self) -> int:
        return METHOD_CODES[self.name]


def family_of(truth) -> str:
    """Parametric family the MLE and Bayes methods assume for ``truth``."""
    return "scaled_beta" if isinstance(truth, ScaledBeta) else "gaussian_mixture_2"


def univariate_moments(y, method: MethodSpec, family: str, rng_for):
    """Predictive moments of ``y`` under ``method``.

    Returns arrays ``(m1, m2)``: length ``B`` for bagging (one decision per
    resample, averaged by the caller), length 1 otherwise. ``rng_for(role)``
    supplies the generator for a stream role.
    """
    name = method.name
    if name == "saa":
        mom = sample_moments(y)
    elif name == "bagging":
        return estimators.bootstrap_moments(y, method.bagging, rng_for("bootstrap"))
    elif name == "kernel":
        if method.mc_predictive:
            h = estimators.kernel_bandwidth(y, method.kernel)
            mom = sample_moments(estimators.sample_kernel_density(
                y, h, estimators.MC_PREDICTIVE_DRAWS, rng_for("predictive")))
        else:
            mom = estimators.kernel_moments(y, method.kernel)
    elif name == "mle":
        fitted = estimators.mle_fit(y, _mle_family(method, family))
        if method.mc_predictive:
            mom = sample_moments(fitted.sample(estimators.MC_PREDICTIVE_DRAWS, rng_for("predictive")))
        else:
            mom = fitted.moments()
    else:
        draws = bayes.posterior_1d(y, family, method.beta_prior, method.mixture_prior,
                                   method.chain, rng_for("mcmc"))
        if method.mc_predictive:
            mom = sample_moments(bayes.sample_predictive_1d(
                draws, estimators.MC_PREDICTIVE_DRAWS, rng_for("predictive")))
        else:
            mom = bayes.predictive_moments_1d(draws)
    return np.array([mom.m1]), np.array([mom.m2])


def _mle_family(method: MethodSpec, family: str) -> estimators.MleFamily:
    if method.mle.family == family:
        return method.mle
    return replace(method.mle, family=family)
