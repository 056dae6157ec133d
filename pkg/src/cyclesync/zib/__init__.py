"""Bayesian zero-inflated beta regression with dyad random effects."""

from .model import (
    PriorRegime,
    PRIOR_REGIMES,
    ZibDesign,
    ZibParams,
    ParamLayout,
    zib_logdensity,
    predictors,
    log_posterior,
    log_posterior_and_grad,
)
from .sampler import SamplerConfig, PosteriorDraws, sample_posterior
from .loo import elpd_loo, compare_elpd
from .summary import summarize

__all__ = [
    "PriorRegime",
    "PRIOR_REGIMES",
    "ZibDesign",
    "ZibParams",
    "ParamLayout",
    "zib_logdensity",
    "predictors",
    "log_posterior",
    "log_posterior_and_grad",
    "SamplerConfig",
    "PosteriorDraws",
    "sample_posterior",
    "elpd_loo",
    "compare_elpd",
    "summarize",
]
