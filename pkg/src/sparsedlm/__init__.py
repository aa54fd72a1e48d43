"""Sparse Bayesian dynamic linear models for effective connectivity."""

from .dlm import DlmModel, FilterResult, StatePath, ffbs_sample, kalman_filter, one_step_predictive_density
from .errors import FilterDivergenceError, InputError, SamplerError

__version__ = "0.1.0"
