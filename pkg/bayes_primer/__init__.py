"""Bayesian inference toolkit: discrete and conjugate updating, MCMC, a model language."""
from __future__ import annotations

from .conjugate import (
    BetaBinomialState,
    CredibleInterval,
    NormalMeanState,
    beta_select,
    beta_update,
    credible_interval,
    normal_update,
)
from .const import VERSION
from .discrete import DiscreteTable, bayes_update, make_grid_prior
from .distributions import Distribution, Family, make_rng
from .errors import (
    BayesPrimerError,
    DataError,
    ModelCompileError,
    ModelSyntaxError,
    NumericalError,
    UsageError,
)
from .evaluation import bayes_factor, marginal_likelihood, posterior_predictive_check
from .graph import ModelGraph, compile_model, sample_graph
from .language import parse, pretty_print
from .mcmc import ChainReport, DrawMatrix, gibbs_normal, laplace_approx, metropolis_rw

__version__ = VERSION

__all__ = [
    "BayesPrimerError",
    "BetaBinomialState",
    "ChainReport",
    "CredibleInterval",
    "DataError",
    "DiscreteTable",
    "Distribution",
    "DrawMatrix",
    "Family",
    "ModelCompileError",
    "ModelGraph",
    "ModelSyntaxError",
    "NormalMeanState",
    "NumericalError",
    "UsageError",
    "bayes_factor",
    "bayes_update",
    "beta_select",
    "beta_update",
    "compile_model",
    "credible_interval",
    "gibbs_normal",
    "laplace_approx",
    "make_grid_prior",
    "make_rng",
    "marginal_likelihood",
    "metropolis_rw",
    "normal_update",
    "parse",
    "posterior_predictive_check",
    "pretty_print",
    "sample_graph",
]
