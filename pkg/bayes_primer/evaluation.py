"""Model comparison and criticism."""
from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math
from typing import Any, Final, Union

import numpy as np
from scipy import stats

from .const import (
    DEFAULT_LEVEL,
    DEFAULT_REPLICATES,
    ERROR_ZERO_EVIDENCE,
    KEY_LABEL,
    KEY_SUMMARY,
    MIN_TAIL_REPLICATES,
    PPC_PARTITIONS,
)
from .conjugate import BetaBinomialState, NormalMeanState, beta_update, normal_update
from .discrete import (
    BinomialLikelihood,
    DiscreteTable,
    LikelihoodSpec,
    NormalLikelihood,
    bayes_update,
    log_evidence,
    table_interval,
    table_mean,
)
from .distributions import Distribution, RandomStream, Seed, make_rng
from .errors import (
    DataError,
    ImpossibleDataError,
    NumericalError,
    ParameterError,
    SettingsError,
)
from .mcmc import DrawMatrix

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteModel:
    """Discrete prior; any LikelihoodSpec can be evaluated against it."""

    prior: DiscreteTable
    label: str | None = None


@dataclass(frozen=True)
class BetaModel:
    """Beta(a, b) prior for a binomial proportion."""

    a: float
    b: float
    label: str | None = None

    def __post_init__(self) -> None:
        Distribution.beta(self.a, self.b)


@dataclass(frozen=True)
class NormalModel:
    """Normal(m0, s0) prior for a mean sampled with known sd."""

    m0: float
    s0: float
    label: str | None = None

    def __post_init__(self) -> None:
        Distribution.normal(self.m0, self.s0)


ModelSpec = Union[DiscreteModel, BetaModel, NormalModel, BetaBinomialState, NormalMeanState]
Posterior = Union[Distribution, DiscreteTable]


def _resolve(m: ModelSpec, data: LikelihoodSpec | None) -> tuple[Any, LikelihoodSpec]:
    """Split conjugate states into (prior model, data)."""
    if isinstance(m, BetaBinomialState):
        return BetaModel(m.a, m.b), data or BinomialLikelihood(m.y, m.n)
    if isinstance(m, NormalMeanState):
        return NormalModel(m.m0, m.s0), data or NormalLikelihood(m.ybar, m.n, m.sigma)
    if data is None:
        raise DataError(f"no data given for model {label_of(m)}")
    return m, data


def label_of(m: ModelSpec) -> str:
    """Display label of a model specification."""
    label = getattr(m, "label", None)
    if label:
        return label
    if isinstance(m, (BetaModel, BetaBinomialState)):
        return f"beta({m.a:g}, {m.b:g})"
    if isinstance(m, (NormalModel, NormalMeanState)):
        return f"normal({m.m0:g}, {m.s0:g})"
    return f"discrete({len(m.prior.points)} points)"


def log_marginal_likelihood(m: ModelSpec, data: LikelihoodSpec | None = None) -> float:
    """Log of the prior predictive density of the data.

    Raises:
        DataError: If the data kind does not fit the model
    """
    model, like = _resolve(m, data)
    if isinstance(model, DiscreteModel):
        try:
            return log_evidence(model.prior, like)
        except ImpossibleDataError:
            return -math.inf
    if isinstance(model, BetaModel):
        if not isinstance(like, BinomialLikelihood):
            raise DataError("a beta prior needs binomial data")
        return float(stats.betabinom.logpmf(like.y, like.n, model.a, model.b))
    if not isinstance(like, NormalLikelihood):
        raise DataError("a normal prior needs normal data")
    sd = math.sqrt(model.s0**2 + like.sigma**2 / like.n)
    return float(stats.norm.logpdf(like.ybar, model.m0, sd))


def marginal_likelihood(m: ModelSpec, data: LikelihoodSpec | None = None) -> float:
    """Prior predictive density of the data.

    Discrete priors give sum_j g(p_j) L(data | p_j); a beta prior gives the
    beta-binomial pmf; a normal prior gives the normal marginal of ybar.
    """
    return math.exp(log_marginal_likelihood(m, data))


def bayes_factor(m1: ModelSpec, m2: ModelSpec, data: LikelihoodSpec | None = None) -> float:
    """Ratio of marginal likelihoods m1 / m2.

    Raises:
        DataError: If the marginal likelihood of m2 is zero
    """
    denominator = log_marginal_likelihood(m2, data)
    if denominator == -math.inf:
        raise DataError(ERROR_ZERO_EVIDENCE)
    return math.exp(log_marginal_likelihood(m1, data) - denominator)


def posterior_of(m: ModelSpec, data: LikelihoodSpec | None = None) -> Posterior:
    """Posterior distribution or table under a model specification."""
    model, like = _resolve(m, data)
    if isinstance(model, DiscreteModel):
        return bayes_update(model.prior, like)
    if isinstance(model, BetaModel):
        if not isinstance(like, BinomialLikelihood):
            raise DataError("a beta prior needs binomial data")
        return beta_update(BetaBinomialState(model.a, model.b, like.y, like.n))
    if not isinstance(like, NormalLikelihood):
        raise DataError("a normal prior needs normal data")
    return normal_update(NormalMeanState(model.m0, model.s0, like.ybar, like.n, like.sigma))


# Posterior predictive checks

TestFunction = Callable[[np.ndarray], float]

TEST_FUNCTIONS: Final[dict[str, TestFunction]] = {
    "mean": lambda y: float(np.mean(y)),
    "variance": lambda y: float(np.var(y, ddof=1)),
    "min": lambda y: float(np.min(y)),
    "max": lambda y: float(np.max(y)),
    "sum": lambda y: float(np.sum(y)),
}


@dataclass(frozen=True)
class BinomialSampling:
    """y_i ~ Binomial(trials_i, p) with the observed design."""

    trials: tuple[int, ...]
    parameter: str = "p"

    def __post_init__(self) -> None:
        trials = tuple(int(n) for n in self.trials)
        if not trials or min(trials) < 0:
            raise DataError("binomial design needs nonnegative trial counts")
        object.__setattr__(self, "trials", trials)

    @property
    def size(self) -> int:
        return len(self.trials)

    def replicate(self, rng: RandomStream, theta: np.ndarray, _scale: np.ndarray | None) -> np.ndarray:
        return rng.binomial(np.asarray(self.trials), theta[:, None]).astype(float)


@dataclass(frozen=True)
class NormalSampling:
    """y_i ~ Normal(mu, sigma) for size observations.

    sigma is either known or read from a sigma / sigma2 column of the draws.
    """

    size: int
    sigma: float | None = None
    parameter: str = "mu"

    def __post_init__(self) -> None:
        if self.size < 1:
            raise DataError(f"normal design needs at least one observation, got {self.size}")
        if self.sigma is not None and not self.sigma > 0:
            raise ParameterError(f"sampling sd must be positive, got {self.sigma}")

    def replicate(self, rng: RandomStream, theta: np.ndarray, scale: np.ndarray | None) -> np.ndarray:
        sd = scale if scale is not None else np.full(theta.size, self.sigma)
        return rng.normal(theta[:, None], sd[:, None], size=(theta.size, self.size))


SamplingModel = Union[BinomialSampling, NormalSampling]


@dataclass(frozen=True, eq=False)
class PpcResult:
    """Observed statistic, replicated statistics and upper-tail probability."""

    t_observed: float
    t_replicates: np.ndarray
    tail_prob: float

    def __post_init__(self) -> None:
        if self.t_replicates.size < 1:
            raise DataError("a predictive check needs at least one replicate")
        if not 0.0 <= self.tail_prob <= 1.0:
            raise NumericalError(f"tail probability {self.tail_prob} outside [0, 1]")


def _parameter_draws(
    posterior: Distribution | DrawMatrix,
    sampling: SamplingModel,
    count: int,
    rng: RandomStream,
) -> tuple[np.ndarray, np.ndarray | None]:
    if isinstance(posterior, Distribution):
        if isinstance(sampling, NormalSampling) and sampling.sigma is None:
            raise DataError("a known sigma is needed when the posterior is a distribution")
        return posterior.sample(count, rng), None
    rows = rng.integers(0, posterior.n_draws, size=count)
    theta = posterior.column(sampling.parameter)[rows]
    scale = None
    if isinstance(sampling, NormalSampling) and sampling.sigma is None:
        if "sigma" in posterior.columns:
            scale = posterior.column("sigma")[rows]
        else:
            scale = np.sqrt(posterior.column("sigma2")[rows])
    return theta, scale


def _streams(seed: Seed | RandomStream, partitions: int) -> list[RandomStream]:
    if isinstance(seed, np.random.Generator):
        return seed.spawn(partitions)
    make_rng(seed)
    children = np.random.SeedSequence(int(seed)).spawn(partitions)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]


def posterior_predictive_check(
    posterior: Distribution | DrawMatrix,
    sampling: SamplingModel,
    test: str | TestFunction,
    observed: Sequence[float],
    replicates: int = DEFAULT_REPLICATES,
    seed: Seed | RandomStream = 0,
    threads: int = 1,
) -> PpcResult:
    """Compare a test statistic of the data with its posterior predictive distribution.

    Each replicate draws theta* from the posterior and a dataset of the observed
    design from the sampling model. Replicates are generated in a fixed number
    of partitions, each with its own spawned stream, and concatenated in
    partition order, so the result does not depend on ``threads``.

    Returns:
        PpcResult with tail probability (1 + #{T(y_rep) >= T(y)}) / (R + 1)
    """
    statistic = TEST_FUNCTIONS[test] if isinstance(test, str) else test
    y = np.asarray(observed, dtype=float)
    if y.size != sampling.size:
        raise DataError(f"observed data has {y.size} values but the design has {sampling.size}")
    if replicates < 1:
        raise SettingsError(f"replicates must be at least 1, got {replicates}")
    if replicates < MIN_TAIL_REPLICATES:
        _LOGGER.warning(
            "Only %d replicates; tail probabilities need at least %d", replicates, MIN_TAIL_REPLICATES
        )
    if threads < 1:
        raise SettingsError(f"threads must be at least 1, got {threads}")

    counts = [len(chunk) for chunk in np.array_split(np.arange(replicates), PPC_PARTITIONS)]
    streams = _streams(seed, PPC_PARTITIONS)

    def run(partition: int) -> np.ndarray:
        count = counts[partition]
        if count == 0:
            return np.empty(0)
        rng = streams[partition]
        theta, scale = _parameter_draws(posterior, sampling, count, rng)
        datasets = sampling.replicate(rng, theta, scale)
        return np.array([statistic(row) for row in datasets], dtype=float)

    if threads == 1:
        parts = [run(i) for i in range(PPC_PARTITIONS)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(PPC_PARTITIONS)))

    t_rep = np.concatenate(parts)
    t_obs = float(statistic(y))
    tail = (1.0 + float(np.count_nonzero(t_rep >= t_obs))) / (replicates + 1.0)
    _LOGGER.debug("PPC: T(y)=%.6g, tail probability %.4f over %d replicates", t_obs, tail, replicates)
    return PpcResult(t_obs, t_rep, tail)


# Sensitivity

Summary = Callable[[Posterior], Any]


def _interval(post: Posterior, level: float) -> tuple[float, float]:
    if isinstance(post, DiscreteTable):
        return table_interval(post, level)
    tail = (1.0 - level) / 2.0
    return post.quantile(tail), post.quantile(1.0 - tail)


SUMMARIES: Final[dict[str, Summary]] = {
    "mean": lambda post: table_mean(post)[0] if isinstance(post, DiscreteTable) else post.mean,
    "interval": lambda post: _interval(post, DEFAULT_LEVEL),
    "lower": lambda post: _interval(post, DEFAULT_LEVEL)[0],
    "upper": lambda post: _interval(post, DEFAULT_LEVEL)[1],
}


def event_summary(lo: float, hi: float) -> Summary:
    """Summary giving P(lo < theta <= hi)."""

    def probability(post: Posterior) -> float:
        if isinstance(post, DiscreteTable):
            x = post.coordinates()[:, 0]
            return float(post.probs[(x > lo) & (x <= hi)].sum())
        return post.cdf(hi) - post.cdf(lo)

    return probability


@dataclass(frozen=True)
class SensitivityRow:
    label: str
    summary: Any

    def as_dict(self) -> dict[str, Any]:
        return {KEY_LABEL: self.label, KEY_SUMMARY: self.summary}


def sensitivity_scan(
    base: ModelSpec,
    perturbations: Sequence[ModelSpec],
    data: LikelihoodSpec | None,
    summary: str | Summary = "mean",
) -> list[SensitivityRow]:
    """Recompute one posterior summary under the base and each perturbed spec.

    Returns:
        Rows of (label, summary), base first
    """
    summarize = SUMMARIES[summary] if isinstance(summary, str) else summary
    rows = []
    for spec in (base, *perturbations):
        value = summarize(posterior_of(spec, data))
        if isinstance(value, tuple):
            value = tuple(float(v) for v in value)
        elif isinstance(value, (int, float, np.floating)):
            value = float(value)
        rows.append(SensitivityRow(label_of(spec), value))
    _LOGGER.debug("Sensitivity scan over %d specifications", len(rows))
    return rows

