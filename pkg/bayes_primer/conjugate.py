"""Conjugate updating, percentile elicitation, intervals and predictives."""
from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np
from scipy import optimize, stats

from .const import (
    BETA_SELECT_LOG_SIZE_MAX,
    BETA_SELECT_LOG_SIZE_MIN,
    BETA_SELECT_LOGIT_MEAN_BOUND,
    BETA_SELECT_TOLERANCE,
    DEFAULT_SIM_SIZE,
)
from .distributions import Distribution, Family, RandomStream, Seed, make_rng
from .errors import ConvergenceError, DataError, ParameterError
from .mcmc import DrawMatrix

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaBinomialState:
    """Beta(a, b) prior with y successes in n trials."""

    a: float
    b: float
    y: int = 0
    n: int = 0

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise ParameterError(f"beta shapes must be positive, got a={self.a}, b={self.b}")
        if self.n < 0 or not 0 <= self.y <= self.n:
            raise DataError(f"binomial data needs 0 <= y <= n, got y={self.y}, n={self.n}")


@dataclass(frozen=True)
class NormalMeanState:
    """Normal(m0, s0) prior on a mean with data summary (ybar, n, sigma)."""

    m0: float
    s0: float
    ybar: float
    n: int
    sigma: float

    def __post_init__(self) -> None:
        if not self.s0 > 0:
            raise ParameterError(f"prior sd must be positive, got {self.s0}")
        if not self.sigma > 0:
            raise ParameterError(f"sampling sd must be positive, got {self.sigma}")
        if self.n < 1:
            raise DataError(f"normal data needs n >= 1, got {self.n}")


class IntervalMethod(StrEnum):
    """How a credible interval is computed."""

    EXACT = "exact-quantile"
    SIMULATION = "simulation"


@dataclass(frozen=True)
class CredibleInterval:
    """Equal-tail interval."""

    lower: float
    upper: float
    level: float
    method: IntervalMethod

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise DataError(f"interval lower {self.lower} exceeds upper {self.upper}")


def beta_update(s: BetaBinomialState) -> Distribution:
    """Beta(a + y, b + n - y)."""
    return Distribution.beta(s.a + s.y, s.b + s.n - s.y)


def normal_update(s: NormalMeanState) -> Distribution:
    """Precision-weighted normal posterior for the mean."""
    prior_precision = 1.0 / s.s0**2
    data_precision = s.n / s.sigma**2
    precision = prior_precision + data_precision
    mean = (s.m0 * prior_precision + s.ybar * data_precision) / precision
    _LOGGER.debug(
        "Normal update: prior precision %.6g, data precision %.6g",
        prior_precision,
        data_precision,
    )
    return Distribution.normal(mean, 1.0 / math.sqrt(precision))


def _beta_cdf(x: float, log_size: float, logit_mean: float) -> float:
    size = math.exp(log_size)
    mean = 1.0 / (1.0 + math.exp(-logit_mean))
    return float(stats.beta.cdf(x, mean * size, (1.0 - mean) * size))


def _logit_mean_matching(q: float, x: float, log_size: float) -> float:
    """Mean (on the logit scale) placing the q-quantile at x for a given size."""
    bound = BETA_SELECT_LOGIT_MEAN_BOUND
    # cdf at x falls as the mean rises with the size held fixed
    return optimize.brentq(
        lambda m: _beta_cdf(x, log_size, m) - q, -bound, bound, xtol=1e-14
    )


def beta_select(
    percentile1: tuple[float, float], percentile2: tuple[float, float]
) -> Distribution:
    """Beta prior matching two elicited percentiles.

    The outer search runs over log(a + b); for each size the inner search
    finds the mean that places the first percentile exactly, and the outer
    residual is the cdf error at the second percentile.

    Args:
        percentile1: (q1, x1), meaning P(p <= x1) = q1
        percentile2: (q2, x2) with q1 < q2 and x1 < x2

    Returns:
        Matching Beta distribution

    Raises:
        ParameterError: If the percentiles are not ordered inside (0, 1)
        ConvergenceError: If no beta in the search box matches both
    """
    (q1, x1), (q2, x2) = percentile1, percentile2
    if not (0 < q1 < q2 < 1 and 0 < x1 < x2 < 1):
        raise ParameterError(
            "beta_select needs 0 < q1 < q2 < 1 and 0 < x1 < x2 < 1, "
            f"got ({q1}, {x1}) and ({q2}, {x2})"
        )

    def residual(log_size: float) -> float:
        logit_mean = _logit_mean_matching(q1, x1, log_size)
        return _beta_cdf(x2, log_size, logit_mean) - q2

    lo, hi = BETA_SELECT_LOG_SIZE_MIN, BETA_SELECT_LOG_SIZE_MAX
    try:
        r_lo, r_hi = residual(lo), residual(hi)
        if r_lo * r_hi > 0:
            best = min(abs(r_lo), abs(r_hi))
            raise ConvergenceError(
                f"no beta matches both percentiles; best cdf residual {best:.3g}"
            )
        log_size = optimize.brentq(residual, lo, hi, xtol=1e-13)
        logit_mean = _logit_mean_matching(q1, x1, log_size)
    except ValueError as err:
        raise ConvergenceError(f"beta_select root search failed: {err}") from err

    size = math.exp(log_size)
    mean = 1.0 / (1.0 + math.exp(-logit_mean))
    result = Distribution.beta(mean * size, (1.0 - mean) * size)
    for q, x in ((q1, x1), (q2, x2)):
        miss = abs(result.quantile(q) - x)
        if miss > BETA_SELECT_TOLERANCE:
            raise ConvergenceError(
                f"beta_select residual {miss:.3g} at q={q} exceeds {BETA_SELECT_TOLERANCE}"
            )
    _LOGGER.debug("Selected %s from percentiles %s, %s", result, percentile1, percentile2)
    return result


def credible_interval(
    d: Distribution,
    level: float,
    method: IntervalMethod | str = IntervalMethod.EXACT,
    sim_size: int = DEFAULT_SIM_SIZE,
    seed: Seed | RandomStream = 0,
) -> CredibleInterval:
    """Equal-tail interval by exact quantiles or from seeded draws."""
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    method = IntervalMethod(method)
    tail = (1.0 - level) / 2.0
    if method is IntervalMethod.EXACT:
        lower, upper = d.quantile(tail), d.quantile(1.0 - tail)
    else:
        draws = d.sample(sim_size, seed)
        lower, upper = (float(v) for v in np.quantile(draws, [tail, 1.0 - tail]))
    return CredibleInterval(lower, upper, level, method)


def beta_prob(d: Distribution, lo: float, hi: float) -> float:
    """P(lo < p <= hi) under a beta distribution."""
    return d.cdf(hi) - d.cdf(lo)


def _require_family(d: Distribution, family: Family) -> None:
    if d.family is not family:
        raise ParameterError(f"expected a {family} distribution, got {d}")


def beta_binomial_predictive(posterior: Distribution, m: int) -> dict[int, float]:
    """Predictive pmf of future successes in m trials."""
    _require_family(posterior, Family.BETA)
    if m < 0:
        raise ParameterError(f"future trials must be nonnegative, got {m}")
    a, b = posterior.params
    ks = np.arange(m + 1)
    pmf = stats.betabinom.pmf(ks, m, a, b)
    return {int(k): float(p) for k, p in zip(ks, pmf)}


def beta_binomial_predictive_draws(
    posterior: Distribution, m: int, size: int, seed: Seed | RandomStream
) -> np.ndarray:
    """Two-stage predictive draws: p from the posterior, then Binomial(m, p)."""
    _require_family(posterior, Family.BETA)
    rng = make_rng(seed)
    p = posterior.sample(size, rng)
    return rng.binomial(m, p).astype(float)


def normal_predictive(
    posterior: Distribution | tuple[float, float], sigma: float
) -> Distribution:
    """Predictive distribution of one future observation.

    Args:
        posterior: Normal posterior of the mean, or a (mean, sd) pair; the pair
            form accepts sd = 0 for a known mean
        sigma: Sampling sd
    """
    if not sigma > 0:
        raise ParameterError(f"sampling sd must be positive, got {sigma}")
    if isinstance(posterior, Distribution):
        _require_family(posterior, Family.NORMAL)
        mean, sd = posterior.params
    else:
        mean, sd = posterior
        if sd < 0:
            raise ParameterError(f"posterior sd must be nonnegative, got {sd}")
    return Distribution.normal(mean, math.sqrt(sd**2 + sigma**2))


def normal_predictive_draws(
    posterior: Distribution, sigma: float, size: int, seed: Seed | RandomStream
) -> np.ndarray:
    """Two-stage predictive draws: mean from the posterior, then the observation."""
    _require_family(posterior, Family.NORMAL)
    rng = make_rng(seed)
    theta = posterior.sample(size, rng)
    return rng.normal(theta, sigma)


def compare_proportions(
    first: Distribution, second: Distribution, size: int, seed: Seed | RandomStream
) -> DrawMatrix:
    """Simulate independent beta posteriors and their difference.

    Returns:
        DrawMatrix with columns p1, p2, diff (= p2 - p1)
    """
    _require_family(first, Family.BETA)
    _require_family(second, Family.BETA)
    rng = make_rng(seed)
    p1 = first.sample(size, rng)
    p2 = second.sample(size, rng)
    return DrawMatrix(
        ("p1", "p2", "diff"),
        np.column_stack([p1, p2, p2 - p1]),
        seed=seed if isinstance(seed, int) else None,
    )
