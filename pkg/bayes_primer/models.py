"""Prebuilt fits: hierarchical proportions and means, regression, functionals."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import StrEnum
import logging
import math

import numpy as np
from scipy import special

from .const import (
    DEFAULT_HIER_LOG_TAU_SCALE,
    DEFAULT_HIER_PROPORTION_SCALE,
    DEFAULT_LOGISTIC_PRIOR_SD,
    DEFAULT_MAX_LAG,
    HIER_LOG_K_MAX,
    HIER_LOG_K_MIN,
    HIER_TAU_SD_MAX_FACTOR,
    OPTIMAL_RW_FACTOR,
)
from .distributions import Distribution, RandomStream, Seed, make_rng
from .errors import DataError, ParameterError
from .mcmc import ChainReport, DrawMatrix, build_report, metropolis_rw

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupCounts:
    """Successes y_j out of n_j trials for J >= 2 groups."""

    y: tuple[int, ...]
    n: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y, n = tuple(int(v) for v in self.y), tuple(int(v) for v in self.n)
        if len(y) != len(n):
            raise DataError(f"{len(y)} success counts for {len(n)} trial counts")
        if len(y) < 2:
            raise DataError(f"hierarchical fits need at least 2 groups, got {len(y)}")
        for j, (yj, nj) in enumerate(zip(y, n), start=1):
            if not 0 <= yj <= nj:
                raise DataError(f"group {j}: need 0 <= y <= n, got y={yj}, n={nj}")
        _check_labels(self.labels, len(y))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)

    @property
    def pooled_rate(self) -> float:
        return sum(self.y) / sum(self.n) if sum(self.n) else 0.5


@dataclass(frozen=True)
class GroupMeans:
    """Sample means ybar_j of n_j observations with known sampling sd sigma."""

    ybar: tuple[float, ...]
    n: tuple[int, ...]
    sigma: float
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        ybar = tuple(float(v) for v in self.ybar)
        n = tuple(int(v) for v in self.n)
        if len(ybar) != len(n):
            raise DataError(f"{len(ybar)} means for {len(n)} group sizes")
        if len(ybar) < 2:
            raise DataError(f"hierarchical fits need at least 2 groups, got {len(ybar)}")
        if min(n) < 1:
            raise DataError("every group needs n >= 1")
        if not all(math.isfinite(v) for v in ybar):
            raise DataError("group means must be finite")
        if not self.sigma > 0:
            raise ParameterError(f"sampling sd must be positive, got {self.sigma}")
        _check_labels(self.labels, len(ybar))
        object.__setattr__(self, "ybar", ybar)
        object.__setattr__(self, "n", n)


def _check_labels(labels: tuple[str, ...] | None, count: int) -> None:
    if labels is not None and len(labels) != count:
        raise DataError(f"{len(labels)} labels for {count} groups")


@dataclass(frozen=True, eq=False)
class RegressionData:
    """Design matrix X (n x k, leading column of ones) and response y."""

    x: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise DataError(f"design matrix must be 2-D, got shape {x.shape}")
        n, k = x.shape
        if y.size != n:
            raise DataError(f"design has {n} rows but the response has {y.size}")
        if n <= k:
            raise DataError(f"need more observations than coefficients, got n={n}, k={k}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DataError("regression data must be finite")
        if not np.all(x[:, 0] == 1.0):
            raise DataError("the first design column must be all ones")
        if np.linalg.matrix_rank(x) < k:
            raise DataError(f"design matrix is rank deficient (rank < {k})")
        if self.names is not None and len(self.names) != k:
            raise DataError(f"{len(self.names)} coefficient names for {k} columns")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def k(self) -> int:
        return int(self.x.shape[1])

    @classmethod
    def with_intercept(
        cls, covariates: Sequence[Sequence[float]] | np.ndarray, y: Sequence[float]
    ) -> RegressionData:
        """Prepend a column of ones to an n x (k - 1) covariate matrix."""
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        return cls(np.column_stack([np.ones(cov.shape[0]), cov]), np.asarray(y, dtype=float))


def _coefficient_names(k: int) -> tuple[str, ...]:
    return tuple(f"beta_{i + 1}" for i in range(k))


def _seed_value(seed: Seed | RandomStream) -> int | None:
    return None if isinstance(seed, np.random.Generator) else int(seed)


# Hierarchical proportions


def fit_hierarchical_proportions(
    data: GroupCounts,
    iters: int,
    burn_in: int | None = None,
    seed: Seed | RandomStream = 0,
    scale: Sequence[float] = DEFAULT_HIER_PROPORTION_SCALE,
    max_lag: int = DEFAULT_MAX_LAG,
) -> ChainReport:
    """Partial pooling of several proportions.

    p_j ~ Beta(K eta, K (1 - eta)), eta ~ Uniform(0, 1) and log K ~ Uniform(0, log 1e4).
    (logit eta, log K) is sampled by random-walk Metropolis on its marginal
    posterior with the p_j integrated out; each retained state is completed
    by exact draws p_j ~ Beta(K eta + y_j, K (1 - eta) + n_j - y_j).

    Returns:
        ChainReport over p_1..p_J, eta, K
    """
    y = np.asarray(data.y, dtype=float)
    n = np.asarray(data.n, dtype=float)

    def log_target(theta: np.ndarray) -> float:
        logit_eta, log_k = theta
        if not HIER_LOG_K_MIN <= log_k <= HIER_LOG_K_MAX:
            return -math.inf
        eta = special.expit(logit_eta)
        k = math.exp(log_k)
        a, b = k * eta, k * (1.0 - eta)
        if a <= 0.0 or b <= 0.0:
            return -math.inf
        marginal = special.betaln(a + y, b + n - y) - special.betaln(a, b)
        # Jacobian of eta -> logit eta; the log K prior is flat on its range
        return float(marginal.sum() + special.log_expit(logit_eta) + special.log_expit(-logit_eta))

    pooled = min(max(data.pooled_rate, 0.01), 0.99)
    init = (float(special.logit(pooled)), math.log(10.0))
    rng = make_rng(seed)
    hyper = metropolis_rw(
        log_target, scale, iters, burn_in, init, rng, names=("logit_eta", "log_K"), max_lag=max_lag
    )
    eta = special.expit(hyper.draws.column("logit_eta"))
    k = np.exp(hyper.draws.column("log_K"))
    a = (k * eta)[:, None] + y
    b = (k * (1.0 - eta))[:, None] + n - y
    p = rng.beta(a, b)

    columns = tuple(f"p_{j + 1}" for j in range(y.size)) + ("eta", "K")
    values = np.column_stack([p, eta, k])
    draws = DrawMatrix(columns, values, hyper.draws.burn_in, _seed_value(seed))
    _LOGGER.debug("Hierarchical proportions: J=%d, acceptance %.3f", y.size, hyper.acceptance_rate)
    return build_report(
        draws, acceptance_rate=hyper.acceptance_rate, scale=hyper.scale, max_lag=max_lag
    )


# Hierarchical means


def fit_hierarchical_means(
    data: GroupMeans,
    iters: int,
    burn_in: int | None = None,
    seed: Seed | RandomStream = 0,
    scale: Sequence[float] | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
) -> ChainReport:
    """Partial pooling of several normal means with known sampling sd.

    mu_j ~ Normal(tau_mean, tau_sd), flat prior on tau_mean and
    tau_sd ~ Uniform(0, 100 sigma). (tau_mean, log tau_sd) is sampled on its
    marginal posterior, then mu_j from its exact normal conditional.

    Returns:
        ChainReport over mu_1..mu_J, tau_mean, tau_sd
    """
    ybar = np.asarray(data.ybar, dtype=float)
    v = data.sigma**2 / np.asarray(data.n, dtype=float)
    upper = HIER_TAU_SD_MAX_FACTOR * data.sigma

    def log_target(theta: np.ndarray) -> float:
        tau_mean, log_tau_sd = theta
        tau_sd = math.exp(log_tau_sd)
        if not 0.0 < tau_sd < upper:
            return -math.inf
        total = tau_sd**2 + v
        marginal = -0.5 * np.log(total) - 0.5 * (ybar - tau_mean) ** 2 / total
        return float(marginal.sum() + log_tau_sd)

    spread = float(ybar.std(ddof=1))
    tau_sd0 = min(max(spread, math.sqrt(float(v.mean()))), 0.5 * upper)
    if scale is None:
        mean_sd = 1.0 / math.sqrt(float(np.sum(1.0 / (tau_sd0**2 + v))))
        factor = OPTIMAL_RW_FACTOR / math.sqrt(2.0)
        scale = (factor * mean_sd, DEFAULT_HIER_LOG_TAU_SCALE)
    init = (float(np.average(ybar, weights=1.0 / v)), math.log(tau_sd0))

    rng = make_rng(seed)
    hyper = metropolis_rw(
        log_target, scale, iters, burn_in, init, rng, names=("tau_mean", "log_tau_sd"), max_lag=max_lag
    )
    tau_mean = hyper.draws.column("tau_mean")
    tau_sd = np.exp(hyper.draws.column("log_tau_sd"))
    precision = 1.0 / v + 1.0 / tau_sd[:, None] ** 2
    mean = (ybar / v + tau_mean[:, None] / tau_sd[:, None] ** 2) / precision
    mu = rng.normal(mean, 1.0 / np.sqrt(precision))

    columns = tuple(f"mu_{j + 1}" for j in range(ybar.size)) + ("tau_mean", "tau_sd")
    draws = DrawMatrix(
        columns, np.column_stack([mu, tau_mean, tau_sd]), hyper.draws.burn_in, _seed_value(seed)
    )
    return build_report(
        draws, acceptance_rate=hyper.acceptance_rate, scale=hyper.scale, max_lag=max_lag
    )


# Regression


def sim_linear_regression(data: RegressionData, size: int, seed: Seed | RandomStream) -> DrawMatrix:
    """Direct simulation from the linear model under the flat prior on (beta, log sigma).

    sigma^2 = (n - k) s^2 / chi2(n - k), then beta | sigma^2 ~
    Normal(beta_hat, sigma^2 (X'X)^-1) through the Cholesky factor.

    Returns:
        DrawMatrix over beta_1..beta_k, sigma
    """
    if size < 1:
        raise ParameterError(f"draw count must be at least 1, got {size}")
    x, y = data.x, data.y
    dof = data.n - data.k
    beta_hat, *_ = np.linalg.lstsq(x, y, rcond=None)
    residual = y - x @ beta_hat
    rss = float(residual @ residual)
    if rss <= np.finfo(float).eps * float(y @ y):
        raise DataError("the design fits the response exactly; residual variance is zero")
    chol = np.linalg.cholesky(np.linalg.inv(x.T @ x))

    rng = make_rng(seed)
    sigma2 = rss / rng.chisquare(dof, size)
    z = rng.standard_normal((size, data.k))
    beta = beta_hat + np.sqrt(sigma2)[:, None] * (z @ chol.T)
    names = data.names or _coefficient_names(data.k)
    _LOGGER.debug("Linear regression: n=%d, k=%d, s^2=%.6g", data.n, data.k, rss / dof)
    return DrawMatrix(
        tuple(names) + ("sigma",), np.column_stack([beta, np.sqrt(sigma2)]), 0, _seed_value(seed)
    )


class FunctionalKind(StrEnum):
    """Row-wise posterior functionals."""

    NORMAL_PERCENTILE = "normal_percentile"
    STANDARDIZED_EFFECT = "standardized_effect"


def _scale_column(draws: DrawMatrix, scale: str) -> np.ndarray:
    if scale in draws.columns:
        return draws.column(scale)
    if scale == "sigma" and "sigma2" in draws.columns:
        return np.sqrt(draws.column("sigma2"))
    return draws.column(scale)


def posterior_functional(
    draws: DrawMatrix,
    kind: FunctionalKind | str,
    q: float | None = None,
    location: str | None = None,
    scale: str = "sigma",
    effect: str = "beta_2",
) -> DrawMatrix:
    """Normal percentile mu + z_q sigma, or standardized effect beta / sigma.

    Args:
        draws: Posterior draws holding the needed columns
        kind: Which functional
        q: Percentile level for normal_percentile
        location: Location column; defaults to mu, else beta_1
        scale: Scale column (sigma; sqrt(sigma2) is used when only sigma2 exists)
        effect: Effect column for standardized_effect

    Raises:
        DataError: If a required column is missing
    """
    kind = FunctionalKind(kind)
    sd = _scale_column(draws, scale)
    if kind is FunctionalKind.NORMAL_PERCENTILE:
        if q is None or not 0.0 < q < 1.0:
            raise ParameterError(f"percentile level must lie in (0, 1), got {q}")
        if location is None:
            location = "mu" if "mu" in draws.columns else "beta_1"
        z = Distribution.normal(0.0, 1.0).quantile(q)
        values = draws.column(location) + z * sd
        name = f"percentile_{q:g}"
    else:
        values = draws.column(effect) / sd
        name = "effect_size"
    return DrawMatrix((name,), values[:, None], draws.burn_in, draws.seed)


def _separation_warning(data: RegressionData) -> str | None:
    y = data.y
    if np.all(y == y[0]):
        return "all responses are equal; the posterior is driven by the prior"
    for j in range(1, data.k):
        col = data.x[:, j]
        ones, zeros = col[y == 1.0], col[y == 0.0]
        if ones.min() > zeros.max() or ones.max() < zeros.min():
            return f"covariate {j + 1} separates the responses completely"
    return None


def fit_logistic(
    data: RegressionData,
    iters: int,
    burn_in: int | None = None,
    seed: Seed | RandomStream = 0,
    prior_sd: float = DEFAULT_LOGISTIC_PRIOR_SD,
    scale: float | Sequence[float] | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
) -> ChainReport:
    """Logistic regression by random-walk Metropolis.

    Independent Normal(0, prior_sd) priors on the coefficients. The default
    proposal scale is 2.4 / sqrt(k) times the sd implied by the curvature of
    the log posterior at beta = 0.

    Raises:
        DataError: If the response is not binary
        SettingsError: If iters <= burn_in
    """
    if not np.all(np.isin(data.y, (0.0, 1.0))):
        raise DataError("logistic regression needs a 0/1 response")
    if not prior_sd > 0:
        raise ParameterError(f"prior sd must be positive, got {prior_sd}")
    x, y = data.x, data.y
    precision = 1.0 / prior_sd**2

    def log_target(beta: np.ndarray) -> float:
        eta = x @ beta
        loglik = np.sum(y * special.log_expit(eta) + (1.0 - y) * special.log_expit(-eta))
        return float(loglik - 0.5 * precision * (beta @ beta))

    if scale is None:
        information = x.T @ x / 4.0 + precision * np.eye(data.k)
        sd = np.sqrt(np.diag(np.linalg.inv(information)))
        scale = OPTIMAL_RW_FACTOR / math.sqrt(data.k) * sd

    report = metropolis_rw(
        log_target,
        scale,
        iters,
        burn_in,
        np.zeros(data.k),
        seed,
        names=data.names or _coefficient_names(data.k),
        max_lag=max_lag,
    )
    warning = _separation_warning(data)
    if warning is not None:
        _LOGGER.warning("Logistic fit: %s", warning)
        report = replace(report, warnings=report.warnings + (warning,))
    return report
