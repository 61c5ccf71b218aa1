"""Simulation-based posterior computation and chain diagnostics."""
from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
import logging
import math
from typing import Any

import numpy as np
import pandas as pd
from scipy import optimize

from .const import (
    ACCEPTANCE_WARN_HIGH,
    ACCEPTANCE_WARN_LOW,
    DEFAULT_BURN_IN_FRACTION,
    DEFAULT_LEVEL,
    DEFAULT_MAX_LAG,
    DRAW_INDEX_COLUMN,
    ERROR_DEGENERATE_CHAIN,
    ERROR_ITERATIONS,
    HESSIAN_MIN_STEP,
    HESSIAN_RELATIVE_STEP,
    LAPLACE_MAX_ITERATIONS,
    LAPLACE_MAX_SWEEPS,
    LAPLACE_TOLERANCE,
    TUNE_ITERATIONS,
    TUNE_ROUNDS,
    TUNE_TARGET_HIGH,
    TUNE_TARGET_LOW,
)
from .distributions import Distribution, RandomStream, Seed, make_rng
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateChainError,
    NumericalError,
    ParameterError,
    SettingsError,
)

_LOGGER = logging.getLogger(__name__)

LogTarget = Callable[[np.ndarray], float]


def _seed_value(seed: Seed | RandomStream) -> int | None:
    return None if isinstance(seed, np.random.Generator) else int(seed)


@dataclass(frozen=True, eq=False)
class DrawMatrix:
    """S x d matrix of posterior draws with named columns."""

    columns: tuple[str, ...]
    values: np.ndarray
    burn_in: int = 0
    seed: int | None = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float, ndmin=2)
        columns = tuple(self.columns)
        if values.ndim != 2 or values.shape[1] != len(columns):
            raise DataError(
                f"draw matrix of shape {values.shape} does not match {len(columns)} columns"
            )
        if values.shape[0] < 1:
            raise DataError("a draw matrix needs at least one row")
        if len(set(columns)) != len(columns):
            raise DataError(f"duplicate column names in {columns}")
        if not np.all(np.isfinite(values)):
            raise NumericalError("draw matrix contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    @property
    def n_draws(self) -> int:
        return int(self.values.shape[0])

    def column(self, name: str) -> np.ndarray:
        """Draws of one named column."""
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError as err:
            raise DataError(f"missing column {name!r}; have {', '.join(self.columns)}") from err

    def subset(self, rows: Sequence[int] | np.ndarray | slice) -> DrawMatrix:
        """Rows selected by index, slice or mask."""
        return DrawMatrix(self.columns, self.values[rows], self.burn_in, self.seed)

    def to_frame(self) -> pd.DataFrame:
        """Frame with a leading draw_index column."""
        frame = pd.DataFrame(self.values, columns=list(self.columns))
        frame.insert(0, DRAW_INDEX_COLUMN, np.arange(1, self.n_draws + 1))
        return frame


@dataclass(frozen=True)
class Diagnostics:
    """Autocorrelations (lags 1..L) and effective sample size per column."""

    autocorrelation: dict[str, np.ndarray]
    ess: dict[str, float]


@dataclass(frozen=True, eq=False)
class ChainReport:
    """Sampler output bundle."""

    draws: DrawMatrix
    acceptance_rate: float | None
    autocorrelation: dict[str, np.ndarray | None]
    ess: dict[str, float | None]
    scale: tuple[float, ...] | None = None
    node_acceptance: dict[str, float] = field(default_factory=dict)
    tuning: dict[str, Any] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    @property
    def seed(self) -> int | None:
        return self.draws.seed


@dataclass(frozen=True)
class ColumnSummary:
    """Posterior summary of one column."""

    mean: float
    sd: float
    lower: float
    upper: float
    level: float


def check_iterations(iters: int, burn_in: int) -> None:
    """Raise unless iters > burn_in >= 0."""
    if burn_in < 0 or iters <= burn_in:
        raise SettingsError(f"{ERROR_ITERATIONS} (iters={iters}, burn_in={burn_in})")


def default_burn_in(iters: int) -> int:
    """Ten percent of the iterations."""
    return int(iters * DEFAULT_BURN_IN_FRACTION)


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 1..max_lag.

    Raises:
        DegenerateChainError: If the series has zero variance
    """
    x = np.asarray(x, dtype=float)
    if not 1 <= max_lag < x.size:
        raise SettingsError(f"max_lag must lie in [1, {x.size - 1}], got {max_lag}")
    centred = x - x.mean()
    denominator = float(centred @ centred)
    if denominator <= 0.0 or not math.isfinite(denominator):
        raise DegenerateChainError(ERROR_DEGENERATE_CHAIN)
    return np.array(
        [centred[:-lag] @ centred[lag:] / denominator for lag in range(1, max_lag + 1)]
    )


def effective_sample_size(rho: np.ndarray, n_draws: int) -> float:
    """S / (1 + 2 sum rho), the sum stopping before the first nonpositive rho."""
    nonpositive = np.flatnonzero(rho <= 0.0)
    cut = int(nonpositive[0]) if nonpositive.size else rho.size
    return n_draws / (1.0 + 2.0 * float(rho[:cut].sum()))


def diagnostics(draws: DrawMatrix, max_lag: int = DEFAULT_MAX_LAG) -> Diagnostics:
    """Autocorrelations and ESS for every column.

    Raises:
        DegenerateChainError: If any column is constant
    """
    rhos: dict[str, np.ndarray] = {}
    ess: dict[str, float] = {}
    for name in draws.columns:
        try:
            rho = autocorrelation(draws.column(name), max_lag)
        except DegenerateChainError as err:
            raise DegenerateChainError(f"{ERROR_DEGENERATE_CHAIN}: column {name!r}") from err
        rhos[name] = rho
        ess[name] = effective_sample_size(rho, draws.n_draws)
    return Diagnostics(rhos, ess)


def build_report(
    draws: DrawMatrix,
    acceptance_rate: float | None = None,
    scale: Sequence[float] | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
    node_acceptance: Mapping[str, float] | None = None,
    tuning: Mapping[str, Any] | None = None,
    warnings: Sequence[str] = (),
) -> ChainReport:
    """Wrap draws with diagnostics; ESS is capped at the number of draws."""
    notes = list(warnings)
    rhos: dict[str, np.ndarray | None] = {}
    ess: dict[str, float | None] = {}
    lag = min(max_lag, draws.n_draws - 1)
    for name in draws.columns:
        if lag < 1:
            rhos[name], ess[name] = None, None
            continue
        try:
            rho = autocorrelation(draws.column(name), lag)
        except DegenerateChainError:
            _LOGGER.warning("Column %s never moved; no diagnostics", name)
            notes.append(f"column {name} is constant")
            rhos[name], ess[name] = None, None
            continue
        rhos[name] = rho
        ess[name] = min(effective_sample_size(rho, draws.n_draws), float(draws.n_draws))

    rates = [acceptance_rate] if acceptance_rate is not None else []
    rates.extend((node_acceptance or {}).values())
    for rate in rates:
        if not ACCEPTANCE_WARN_LOW <= rate <= ACCEPTANCE_WARN_HIGH:
            _LOGGER.warning("Acceptance rate %.3f outside [%.1f, %.1f]", rate, ACCEPTANCE_WARN_LOW, ACCEPTANCE_WARN_HIGH)
            notes.append(f"acceptance rate {rate:.3f} outside recommended range")
            break

    return ChainReport(
        draws=draws,
        acceptance_rate=acceptance_rate,
        autocorrelation=rhos,
        ess=ess,
        scale=tuple(float(s) for s in scale) if scale is not None else None,
        node_acceptance=dict(node_acceptance or {}),
        tuning=dict(tuning or {}),
        warnings=tuple(notes),
    )


def summarize(draws: DrawMatrix, level: float = DEFAULT_LEVEL) -> dict[str, ColumnSummary]:
    """Mean, sd and equal-tail interval per column."""
    tail = (1.0 - level) / 2.0
    out = {}
    for name in draws.columns:
        x = draws.column(name)
        lower, upper = np.quantile(x, [tail, 1.0 - tail])
        out[name] = ColumnSummary(
            mean=float(x.mean()),
            sd=float(x.std(ddof=1)) if x.size > 1 else 0.0,
            lower=float(lower),
            upper=float(upper),
            level=level,
        )
    return out


def transform_draws(
    draws: DrawMatrix,
    h: Callable[[np.ndarray], float | Sequence[float] | np.ndarray],
    names: Sequence[str] | None = None,
) -> DrawMatrix:
    """Apply h to every row.

    Args:
        draws: Input draws
        h: Function of one row (a 1-D array in column order)
        names: Output column names; defaults to the input names when the
            width is unchanged, otherwise h_1..h_k
    """
    rows = [np.atleast_1d(np.asarray(h(row), dtype=float)) for row in draws.values]
    values = np.vstack(rows)
    if names is None:
        width = values.shape[1]
        names = draws.columns if width == len(draws.columns) else tuple(
            f"h_{i + 1}" for i in range(width)
        )
    return DrawMatrix(tuple(names), values, draws.burn_in, draws.seed)


# Normal model with unknown mean and variance


def _normal_data(data: Sequence[float]) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise DataError(f"normal model needs at least 2 observations, got {y.size}")
    if not np.all(np.isfinite(y)):
        raise DataError("observations must be finite")
    if np.ptp(y) == 0.0:
        raise DataError("observations have zero sample variance")
    return y


def normal_model_conditionals(
    data: Sequence[float], mu: float, sigma2: float
) -> tuple[Distribution, Distribution]:
    """[mu | sigma2] and [sigma2 | mu] under the 1/sigma2 prior."""
    y = _normal_data(data)
    n = y.size
    mu_given = Distribution.normal(float(y.mean()), math.sqrt(sigma2 / n))
    sigma2_given = Distribution.inverse_gamma(n / 2.0, float(np.sum((y - mu) ** 2)) / 2.0)
    return mu_given, sigma2_given


def gibbs_normal(
    data: Sequence[float],
    iters: int,
    burn_in: int | None = None,
    init: tuple[float, float] | None = None,
    seed: Seed | RandomStream = 0,
    max_lag: int = DEFAULT_MAX_LAG,
) -> ChainReport:
    """Gibbs sampler for (mu, sigma2) of normal data with prior 1/sigma2.

    Each iteration draws mu | sigma2 ~ Normal(ybar, sqrt(sigma2 / n)) and then
    sigma2 | mu ~ InverseGamma(n / 2, sum((y - mu)^2) / 2).

    Args:
        data: Observations, at least two and not all equal
        iters: Total iterations including burn-in
        burn_in: Discarded initial iterations (default 10%)
        init: Starting (mu, sigma2); defaults to (ybar, s^2)
        seed: Explicit seed or stream

    Returns:
        ChainReport with columns mu and sigma2
    """
    y = _normal_data(data)
    burn_in = default_burn_in(iters) if burn_in is None else burn_in
    check_iterations(iters, burn_in)
    n = y.size
    ybar = float(y.mean())
    sxx = float(np.sum((y - ybar) ** 2))
    mu, sigma2 = init if init is not None else (ybar, sxx / (n - 1))
    if not sigma2 > 0:
        raise ParameterError(f"initial sigma2 must be positive, got {sigma2}")

    rng = make_rng(seed)
    out = np.empty((iters - burn_in, 2))
    for t in range(iters):
        mu = rng.normal(ybar, math.sqrt(sigma2 / n))
        # sum((y - mu)^2) without touching the data again
        scale = (sxx + n * (ybar - mu) ** 2) / 2.0
        sigma2 = scale / rng.standard_gamma(n / 2.0)
        if t >= burn_in:
            out[t - burn_in] = (mu, sigma2)

    _LOGGER.debug("Gibbs normal: n=%d, iters=%d, burn_in=%d", n, iters, burn_in)
    draws = DrawMatrix(("mu", "sigma2"), out, burn_in, _seed_value(seed))
    return build_report(draws, max_lag=max_lag)


# Random-walk Metropolis


def _evaluate(target: LogTarget, theta: np.ndarray) -> float:
    value = float(target(theta))
    if math.isnan(value):
        raise NumericalError(f"log target returned NaN at {theta}")
    return value


def _random_walk(
    target: LogTarget,
    scale: np.ndarray,
    iters: int,
    burn_in: int,
    theta: np.ndarray,
    rng: RandomStream,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Run the chain; returns (kept states, acceptance rate, final state)."""
    current = _evaluate(target, theta)
    if not math.isfinite(current):
        raise DataError(f"initial point {theta} lies outside the target's support")
    steps = rng.standard_normal((iters, theta.size)) * scale
    with np.errstate(divide="ignore"):
        log_u = np.log(rng.random(iters))
    out = np.empty((iters - burn_in, theta.size))
    accepted = 0
    for t in range(iters):
        proposal = theta + steps[t]
        value = _evaluate(target, proposal)
        if log_u[t] < value - current:
            theta, current = proposal, value
            accepted += 1
        if t >= burn_in:
            out[t - burn_in] = theta
    return out, accepted / iters, theta


def _scale_vector(scale: float | Sequence[float], d: int) -> np.ndarray:
    vector = np.broadcast_to(np.asarray(scale, dtype=float), (d,)).copy()
    if np.any(vector <= 0) or not np.all(np.isfinite(vector)):
        raise ParameterError(f"proposal scales must be positive, got {vector}")
    return vector


def metropolis_rw(
    target: LogTarget,
    scale: float | Sequence[float],
    iters: int,
    burn_in: int | None = None,
    init: float | Sequence[float] = 0.0,
    seed: Seed | RandomStream = 0,
    names: Sequence[str] | None = None,
    max_lag: int = DEFAULT_MAX_LAG,
    tuning: Mapping[str, Any] | None = None,
) -> ChainReport:
    """Random-walk Metropolis with a fixed Gaussian proposal.

    Proposals are theta + scale * z with z standard normal; a proposal is
    accepted with probability min(1, exp(target(proposal) - target(theta))).

    Raises:
        DataError: If target(init) is -inf
        SettingsError: If iters <= burn_in
    """
    theta = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    d = theta.size
    burn_in = default_burn_in(iters) if burn_in is None else burn_in
    check_iterations(iters, burn_in)
    steps = _scale_vector(scale, d)
    names = tuple(names) if names is not None else tuple(f"theta_{i + 1}" for i in range(d))
    if len(names) != d:
        raise DataError(f"{len(names)} names given for a {d}-dimensional target")

    rng = make_rng(seed)
    out, rate, _ = _random_walk(target, steps, iters, burn_in, theta, rng)
    _LOGGER.debug("Metropolis: d=%d, iters=%d, acceptance %.3f", d, iters, rate)
    draws = DrawMatrix(names, out, burn_in, _seed_value(seed))
    return build_report(draws, acceptance_rate=rate, scale=steps, max_lag=max_lag, tuning=tuning)


def tune_scale(
    target: LogTarget,
    init: float | Sequence[float],
    scale: float | Sequence[float],
    seed: Seed | RandomStream,
    rounds: int = TUNE_ROUNDS,
    iters: int = TUNE_ITERATIONS,
) -> tuple[np.ndarray, dict[str, Any]]:
    """Pilot runs that rescale the proposal until acceptance is in [0.2, 0.5].

    Returns:
        Tuned scale vector and a tuning record (per-round scale and rate)
    """
    theta = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    steps = _scale_vector(scale, theta.size)
    rng = make_rng(seed)
    history = []
    for _ in range(rounds):
        _, rate, theta = _random_walk(target, steps, iters, 0, theta, rng)
        history.append({"scale": steps.tolist(), "acceptance": rate})
        if TUNE_TARGET_LOW <= rate <= TUNE_TARGET_HIGH:
            break
        steps = steps * (0.6 if rate < TUNE_TARGET_LOW else 1.8)
    _LOGGER.debug("Pilot tuning finished after %d rounds at %s", len(history), steps)
    return steps, {"rounds": history, "final_scale": steps.tolist()}


# Laplace approximation


@dataclass(frozen=True, eq=False)
class LaplaceResult:
    """Normal approximation centred at the posterior mode."""

    mode: np.ndarray
    covariance: np.ndarray
    log_target_at_mode: float

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def log_evidence(self) -> float:
        """Laplace estimate of the log normalising constant of the target."""
        d = self.mode.size
        _, logdet = np.linalg.slogdet(self.covariance)
        return self.log_target_at_mode + 0.5 * d * math.log(2 * math.pi) + 0.5 * logdet

    def sample(
        self, n: int, seed: Seed | RandomStream, names: Sequence[str] | None = None
    ) -> DrawMatrix:
        """Draw from the approximating normal."""
        rng = make_rng(seed)
        values = rng.multivariate_normal(self.mode, self.covariance, size=n, method="cholesky")
        names = names or tuple(f"theta_{i + 1}" for i in range(self.mode.size))
        return DrawMatrix(tuple(names), values, 0, _seed_value(seed))


def _finite_or_inf(target: LogTarget) -> Callable[[np.ndarray], float]:
    def objective(x: np.ndarray) -> float:
        value = float(target(np.atleast_1d(x)))
        return -value if math.isfinite(value) else math.inf

    return objective


def _hessian(target: LogTarget, x: np.ndarray) -> np.ndarray:
    """Central-difference Hessian with step max(1e-4, 1e-4 |x_i|)."""
    d = x.size
    h = np.maximum(HESSIAN_MIN_STEP, HESSIAN_RELATIVE_STEP * np.abs(x))
    f0 = float(target(x))
    hess = np.empty((d, d))

    def at(offsets: dict[int, float]) -> float:
        y = x.copy()
        for i, delta in offsets.items():
            y[i] += delta
        return float(target(y))

    for i in range(d):
        hess[i, i] = (at({i: h[i]}) - 2.0 * f0 + at({i: -h[i]})) / h[i] ** 2
        for j in range(i + 1, d):
            value = (
                at({i: h[i], j: h[j]})
                - at({i: h[i], j: -h[j]})
                - at({i: -h[i], j: h[j]})
                + at({i: -h[i], j: -h[j]})
            ) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = value
    if not np.all(np.isfinite(hess)):
        raise NumericalError(f"Hessian is not finite at {x}")
    return hess


def laplace_approx(target: LogTarget, init: float | Sequence[float]) -> LaplaceResult:
    """Locate the mode and invert the negative Hessian there.

    The mode is found by a Nelder-Mead simplex search refined by coordinate-wise
    golden-section sweeps until the objective improves by less than 1e-8.

    Raises:
        DataError: If init lies outside the support
        ConvergenceError: If the search does not converge
        NumericalError: If the Hessian is not negative definite
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    objective = _finite_or_inf(target)
    if not math.isfinite(objective(x0)):
        raise DataError(f"initial point {x0} lies outside the target's support")

    result = optimize.minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={
            "xatol": 1e-10,
            "fatol": 1e-12,
            "maxiter": LAPLACE_MAX_ITERATIONS,
            "maxfev": 2 * LAPLACE_MAX_ITERATIONS,
        },
    )
    if not result.success:
        raise ConvergenceError(
            f"mode search did not converge after {result.nit} iterations: {result.message}"
        )
    x = np.asarray(result.x, dtype=float).copy()
    best = float(result.fun)

    for sweep in range(LAPLACE_MAX_SWEEPS):
        previous = best
        for i in range(x.size):
            step = max(HESSIAN_MIN_STEP, HESSIAN_RELATIVE_STEP * abs(x[i]))

            def along(v: float, i: int = i) -> float:
                y = x.copy()
                y[i] = v
                return objective(y)

            try:
                line = optimize.minimize_scalar(
                    along, bracket=(x[i] - step, x[i] + step), method="golden"
                )
            except (RuntimeError, ValueError):
                continue
            if line.fun < best:
                x[i], best = float(line.x), float(line.fun)
        if previous - best < LAPLACE_TOLERANCE:
            break
    else:
        raise ConvergenceError(f"coordinate refinement did not settle in {LAPLACE_MAX_SWEEPS} sweeps")

    negative = -_hessian(target, x)
    negative = (negative + negative.T) / 2.0
    try:
        np.linalg.cholesky(negative)
    except np.linalg.LinAlgError as err:
        raise NumericalError(
            f"Hessian is not negative definite at mode {x}; eigenvalues "
            f"{np.linalg.eigvalsh(-negative)}"
        ) from err
    covariance = np.linalg.inv(negative)
    _LOGGER.debug("Laplace mode %s after %d sweeps", x, sweep + 1)
    return LaplaceResult(mode=x, covariance=covariance, log_target_at_mode=-best)
