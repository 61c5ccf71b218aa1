"""Bayes' rule on finite supports: one-parameter and two-proportion grids."""
from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import reduce
import logging
import math

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import logsumexp

from .const import (
    ERROR_IMPOSSIBLE_DATA,
    ERROR_NO_DIAGONAL,
    POINT_EQUALITY_TOLERANCE,
    PROB_SUM_TOLERANCE,
)
from .distributions import RandomStream, Seed, make_rng
from .errors import DataError, ImpossibleDataError, ParameterError

_LOGGER = logging.getLogger(__name__)

Point = tuple[float, ...]


@dataclass(frozen=True, eq=False)
class DiscreteTable:
    """Finite support points (1-D or 2-D) with probabilities."""

    points: tuple[Point, ...]
    probs: np.ndarray
    labels: tuple[str, ...] = ("p",)

    def __post_init__(self) -> None:
        points = tuple(tuple(float(c) for c in point) for point in self.points)
        probs = np.asarray(self.probs, dtype=float).copy()
        probs.setflags(write=False)
        if not points:
            raise DataError("a discrete table needs at least one support point")
        dims = {len(point) for point in points}
        if len(dims) != 1 or dims.pop() not in (1, 2):
            raise DataError("support points must all be 1- or 2-tuples")
        if len(self.labels) != len(points[0]):
            raise DataError(
                f"{len(self.labels)} labels given for {len(points[0])}-D points"
            )
        if probs.shape != (len(points),):
            raise DataError(f"{probs.size} probabilities given for {len(points)} points")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise DataError("probabilities must be finite and nonnegative")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOLERANCE:
            raise DataError(f"probabilities sum to {probs.sum():.12g}, not 1")
        if len(set(points)) != len(points):
            raise DataError("support points must be distinct")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_weights(
        cls,
        points: Iterable[float | Sequence[float]],
        weights: Iterable[float],
        labels: Sequence[str] | None = None,
    ) -> DiscreteTable:
        """Build a table by normalising nonnegative weights."""
        pts = tuple(_as_point(p) for p in points)
        w = np.asarray(list(weights), dtype=float)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("weights must be finite and nonnegative")
        total = w.sum()
        if total <= 0:
            raise DataError("weights must not all be zero")
        if labels is None:
            labels = ("p",) if len(pts[0]) == 1 else ("p1", "p2")
        return cls(pts, w / total, tuple(labels))

    @classmethod
    def uniform(
        cls, points: Iterable[float | Sequence[float]], labels: Sequence[str] | None = None
    ) -> DiscreteTable:
        """Equal probability on every point."""
        pts = tuple(_as_point(p) for p in points)
        return cls.from_weights(pts, np.ones(len(pts)), labels)

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def coordinates(self) -> np.ndarray:
        """Return the support as an (m, dim) array."""
        return np.array(self.points, dtype=float)

    def prob_of(self, point: float | Sequence[float]) -> float:
        """Probability attached to a support point (0 when absent)."""
        target = _as_point(point)
        for pt, prob in zip(self.points, self.probs):
            if all(
                math.isclose(a, b, abs_tol=POINT_EQUALITY_TOLERANCE)
                for a, b in zip(pt, target)
            ):
                return float(prob)
        return 0.0

    def allclose(self, other: DiscreteTable, atol: float = 1e-12) -> bool:
        """Same support and probabilities within atol."""
        return (
            self.points == other.points
            and self.labels == other.labels
            and bool(np.allclose(self.probs, other.probs, rtol=0.0, atol=atol))
        )


def _as_point(value: float | Sequence[float]) -> Point:
    if isinstance(value, (int, float, np.floating, np.integer)):
        return (float(value),)
    return tuple(float(v) for v in value)


class LikelihoodSpec(ABC):
    """Likelihood of observed data evaluated at each support point."""

    @abstractmethod
    def log_values(self, table: DiscreteTable) -> np.ndarray:
        """Log likelihood at every support point of the table."""


@dataclass(frozen=True)
class BinomialLikelihood(LikelihoodSpec):
    """y successes in n trials; the first coordinate is the success probability."""

    y: int
    n: int

    def __post_init__(self) -> None:
        if self.n < 0 or not 0 <= self.y <= self.n:
            raise DataError(f"binomial data needs 0 <= y <= n, got y={self.y}, n={self.n}")

    def log_values(self, table: DiscreteTable) -> np.ndarray:
        p = table.coordinates()[:, 0]
        if np.any((p < 0) | (p > 1)):
            raise DataError("binomial likelihood needs support points in [0, 1]")
        return stats.binom.logpmf(self.y, self.n, p)


@dataclass(frozen=True)
class NormalLikelihood(LikelihoodSpec):
    """Sample mean ybar of n observations with known sampling sd sigma."""

    ybar: float
    n: int
    sigma: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DataError(f"normal data needs n >= 1, got {self.n}")
        if not self.sigma > 0:
            raise DataError(f"sampling sd must be positive, got {self.sigma}")

    def log_values(self, table: DiscreteTable) -> np.ndarray:
        mu = table.coordinates()[:, 0]
        return stats.norm.logpdf(self.ybar, mu, self.sigma / math.sqrt(self.n))


@dataclass(frozen=True)
class TableLikelihood(LikelihoodSpec):
    """Explicit likelihood value per support point, in support order."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise DataError("likelihood table values must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    def log_values(self, table: DiscreteTable) -> np.ndarray:
        if len(self.values) != len(table.points):
            raise DataError(
                f"likelihood table has {len(self.values)} values for "
                f"{len(table.points)} support points"
            )
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(self.values))


@dataclass(frozen=True)
class TwoBinomialLikelihood(LikelihoodSpec):
    """Independent binomial samples on the two coordinates of a 2-D grid."""

    y1: int
    n1: int
    y2: int
    n2: int

    def __post_init__(self) -> None:
        BinomialLikelihood(self.y1, self.n1)
        BinomialLikelihood(self.y2, self.n2)

    def log_values(self, table: DiscreteTable) -> np.ndarray:
        if table.dim != 2:
            raise DataError("two-proportion data needs a 2-D prior over (p1, p2)")
        grid = table.coordinates()
        return stats.binom.logpmf(self.y1, self.n1, grid[:, 0]) + stats.binom.logpmf(
            self.y2, self.n2, grid[:, 1]
        )


def _log_products(prior: DiscreteTable, like: LikelihoodSpec) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior.probs)
    log_like = np.asarray(like.log_values(prior), dtype=float)
    if np.any(np.isnan(log_like)):
        raise DataError("likelihood is not evaluable at every support point")
    products = log_prior + log_like
    if not np.any(np.isfinite(products)):
        raise ImpossibleDataError(ERROR_IMPOSSIBLE_DATA)
    return products


def log_evidence(prior: DiscreteTable, like: LikelihoodSpec) -> float:
    """Log of the normalising constant sum_k prior[k] * L(point_k)."""
    return float(logsumexp(_log_products(prior, like)))


def bayes_update(prior: DiscreteTable, like: LikelihoodSpec) -> DiscreteTable:
    """Posterior over the prior's support.

    Products are formed in log space and normalised after subtracting the
    largest log product.

    Raises:
        ImpossibleDataError: If every product is zero
    """
    products = _log_products(prior, like)
    weights = np.exp(products - products.max())
    posterior = weights / weights.sum()
    _LOGGER.debug("Updated %d-point table with %s", len(prior.points), like)
    return DiscreteTable(prior.points, posterior, prior.labels)


def sequential_update(
    prior: DiscreteTable, observations: Iterable[LikelihoodSpec]
) -> DiscreteTable:
    """Fold bayes_update over observations in order."""
    return reduce(bayes_update, observations, prior)


def spinner_likelihoods(
    areas: Sequence[Mapping[Hashable, float]], outcomes: Iterable[Hashable]
) -> list[TableLikelihood]:
    """Table likelihoods for a sequence of spins.

    Args:
        areas: One mapping per candidate spinner (support point, in table order)
            from region label to region area; areas are normalised per spinner
        outcomes: Observed region labels, one per spin

    Returns:
        One TableLikelihood per spin
    """
    probs = []
    for spinner in areas:
        total = float(sum(spinner.values()))
        if total <= 0:
            raise DataError("every spinner needs positive total area")
        probs.append({region: area / total for region, area in spinner.items()})
    return [
        TableLikelihood(tuple(spinner.get(outcome, 0.0) for spinner in probs))
        for outcome in outcomes
    ]


def make_grid_prior(
    p1_values: Sequence[float], p2_values: Sequence[float], diagonal_mass: float = 0.0
) -> DiscreteTable:
    """Product grid over (p1, p2) with optional extra mass on p1 = p2.

    With diagonal_mass = 0 the grid is uniform. Otherwise the diagonal points
    share diagonal_mass equally and the off-diagonal points share the rest.
    A grid with only diagonal points keeps all of its mass there, uniformly,
    and a warning is logged.

    Raises:
        DataError: On malformed value vectors, or when diagonal mass is
            requested but no grid point has p1 = p2
    """
    for name, values in (("p1", p1_values), ("p2", p2_values)):
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            raise DataError(f"{name} values must not be empty")
        if np.any((arr < 0) | (arr > 1)):
            raise DataError(f"{name} values must lie in [0, 1]")
        if np.any(np.diff(arr) <= 0):
            raise DataError(f"{name} values must be strictly increasing")
    if not 0.0 <= diagonal_mass < 1.0:
        raise ParameterError(f"diagonal mass must lie in [0, 1), got {diagonal_mass}")

    points = [(float(a), float(b)) for a in p1_values for b in p2_values]
    on_diagonal = np.array(
        [math.isclose(a, b, abs_tol=POINT_EQUALITY_TOLERANCE) for a, b in points]
    )
    n_diag = int(on_diagonal.sum())
    n_off = len(points) - n_diag

    if diagonal_mass == 0.0:
        probs = np.full(len(points), 1.0 / len(points))
    elif n_diag == 0:
        raise DataError(ERROR_NO_DIAGONAL)
    elif n_off == 0:
        _LOGGER.warning(
            "Every grid point has p1 = p2; diagonal mass %s ignored, grid left uniform",
            diagonal_mass,
        )
        probs = np.full(len(points), 1.0 / len(points))
    else:
        probs = np.where(on_diagonal, diagonal_mass / n_diag, (1.0 - diagonal_mass) / n_off)
    _LOGGER.debug(
        "Built %dx%d grid prior with diagonal mass %s",
        len(p1_values),
        len(p2_values),
        diagonal_mass,
    )
    return DiscreteTable(tuple(points), probs, ("p1", "p2"))


def two_proportion_update(
    prior: DiscreteTable, data: tuple[int, int, int, int]
) -> DiscreteTable:
    """Grid posterior for two proportions given (y1, n1, y2, n2)."""
    return bayes_update(prior, TwoBinomialLikelihood(*data))


def table_event_prob(t: DiscreteTable, predicate: Callable[..., bool]) -> float:
    """Sum of probabilities over points where predicate(*point) holds."""
    return float(sum(prob for point, prob in zip(t.points, t.probs) if predicate(*point)))


def prob_first_smaller(t: DiscreteTable) -> float:
    """P(p1 < p2); ties are excluded."""
    return table_event_prob(
        t, lambda a, b: a < b and not math.isclose(a, b, abs_tol=POINT_EQUALITY_TOLERANCE)
    )


def prob_equal(t: DiscreteTable) -> float:
    """P(p1 = p2)."""
    return table_event_prob(
        t, lambda a, b: math.isclose(a, b, abs_tol=POINT_EQUALITY_TOLERANCE)
    )


def table_marginal(t: DiscreteTable, axis: int) -> DiscreteTable:
    """Marginal table of one coordinate of a 2-D table."""
    if not 0 <= axis < t.dim:
        raise DataError(f"axis {axis} out of range for a {t.dim}-D table")
    totals: dict[float, float] = {}
    for point, prob in zip(t.points, t.probs):
        totals[point[axis]] = totals.get(point[axis], 0.0) + float(prob)
    values = sorted(totals)
    return DiscreteTable.from_weights(values, [totals[v] for v in values], (t.labels[axis],))


def table_mean(t: DiscreteTable) -> tuple[float, ...]:
    """Mean of each coordinate."""
    return tuple(float(v) for v in t.probs @ t.coordinates())


def table_interval(t: DiscreteTable, level: float) -> tuple[float, float]:
    """Equal-tail interval of a 1-D table (e.g. level 0.5 for a 50% interval)."""
    if t.dim != 1:
        raise DataError("intervals are defined for 1-D tables only")
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level}")
    order = np.argsort(t.coordinates()[:, 0])
    values = t.coordinates()[order, 0]
    cumulative = np.cumsum(t.probs[order])
    tail = (1.0 - level) / 2.0
    # small slack so a cumulative sum equal to the tail in exact arithmetic counts
    lower = values[np.searchsorted(cumulative, tail - 1e-12, side="left")]
    upper_index = min(np.searchsorted(cumulative, 1.0 - tail - 1e-12, side="left"), len(values) - 1)
    return float(lower), float(values[upper_index])


def sample_table(t: DiscreteTable, n: int, seed: Seed | RandomStream) -> list[Point]:
    """Draw n support points with replacement."""
    if n < 1:
        raise ParameterError(f"sample size must be at least 1, got {n}")
    rng = make_rng(seed)
    picks = rng.choice(len(t.points), size=n, p=t.probs)
    return [t.points[i] for i in picks]


def table_to_frame(t: DiscreteTable) -> pd.DataFrame:
    """Tidy frame with columns point_1[, point_2], prob."""
    columns = {f"point_{i + 1}": t.coordinates()[:, i] for i in range(t.dim)}
    columns["prob"] = t.probs
    return pd.DataFrame(columns)


def table_from_frame(
    frame: pd.DataFrame, labels: Sequence[str] | None = None
) -> DiscreteTable:
    """Inverse of table_to_frame; probabilities are renormalised."""
    if "prob" not in frame.columns or "point_1" not in frame.columns:
        raise DataError("a table needs columns point_1[,point_2],prob")
    point_columns = ["point_1"] + (["point_2"] if "point_2" in frame.columns else [])
    points = [tuple(row) for row in frame[point_columns].to_numpy(dtype=float)]
    return DiscreteTable.from_weights(points, frame["prob"].to_numpy(dtype=float), labels)


@dataclass(frozen=True)
class GridSummary:
    """Headline summaries of a two-proportion grid posterior."""

    mean_p1: float
    mean_p2: float
    prob_p1_smaller: float
    prob_equal: float
    mode: Point


def summarize_grid(t: DiscreteTable) -> GridSummary:
    """Marginal means, P(p1 < p2), P(p1 = p2) and the joint mode."""
    mean_p1, mean_p2 = table_mean(t)
    return GridSummary(
        mean_p1=mean_p1,
        mean_p2=mean_p2,
        prob_p1_smaller=prob_first_smaller(t),
        prob_equal=prob_equal(t),
        mode=t.points[int(np.argmax(t.probs))],
    )
