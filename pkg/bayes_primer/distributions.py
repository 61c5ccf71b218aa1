"""Parametric distribution primitives shared by every inference module."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
import logging
import math
from typing import Any, Final

import numpy as np
from scipy import special, stats
import voluptuous as vol

from .const import MAX_SEED
from .errors import ParameterError

_LOGGER = logging.getLogger(__name__)

Seed = int
RandomStream = np.random.Generator


class Family(StrEnum):
    """Supported parametric families."""

    BETA = "beta"
    NORMAL = "normal"
    GAMMA = "gamma"
    INVERSE_GAMMA = "inverse_gamma"
    BINOMIAL = "binomial"
    UNIFORM = "uniform"
    STUDENT_T = "student_t"


def _finite(value: float) -> float:
    """Reject infinities and NaN."""
    if not math.isfinite(value):
        raise vol.Invalid("must be finite")
    return value


def _whole(value: Any) -> int:
    """Coerce to an int, rejecting fractional values."""
    number = float(value)
    if not number.is_integer():
        raise vol.Invalid("must be a whole number")
    return int(number)


_REAL = vol.All(vol.Coerce(float), _finite)
_POSITIVE = vol.All(_REAL, vol.Range(min=0, min_included=False))
_PROBABILITY = vol.All(_REAL, vol.Range(min=0, max=1))
_TRIALS = vol.All(_whole, vol.Range(min=0))


@dataclass(frozen=True)
class _FamilySpec:
    """How one family is validated, evaluated and frozen."""

    parameters: tuple[str, ...]
    validators: tuple[Any, ...]
    valid: Callable[..., bool]
    logpdf: Callable[..., float]
    frozen: Callable[..., Any]
    discrete: bool = False

    @cached_property
    def schema(self) -> vol.Schema:
        return vol.Schema(
            {vol.Required(name): check for name, check in zip(self.parameters, self.validators)}
        )


# Closed-form log densities for the sampler hot path.

_LOG_SQRT_2PI: Final = 0.5 * math.log(2.0 * math.pi)


def _beta_logpdf(x: float, a: float, b: float) -> float:
    if not 0.0 <= x <= 1.0:
        return -math.inf
    return float(special.xlogy(a - 1.0, x) + special.xlog1py(b - 1.0, -x) - special.betaln(a, b))


def _normal_logpdf(x: float, mean: float, sd: float) -> float:
    z = (x - mean) / sd
    return -0.5 * z * z - math.log(sd) - _LOG_SQRT_2PI


def _gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x < 0.0:
        return -math.inf
    return float(
        shape * math.log(rate) + special.xlogy(shape - 1.0, x) - rate * x - special.gammaln(shape)
    )


def _inverse_gamma_logpdf(x: float, shape: float, scale: float) -> float:
    if x <= 0.0:
        return -math.inf
    return float(
        shape * math.log(scale) - special.gammaln(shape) - (shape + 1.0) * math.log(x) - scale / x
    )


def _binomial_logpmf(x: float, n: float, p: float) -> float:
    if x < 0 or x > n or not float(x).is_integer():
        return -math.inf
    log_choose = special.gammaln(n + 1.0) - special.gammaln(x + 1.0) - special.gammaln(n - x + 1.0)
    return float(log_choose + special.xlogy(x, p) + special.xlog1py(n - x, -p))


def _uniform_logpdf(x: float, lo: float, hi: float) -> float:
    return -math.log(hi - lo) if lo <= x <= hi else -math.inf


_FAMILIES: dict[Family, _FamilySpec] = {
    Family.BETA: _FamilySpec(
        parameters=("a", "b"),
        validators=(_POSITIVE, _POSITIVE),
        valid=lambda a, b: a > 0 and b > 0,
        logpdf=_beta_logpdf,
        frozen=lambda a, b: stats.beta(a, b),
    ),
    Family.NORMAL: _FamilySpec(
        parameters=("mean", "sd"),
        validators=(_REAL, _POSITIVE),
        valid=lambda m, s: s > 0 and math.isfinite(m),
        logpdf=_normal_logpdf,
        frozen=lambda m, s: stats.norm(loc=m, scale=s),
    ),
    Family.GAMMA: _FamilySpec(
        parameters=("shape", "rate"),
        validators=(_POSITIVE, _POSITIVE),
        valid=lambda shape, rate: shape > 0 and rate > 0,
        logpdf=_gamma_logpdf,
        frozen=lambda shape, rate: stats.gamma(shape, scale=1.0 / rate),
    ),
    Family.INVERSE_GAMMA: _FamilySpec(
        parameters=("shape", "scale"),
        validators=(_POSITIVE, _POSITIVE),
        valid=lambda shape, scale: shape > 0 and scale > 0,
        logpdf=_inverse_gamma_logpdf,
        frozen=lambda shape, scale: stats.invgamma(shape, scale=scale),
    ),
    Family.BINOMIAL: _FamilySpec(
        parameters=("trials", "prob"),
        validators=(_TRIALS, _PROBABILITY),
        valid=lambda n, p: n >= 0 and float(n).is_integer() and 0.0 <= p <= 1.0,
        logpdf=_binomial_logpmf,
        frozen=lambda n, p: stats.binom(int(n), p),
        discrete=True,
    ),
    Family.UNIFORM: _FamilySpec(
        parameters=("lo", "hi"),
        validators=(_REAL, _REAL),
        valid=lambda lo, hi: lo < hi,
        logpdf=_uniform_logpdf,
        frozen=lambda lo, hi: stats.uniform(loc=lo, scale=hi - lo),
    ),
    Family.STUDENT_T: _FamilySpec(
        parameters=("df", "location", "scale"),
        validators=(_POSITIVE, _REAL, _POSITIVE),
        valid=lambda df, loc, scale: df > 0 and scale > 0 and math.isfinite(loc),
        logpdf=lambda x, df, loc, scale: stats.t.logpdf(x, df, loc, scale),
        frozen=lambda df, loc, scale: stats.t(df, loc=loc, scale=scale),
    ),
}


def make_rng(seed: Seed | RandomStream) -> RandomStream:
    """Return an explicitly seeded PCG64 stream.

    Args:
        seed: Unsigned 64-bit seed, or an existing generator to reuse

    Returns:
        A numpy Generator owned by the caller

    Raises:
        ParameterError: If the seed is not an unsigned 64-bit integer
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) <= MAX_SEED:
        raise ParameterError(f"seed must lie in [0, 2^64 - 1], got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def family_parameters(family: Family | str) -> tuple[str, ...]:
    """Return the parameter names of a family, in positional order."""
    return _FAMILIES[Family(family)].parameters


def is_discrete(family: Family | str) -> bool:
    """Return True for families with integer support."""
    return _FAMILIES[Family(family)].discrete


def log_pdf(family: Family, x: float, *params: float) -> float:
    """Evaluate a log density without building a Distribution.

    Invalid parameters and out-of-support points both give -inf, which lets
    samplers treat a proposal that breaks a parameter constraint as a
    zero-density state.
    """
    spec = _FAMILIES[family]
    try:
        if not spec.valid(*params):
            return -math.inf
    except TypeError:
        return -math.inf
    value = float(spec.logpdf(x, *params))
    return -math.inf if math.isnan(value) else value


@dataclass(frozen=True)
class Distribution:
    """Immutable tagged value of a parametric family."""

    family: Family
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate parameters against the family's domain."""
        try:
            family = Family(self.family)
        except ValueError as err:
            raise ParameterError(f"unknown family {self.family!r}") from err
        spec = _FAMILIES[family]
        if len(self.params) != len(spec.parameters):
            raise ParameterError(
                f"{family} takes {len(spec.parameters)} parameters "
                f"({', '.join(spec.parameters)}), got {len(self.params)}"
            )
        try:
            checked = spec.schema(dict(zip(spec.parameters, self.params)))
        except vol.Invalid as err:
            raise ParameterError(f"invalid {family} parameters: {err}") from err
        params = tuple(checked[name] for name in spec.parameters)
        if family is Family.UNIFORM and not params[0] < params[1]:
            raise ParameterError(f"uniform requires lo < hi, got {params}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)

    @classmethod
    def beta(cls, a: float, b: float) -> Distribution:
        return cls(Family.BETA, (a, b))

    @classmethod
    def normal(cls, mean: float, sd: float) -> Distribution:
        return cls(Family.NORMAL, (mean, sd))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> Distribution:
        return cls(Family.GAMMA, (shape, rate))

    @classmethod
    def inverse_gamma(cls, shape: float, scale: float) -> Distribution:
        return cls(Family.INVERSE_GAMMA, (shape, scale))

    @classmethod
    def binomial(cls, trials: int, prob: float) -> Distribution:
        return cls(Family.BINOMIAL, (trials, prob))

    @classmethod
    def uniform(cls, lo: float, hi: float) -> Distribution:
        return cls(Family.UNIFORM, (lo, hi))

    @classmethod
    def student_t(cls, df: float, location: float, scale: float) -> Distribution:
        return cls(Family.STUDENT_T, (df, location, scale))

    @property
    def parameters(self) -> dict[str, float]:
        """Named parameter values."""
        return dict(zip(_FAMILIES[self.family].parameters, self.params))

    def param(self, name: str) -> float:
        """Return one named parameter."""
        try:
            return self.parameters[name]
        except KeyError as err:
            raise ParameterError(f"{self.family} has no parameter {name!r}") from err

    @cached_property
    def _frozen(self) -> Any:
        return _FAMILIES[self.family].frozen(*self.params)

    @property
    def discrete(self) -> bool:
        return _FAMILIES[self.family].discrete

    @property
    def mean(self) -> float:
        return float(self._frozen.mean())

    @property
    def sd(self) -> float:
        return float(self._frozen.std())

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self._frozen.support()
        return float(lo), float(hi)

    def log_density(self, x: float) -> float:
        """Return log f(x), -inf outside the support."""
        return log_pdf(self.family, x, *self.params)

    def cdf(self, x: float) -> float:
        """Return P(X <= x)."""
        return float(self._frozen.cdf(x))

    def quantile(self, q: float) -> float:
        """Return the smallest x with cdf(x) >= q.

        Raises:
            ParameterError: If q is not strictly between 0 and 1
        """
        if not 0.0 < q < 1.0:
            raise ParameterError(f"quantile level must lie in (0, 1), got {q}")
        return float(self._frozen.ppf(q))

    def sample(self, n: int, seed: Seed | RandomStream) -> np.ndarray:
        """Draw n i.i.d. values from an explicit stream."""
        if n < 1:
            raise ParameterError(f"sample size must be at least 1, got {n}")
        rng = make_rng(seed)
        draws = np.asarray(self._frozen.rvs(size=n, random_state=rng), dtype=float)
        _LOGGER.debug("Drew %d values from %s", n, self)
        return draws

    def __str__(self) -> str:
        args = ", ".join(f"{k}={v:g}" for k, v in self.parameters.items())
        return f"{self.family.value}({args})"


def log_density(d: Distribution, x: float) -> float:
    """Return log f(x) for a distribution."""
    return d.log_density(x)


def cdf(d: Distribution, x: float) -> float:
    """Return P(X <= x) for a distribution."""
    return d.cdf(x)


def quantile(d: Distribution, q: float) -> float:
    """Return the q-quantile of a distribution."""
    return d.quantile(q)


def sample(d: Distribution, n: int, seed: Seed | RandomStream) -> np.ndarray:
    """Draw n values from a distribution with an explicit seed."""
    return d.sample(n, seed)
