"""Shared result containers for tests and confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Alternative(Enum):
    """Direction of the alternative hypothesis."""

    GREATER = "greater"
    LESS = "less"
    TWO_SIDED = "two-sided"

    @classmethod
    def coerce(cls, value) -> "Alternative":
        if isinstance(value, cls):
            return value
        name = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == name:
                return member
        raise ValueError(f"unknown alternative {value!r}; use greater, less or two-sided")


@dataclass(frozen=True)
class TestOutcome:
    """A p-value with its Monte Carlo precision, if any.

    ``mc_std_error`` is the standard error of the underlying tail proportion
    (zero for closed-form tests), and ``statistic`` carries the test statistic
    when the method has one (Wald z, likelihood ratio).
    """

    __test__ = False  # not a pytest class, despite the name

    p_value: float
    mc_std_error: float
    reps_used: int
    method: str
    statistic: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")
        if self.mc_std_error < 0.0:
            raise ValueError("mc_std_error must be nonnegative")
        if self.reps_used < 0:
            raise ValueError("reps_used must be nonnegative")


@dataclass(frozen=True)
class IntervalOutcome:
    """A two-sided confidence interval on both parameter scales.

    ``lower``/``upper`` bound the log-scale parameter mu; ``phi_lower``/
    ``phi_upper`` bound exp(mu) on the original scale.  One pair is native to
    the method and the other is derived from it, so methods whose original
    scale bound can be nonpositive (Wald-type) get ``lower = -inf``.
    """

    lower: float
    upper: float
    level: float
    phi_lower: float
    phi_upper: float
    method: str = ""
    estimate: float | None = None

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must be in (0, 1)")
        if not self.lower < self.upper:
            raise ValueError(f"empty interval: [{self.lower}, {self.upper}]")
        if not self.phi_lower < self.phi_upper:
            raise ValueError("empty interval on the original scale")

    @property
    def width(self) -> float:
        return self.phi_upper - self.phi_lower


def interval_from_log(lower: float, upper: float, level: float, method: str = "",
                      estimate: float | None = None) -> IntervalOutcome:
    """Interval whose native scale is the log scale; exponentiates exactly."""
    return IntervalOutcome(
        lower=float(lower),
        upper=float(upper),
        level=float(level),
        phi_lower=math.exp(lower),
        phi_upper=math.exp(upper),
        method=method,
        estimate=estimate,
    )


def interval_from_phi(phi_lower: float, phi_upper: float, level: float, method: str = "",
                      estimate: float | None = None) -> IntervalOutcome:
    """Interval whose native scale is the original scale of exp(mu)."""
    return IntervalOutcome(
        lower=math.log(phi_lower) if phi_lower > 0.0 else -math.inf,
        upper=math.log(phi_upper) if phi_upper > 0.0 else -math.inf,
        level=float(level),
        phi_lower=float(phi_lower),
        phi_upper=float(phi_upper),
        method=method,
        estimate=estimate,
    )
