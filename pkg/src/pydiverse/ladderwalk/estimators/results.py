from __future__ import annotations

import math
from typing import Any

import attrs
from attrs import frozen

from pydiverse.ladderwalk.util.stats import normal_quantile

METHODS = (
    "direct",
    "regen",
    "girsanov",
    "psi-moment",
    "path-variance",
    "ratio",
    "first-regen",
    "second-order",
    "synthetic",
)


def _check_se(_instance, attribute, value):
    if value < 0:
        raise ValueError(f"{attribute.name} must be nonnegative, got {value}")


@frozen
class EstimateCI:
    """A Monte Carlo estimate with a normal theory confidence interval.

    :param n_eff: Effective number of independent contributions (replicas,
        batches or environments).
    :param diagnostics: Side quantities reported with the estimate.
    :param warnings: Human readable caveats, e.g. weight degeneracy.
    """

    value: float
    se: float = attrs.field(validator=_check_se)
    n_eff: float = attrs.field(validator=attrs.validators.ge(1))
    method: str = attrs.field(validator=attrs.validators.in_(METHODS))
    confidence: float = 0.95
    diagnostics: dict[str, Any] = attrs.field(factory=dict)
    warnings: tuple[str, ...] = attrs.field(default=(), converter=tuple)

    @property
    def half_width(self) -> float:
        return normal_quantile(self.confidence) * self.se

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - self.half_width, self.value + self.half_width

    def contains(self, value: float) -> bool:
        lo, hi = self.ci
        return lo <= value <= hi

    def overlaps(self, other: EstimateCI) -> bool:
        return ci_overlap(self, other)

    def scaled(self, factor: float, method: str | None = None) -> EstimateCI:
        """The estimate of ``factor * value``."""
        return attrs.evolve(
            self,
            value=self.value * factor,
            se=self.se * abs(factor),
            method=method or self.method,
        )

    def to_dict(self) -> dict[str, Any]:
        lo, hi = self.ci
        return {
            "value": self.value,
            "se": self.se,
            "ci_low": lo,
            "ci_high": hi,
            "n_eff": self.n_eff,
            "method": self.method,
            "confidence": self.confidence,
            "diagnostics": dict(self.diagnostics),
            "warnings": list(self.warnings),
        }


def ci_overlap(a: EstimateCI, b: EstimateCI) -> bool:
    a_lo, a_hi = a.ci
    b_lo, b_hi = b.ci
    return a_lo <= b_hi and b_lo <= a_hi


@frozen
class SigmaMatrix:
    """Covariance of ``(psi(Y_1), nu(0, Y_1))`` under the environment law.

    Standard errors include the propagated uncertainty of ``kappa``.
    """

    s11: float
    s12: float
    s22: float
    se11: float = attrs.field(validator=_check_se)
    se12: float = attrs.field(validator=_check_se)
    se22: float = attrs.field(validator=_check_se)
    n_environments: int
    skipped: int = 0
    confidence: float = 0.95

    def estimate(self, which: str) -> EstimateCI:
        value, se = {
            "s11": (self.s11, self.se11),
            "s12": (self.s12, self.se12),
            "s22": (self.s22, self.se22),
        }[which]
        return EstimateCI(
            value, se, max(1, self.n_environments), "psi-moment", self.confidence,
            {"entry": which},
        )

    def cauchy_schwarz_slack(self) -> float:
        """``|s12| - sqrt(s11 s22)``; at most ``3 * (se11 + se12 + se22)`` when
        consistent."""
        return abs(self.s12) - math.sqrt(max(self.s11, 0.0) * max(self.s22, 0.0))

    def cauchy_schwarz_ok(self) -> bool:
        return self.cauchy_schwarz_slack() <= 3 * (self.se11 + self.se12 + self.se22)

    def to_dict(self) -> dict[str, Any]:
        return {
            "s11": self.s11,
            "s12": self.s12,
            "s22": self.s22,
            "se11": self.se11,
            "se12": self.se12,
            "se22": self.se22,
            "n_environments": self.n_environments,
            "skipped": self.skipped,
        }
