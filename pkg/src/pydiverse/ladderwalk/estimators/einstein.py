"""Assembly of the Einstein relation report.

The report compares ``v(lam) / lam`` on a descending grid of biases with the
diffusivity ``sigma**2``. This module only combines finished estimates; the
simulations that produce them live in :py:mod:`pydiverse.ladderwalk.core.experiment`.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Any

import attrs
import numpy as np
import pandas as pd
import structlog
from attrs import frozen

from pydiverse.ladderwalk.errors import ParameterError
from pydiverse.ladderwalk.estimators.results import (
    EstimateCI,
    SigmaMatrix,
    ci_overlap,
)

logger = structlog.get_logger(logger_name=__name__)

SCHEMA_VERSION = 1
DEFAULT_RATIO_BOUND = 10.0
# directions in which v(lam) / lam may approach sigma**2 as the bias vanishes
ACCEPTED_TRENDS = ("decreasing_in_lambda", "flat")


@frozen
class LambdaRow:
    """Speed estimates at one bias.

    ``ratio`` is ``direct / lam``; the Girsanov estimate already is a ratio.
    ``n_steps`` is the path length of the direct and regeneration estimates;
    the Girsanov estimate comes from paths of ``girsanov_steps`` steps.
    """

    lam: float
    n_steps: int
    direct: EstimateCI
    regen: EstimateCI | None = None
    girsanov: EstimateCI | None = None
    alpha: float = attrs.field(default=None)
    girsanov_steps: int | None = None

    def __attrs_post_init__(self):
        if not self.lam > 0:
            raise ParameterError(f"the bias must be positive, got {self.lam}")
        if self.alpha is None:
            n = self.n_steps if self.girsanov_steps is None else self.girsanov_steps
            object.__setattr__(self, "alpha", self.lam**2 * n)

    @property
    def ratio(self) -> EstimateCI:
        return self.direct.scaled(1 / self.lam, method="ratio")

    def cross_consistent(self) -> bool:
        """Pairwise interval overlap of the speed estimators at this bias."""
        speeds = [self.direct]
        if self.regen is not None:
            speeds.append(self.regen)
        if self.girsanov is not None:
            speeds.append(self.girsanov.scaled(self.lam))
        return all(
            ci_overlap(a, b) for i, a in enumerate(speeds) for b in speeds[i + 1 :]
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "lam": self.lam,
            "n_steps": self.n_steps,
            "alpha": self.alpha,
            "girsanov_steps": self.girsanov_steps,
            "direct": self.direct.to_dict(),
            "regen": None if self.regen is None else self.regen.to_dict(),
            "girsanov": None if self.girsanov is None else self.girsanov.to_dict(),
            "ratio": self.ratio.to_dict(),
            "cross_consistent": self.cross_consistent(),
        }


@frozen
class Verdict:
    monotone: bool
    trend: str
    bounded: bool
    overlap: bool
    overlap_s11: bool | None

    @property
    def positive(self) -> bool:
        return (
            self.monotone
            and self.trend in ACCEPTED_TRENDS
            and self.bounded
            and self.overlap
        )

    def to_dict(self) -> dict[str, Any]:
        return {**attrs.asdict(self), "positive": self.positive}


def _trend(ratios: Sequence[EstimateCI]) -> tuple[bool, str]:
    """Whether the ratios, ordered by descending bias, are monotone in the bias.

    Steps against the direction of up to two combined standard errors are
    tolerated.
    """
    if len(ratios) < 2:
        return True, "flat"
    steps = [
        (b.value - a.value, 2 * np.hypot(a.se, b.se))
        for a, b in zip(ratios, ratios[1:])
    ]
    increasing = all(d >= -slack for d, slack in steps)
    decreasing = all(d <= slack for d, slack in steps)
    if increasing and decreasing:
        return True, "flat"
    if increasing:
        return True, "decreasing_in_lambda"
    if decreasing:
        return True, "increasing_in_lambda"
    return False, "mixed"


@frozen
class EinsteinReport:
    rows: list[LambdaRow]
    sigma_path: EstimateCI
    sigma_matrix: SigmaMatrix | None
    verdict: Verdict
    second_order: EstimateCI | None = None
    config: dict[str, Any] = attrs.field(factory=dict)
    provenance: dict[str, Any] = attrs.field(factory=dict)
    alpha_sweep: list[dict[str, Any]] = attrs.field(factory=list)

    def to_dict(self) -> dict[str, Any]:
        sigma = {"path_variance": self.sigma_path.to_dict()}
        if self.sigma_matrix is not None:
            sigma["psi_moments"] = self.sigma_matrix.to_dict()
        return {
            "schema_version": SCHEMA_VERSION,
            "provenance": self.provenance,
            "config": self.config,
            "per_lambda": [row.to_dict() for row in self.rows],
            "sigma": sigma,
            "verdict": self.verdict.to_dict(),
            "second_order": (
                None if self.second_order is None else self.second_order.to_dict()
            ),
            "alpha_sweep": self.alpha_sweep,
        }

    def to_frame(self) -> pd.DataFrame:
        """Flat ``lam, estimator, n_steps, value, se`` table; sigma rows have no
        bias and no step count."""
        records = []
        for row in self.rows:
            for name in ("direct", "regen", "girsanov"):
                est = getattr(row, name)
                if est is None:
                    continue
                n = row.n_steps
                if name == "girsanov" and row.girsanov_steps is not None:
                    n = row.girsanov_steps
                records.append((row.lam, name, n, est.value, est.se))
            ratio = row.ratio
            records.append((row.lam, "ratio", row.n_steps, ratio.value, ratio.se))
        path = self.sigma_path
        records.append((np.nan, "sigma_path_variance", np.nan, path.value, path.se))
        if self.sigma_matrix is not None:
            m = self.sigma_matrix
            records.append((np.nan, "sigma_s11", np.nan, m.s11, m.se11))
            records.append((np.nan, "sigma_s12", np.nan, m.s12, m.se12))
            records.append((np.nan, "sigma_s22", np.nan, m.s22, m.se22))
        if self.second_order is not None:
            so = self.second_order
            records.append((np.nan, "second_order", np.nan, so.value, so.se))
        return pd.DataFrame(
            records, columns=["lam", "estimator", "n_steps", "value", "se"]
        )


def einstein_report(
    rows: Sequence[LambdaRow],
    sigma_path: EstimateCI,
    sigma_matrix: SigmaMatrix | None = None,
    *,
    config: dict[str, Any] | None = None,
    provenance: dict[str, Any] | None = None,
    alpha_sweep: Sequence[LambdaRow] = (),
    second_order: EstimateCI | None = None,
    ratio_bound: float = DEFAULT_RATIO_BOUND,
) -> EinsteinReport:
    """Combine per bias speeds and the diffusivity into a report with a verdict.

    :param rows: One row per bias; they are sorted by descending bias.
    :param alpha_sweep: Rows at the smallest bias for other values of
        ``lam**2 n``.
    :param ratio_bound: ``v(lam) / lam`` counts as bounded when every upper
        interval end stays below ``ratio_bound * sigma**2``.
    """
    if not rows:
        raise ParameterError("the report needs at least one bias")
    rows = sorted(rows, key=lambda r: -r.lam)
    ratios = [r.ratio for r in rows]
    monotone, trend = _trend(ratios)
    bounded = all(
        np.isfinite(r.value) and r.ci[1] <= ratio_bound * sigma_path.value
        for r in ratios
    )
    smallest = ratios[-1]
    overlap_s11 = None
    if sigma_matrix is not None:
        overlap_s11 = ci_overlap(smallest, sigma_matrix.estimate("s11"))
    verdict = Verdict(
        monotone=monotone,
        trend=trend,
        bounded=bounded,
        overlap=ci_overlap(smallest, sigma_path),
        overlap_s11=overlap_s11,
    )
    sweep = [
        {
            "alpha": row.alpha,
            "lam": row.lam,
            "n_steps": row.n_steps,
            "ratio": row.ratio.value,
            "se": row.ratio.se,
            "girsanov": None if row.girsanov is None else row.girsanov.value,
            "girsanov_se": None if row.girsanov is None else row.girsanov.se,
        }
        for row in sorted(alpha_sweep, key=lambda r: r.alpha)
    ]
    logger.info(
        "Einstein relation",
        report={
            "ratios": {r.lam: round(r.ratio.value, 5) for r in rows},
            "sigma2": round(sigma_path.value, 5),
        },
        verdict=verdict.to_dict(),
    )
    return EinsteinReport(
        list(rows),
        sigma_path,
        sigma_matrix,
        verdict,
        second_order,
        dict(config or {}),
        dict(provenance or {}),
        sweep,
    )
