from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import structlog
from attrs import frozen
from scipy import stats

from pydiverse.ladderwalk.corrector.potentials import PotentialTable
from pydiverse.ladderwalk.errors import InsufficientDataError
from pydiverse.ladderwalk.util.stats import mean_se

logger = structlog.get_logger(logger_name=__name__)

DEFAULT_DELTAS = (0.05, 0.1)


@frozen
class GrowthDiagnostic:
    """Sublinearity report of the corrector.

    ``slope`` is the fitted exponent of the root mean square ``|chi|`` at the
    ``n``-th pre-regeneration point right of the origin; ``passes[delta]`` tells
    whether it stays below ``1/2 + delta`` (up to the fit's standard error).
    """

    slope: float
    slope_se: float
    passes: dict[float, bool]
    mean_chi: float
    mean_chi_se: float
    n_environments: int
    trajectory_slope: float | None = None


def _rms_profile(tables: Sequence[PotentialTable]) -> tuple[np.ndarray, np.ndarray]:
    profiles = []
    for table in tables:
        right = [x for x in table.prereg_xs if x > 0]
        profiles.append([table.chi_at((x, 0)) for x in right])
    depth = min(len(p) for p in profiles)
    chi = np.array([p[:depth] for p in profiles], dtype=float)
    return np.arange(1, depth + 1), chi


def _log_log_slope(n: np.ndarray, rms: np.ndarray) -> tuple[float, float]:
    keep = rms > 0
    if keep.sum() < 3:
        # chi vanishes identically, e.g. on a straight line with kappa = 1
        return 0.0, 0.0
    fit = stats.linregress(np.log(n[keep]), np.log(rms[keep]))
    return float(fit.slope), float(fit.stderr)


def corrector_growth_diagnostic(
    tables: Sequence[PotentialTable],
    trajectories: Sequence | None = None,
    deltas: Sequence[float] = DEFAULT_DELTAS,
) -> GrowthDiagnostic:
    """Growth exponent of ``chi`` along pre-regeneration points, and optionally
    along walk paths.

    :param trajectories: Trajectories whose environment is the one of the table
        at the same position.
    """
    if not tables:
        raise InsufficientDataError("no potential tables given")
    n, chi = _rms_profile(tables)
    if len(n) < 3:
        raise InsufficientDataError(
            "need at least 3 pre-regeneration points right of the origin"
        )
    rms = np.sqrt(np.mean(chi**2, axis=0))
    slope, slope_se = _log_log_slope(n, rms)
    flat = chi.reshape(-1)
    if flat.size >= 2:
        mean_chi, mean_chi_se = mean_se(flat)
    else:
        mean_chi, mean_chi_se = float(flat[0]), math.nan

    trajectory_slope = None
    if trajectories:
        trajectory_slope = _trajectory_slope(tables, trajectories)

    passes = {d: slope <= 0.5 + d + 2 * slope_se for d in deltas}
    logger.info(
        "Corrector growth",
        slope=slope,
        slope_se=slope_se,
        passes=passes,
        n_environments=len(tables),
    )
    return GrowthDiagnostic(
        slope, slope_se, passes, mean_chi, mean_chi_se, len(tables), trajectory_slope
    )


def _trajectory_slope(tables, trajectories) -> float:
    n_steps = min(t.n_steps for t in trajectories)
    ks = np.unique(np.geomspace(1, n_steps, num=20).astype(int))
    values = []
    for table, traj in zip(tables, trajectories):
        rows = [table.chi_at(tuple(traj.positions[k])) for k in ks]
        values.append(rows)
    chi = np.array(values, dtype=float)
    with np.errstate(invalid="ignore"):
        rms = np.sqrt(np.nanmean(chi**2, axis=0))
    ok = np.isfinite(rms)
    slope, _ = _log_log_slope(ks[ok].astype(float), rms[ok])
    return slope
