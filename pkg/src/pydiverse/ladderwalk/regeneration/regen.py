from __future__ import annotations

import math
from collections.abc import Sequence
from pathlib import Path

import attrs
import numpy as np
import pandas as pd
import structlog
from attrs import frozen

from pydiverse.ladderwalk.errors import (
    InsufficientDataError,
    ParameterError,
    PreconditionError,
)
from pydiverse.ladderwalk.estimators.results import EstimateCI
from pydiverse.ladderwalk.percolation.cluster import find_preregeneration_points
from pydiverse.ladderwalk.percolation.window import WindowConfig
from pydiverse.ladderwalk.util.stats import batch_sums, log_survival_fit, mean_se
from pydiverse.ladderwalk.walk.trajectory import Trajectory

logger = structlog.get_logger(logger_name=__name__)

MIN_REGEN_GAPS = 30
MIN_TAIL_GAPS = 1000


def _spacing(lam: float) -> int:
    if not lam > 0:
        raise ParameterError(f"lambda points need a positive bias, got {lam}")
    return max(1, math.floor(1 / lam))


def lambda_prereg_points(env: WindowConfig, lam: float) -> list[int]:
    """Every ``floor(1 / lam)``-th pre-regeneration point of `env`.

    Counting starts at the first pre-regeneration point with ``x >= 0`` and
    extends in both directions.
    """
    step = _spacing(lam)
    points = find_preregeneration_points(env)
    anchor = next((i for i, x in enumerate(points) if x >= 0), None)
    if anchor is None:
        raise PreconditionError("no pre-regeneration point right of the origin")
    return points[anchor % step :: step]


@frozen(eq=False)
class RegenRecord:
    """Regeneration times ``taus`` and points ``rhos`` observed on one path.

    If ``censored`` is set, the last pair is confirmed only by the observed part
    of the path and is left out of all estimators.
    """

    lam: float
    taus: np.ndarray = attrs.field(converter=lambda a: np.asarray(a, dtype=np.int64))
    rhos: np.ndarray = attrs.field(converter=lambda a: np.asarray(a, dtype=np.int64))
    censored: bool
    n_steps: int

    def __attrs_post_init__(self):
        if len(self.taus) != len(self.rhos):
            raise ValueError("taus and rhos differ in length")
        if np.any(np.diff(self.taus) <= 0) or np.any(np.diff(self.rhos) <= 0):
            raise ValueError("regeneration times and points must increase")

    @property
    def n_confirmed(self) -> int:
        return len(self.taus) - int(self.censored and len(self.taus) > 0)

    def confirmed(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_confirmed
        return self.taus[:n], self.rhos[:n]

    def gaps(self) -> tuple[np.ndarray, np.ndarray]:
        """``(tau gaps, rho gaps)`` between consecutive confirmed regenerations.

        The stretch before the first regeneration is not a gap.
        """
        taus, rhos = self.confirmed()
        return np.diff(taus), np.diff(rhos)

    def first(self) -> tuple[int, int] | None:
        taus, rhos = self.confirmed()
        if len(taus) == 0:
            return None
        return int(taus[0]), int(rhos[0])


def detect_regenerations(
    traj: Trajectory, env: WindowConfig | None = None
) -> RegenRecord:
    """Regeneration times of `traj` at its bias.

    Step ``k >= 1`` is a regeneration time if ``Y_k`` is a lambda
    pre-regeneration vertex visited for the first time and no step ``j >= k``
    visits a lambda pre-regeneration vertex left of ``X_k``.
    """
    env = traj.env if env is None else env
    lam = traj.bias
    points = set(lambda_prereg_points(env, lam))
    xs = traj.positions[:, 0]
    on_point = (traj.positions[:, 1] == 0) & np.isin(xs, list(points))

    # smallest lambda point x visited at or after each step
    marked = np.where(on_point, xs, np.iinfo(np.int64).max)
    future_min = np.minimum.accumulate(marked[::-1])[::-1]

    seen: set[int] = set()
    taus, rhos = [], []
    for k in range(len(xs)):
        if not on_point[k]:
            continue
        x = int(xs[k])
        first_visit = x not in seen
        seen.add(x)
        if k == 0 or not first_visit:
            continue
        if future_min[k] >= x:
            taus.append(k)
            rhos.append(x)

    record = RegenRecord(lam, taus, rhos, len(taus) > 0, traj.n_steps)
    logger.debug(
        "Detected regenerations", lam=lam, n=len(taus), n_steps=traj.n_steps
    )
    return record


def replay_check(
    traj: Trajectory, record: RegenRecord, env: WindowConfig | None = None
) -> bool:
    """Whether no step after a regeneration visits a lambda point to its left."""
    env = traj.env if env is None else env
    points = np.asarray(lambda_prereg_points(env, record.lam))
    xs = traj.positions[:, 0]
    on_point = (traj.positions[:, 1] == 0) & np.isin(xs, points)
    for tau, rho in zip(record.taus, record.rhos):
        if xs[tau] != rho or not on_point[tau]:
            return False
        later = on_point[tau:] & (xs[tau:] < rho)
        if later.any():
            return False
    return True


def _pooled_gaps(records: Sequence[RegenRecord], min_gaps: int):
    tau_gaps, rho_gaps, used = [], [], 0
    for record in records:
        t, r = record.gaps()
        if len(t) < min_gaps:
            logger.warning(
                "Skipping trajectory with too few regeneration gaps",
                n_gaps=len(t),
                min_gaps=min_gaps,
            )
            continue
        tau_gaps.append(t)
        rho_gaps.append(r)
        used += 1
    if not used:
        raise InsufficientDataError(
            f"no trajectory has at least {min_gaps} confirmed regeneration gaps"
        )
    return tau_gaps, rho_gaps


def speed_regen(
    records: Sequence[RegenRecord],
    min_gaps: int = MIN_REGEN_GAPS,
    batch_size: int | None = None,
    confidence: float = 0.95,
) -> EstimateCI:
    """``sum(rho gaps) / sum(tau gaps)`` with a batch means standard error.

    Batches are cut inside each trajectory so no batch mixes two paths.
    """
    tau_gaps, rho_gaps = _pooled_gaps(records, min_gaps)
    if batch_size is None:
        batch_size = max(2, math.isqrt(min(len(t) for t in tau_gaps)))
    num, den = [], []
    for t, r in zip(tau_gaps, rho_gaps):
        num.append(batch_sums(r, batch_size))
        den.append(batch_sums(t, batch_size))
    num, den = np.concatenate(num), np.concatenate(den)
    n_batches = len(num)
    if n_batches < 2:
        raise InsufficientDataError("fewer than 2 batches of regeneration gaps")
    # the ratio uses every gap, not only the ones that fill a batch
    value = float(sum(r.sum() for r in rho_gaps) / sum(t.sum() for t in tau_gaps))
    residual = num - value * den
    se = math.sqrt(np.sum(residual**2) / (n_batches * (n_batches - 1))) / den.mean()
    n_gaps = sum(len(t) for t in tau_gaps)
    return EstimateCI(
        value,
        se,
        n_batches,
        "regen",
        confidence,
        {"n_gaps": n_gaps, "batch_size": batch_size, "n_trajectories": len(tau_gaps)},
    )


def _pooled_lag_correlation(
    series: Sequence[np.ndarray], lag: int
) -> tuple[float, float]:
    u = np.concatenate([s[:-lag] for s in series if len(s) > lag])
    v = np.concatenate([s[lag:] for s in series if len(s) > lag])
    if len(u) < 3:
        raise InsufficientDataError(f"too few pairs for a lag {lag} correlation")
    if u.std() == 0 or v.std() == 0:
        return 0.0, 1 / math.sqrt(len(u))
    return float(np.corrcoef(u, v)[0, 1]), 1 / math.sqrt(len(u))


@frozen
class TailDiagnostic:
    """Exponential tail fit of the rho gaps and the dependence of consecutive gaps.

    ``rate_constant`` is ``-slope / lam``; ``exponential_tail`` holds when it is
    positive beyond two standard errors.
    """

    slope: float
    slope_se: float
    rate_constant: float
    exponential_tail: bool
    lag1: dict[str, tuple[float, float]]
    lag2: dict[str, tuple[float, float]]
    min_rho_gap: int
    spacing_ok: bool
    n_gaps: int

    def lag2_consistent(self, n_se: float = 3.0) -> bool:
        return all(abs(c) <= n_se * se for c, se in self.lag2.values())


def regen_tail_diagnostic(
    records: Sequence[RegenRecord],
    min_total_gaps: int = MIN_TAIL_GAPS,
    min_count: int = 50,
) -> TailDiagnostic:
    if not records:
        raise InsufficientDataError("no regeneration records given")
    lam = records[0].lam
    tau_gaps, rho_gaps = zip(*(r.gaps() for r in records))
    all_rho = np.concatenate(rho_gaps)
    if len(all_rho) < min_total_gaps:
        raise InsufficientDataError(
            f"tail fit needs {min_total_gaps} gaps, got {len(all_rho)}"
        )
    slope, slope_se, _ = log_survival_fit(all_rho, min_count=min_count)
    lag1 = {
        "tau": _pooled_lag_correlation(tau_gaps, 1),
        "rho": _pooled_lag_correlation(rho_gaps, 1),
    }
    lag2 = {
        "tau": _pooled_lag_correlation(tau_gaps, 2),
        "rho": _pooled_lag_correlation(rho_gaps, 2),
    }
    min_gap = int(all_rho.min())
    report = TailDiagnostic(
        slope=slope,
        slope_se=slope_se,
        rate_constant=-slope / lam,
        exponential_tail=slope + 2 * slope_se < 0,
        lag1=lag1,
        lag2=lag2,
        min_rho_gap=min_gap,
        spacing_ok=min_gap >= _spacing(lam),
        n_gaps=len(all_rho),
    )
    logger.info(
        "Regeneration tail",
        lam=lam,
        slope=slope,
        rate_constant=report.rate_constant,
        lag2=lag2,
    )
    return report


def first_regeneration_moment(records: Sequence[RegenRecord]) -> EstimateCI:
    """``lam**2 * E[rho_1**2]``, which stays bounded as the bias vanishes."""
    firsts = [r.first() for r in records]
    rho1 = np.array([f[1] for f in firsts if f is not None], dtype=float)
    if len(rho1) < 2:
        raise InsufficientDataError("fewer than 2 trajectories regenerate")
    lam = records[0].lam
    value, se = mean_se(lam**2 * rho1**2)
    return EstimateCI(
        value, se, len(rho1), "first-regen",
        diagnostics={"n_without_regeneration": len(firsts) - len(rho1)},
    )


def gaps_frame(records: Sequence[RegenRecord]) -> pd.DataFrame:
    frames = []
    for i, record in enumerate(records):
        t, r = record.gaps()
        frames.append(
            pd.DataFrame(
                {"record": i, "k": np.arange(2, len(t) + 2), "tau_gap": t, "rho_gap": r}
            )
        )
    if not frames:
        return pd.DataFrame(columns=["record", "k", "tau_gap", "rho_gap"])
    return pd.concat(frames, ignore_index=True)


def write_gaps_csv(
    records: Sequence[RegenRecord], path: str | Path, provenance: dict | None = None
):
    from pydiverse.ladderwalk.core.artifacts import write_csv

    write_csv(gaps_frame(records), path, provenance)
