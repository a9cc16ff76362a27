from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import attrs
import numpy as np
import structlog
from attrs import frozen
from scipy import stats

from pydiverse.ladderwalk.corrector.potentials import PotentialTable
from pydiverse.ladderwalk.errors import InsufficientDataError
from pydiverse.ladderwalk.estimators.results import (
    EstimateCI,
    SigmaMatrix,
    ci_overlap,
)
from pydiverse.ladderwalk.estimators.speed import Replica
from pydiverse.ladderwalk.util.stats import mean_se
from pydiverse.ladderwalk.walk.kernel import KernelTable

logger = structlog.get_logger(logger_name=__name__)

MIN_SIGMA_REPLICAS = 100
GAUSSIANITY_LEVEL = 1e-3


def sigma_path_variance(
    replicas: Sequence[Replica],
    min_replicas: int = MIN_SIGMA_REPLICAS,
    confidence: float = 0.95,
) -> EstimateCI:
    """``Var(X_n) / n`` across unbiased replicas.

    ``mean(max_k X_k**2) / n`` is reported as a diagnostic; it stays bounded in
    ``n`` under diffusive scaling.
    """
    if len(replicas) < min_replicas:
        raise InsufficientDataError(
            f"sigma needs {min_replicas} replicas, got {len(replicas)}"
        )
    n = replicas[0].n_steps
    xs = np.array([r.displacement for r in replicas], dtype=float)
    centered_sq = (xs - xs.mean()) ** 2
    m = len(xs)
    value = float(centered_sq.sum() / (m - 1) / n)
    se = float(centered_sq.std(ddof=1) / math.sqrt(m) / n)
    max_sq, max_sq_se = mean_se([r.max_sq_displacement for r in replicas])
    return EstimateCI(
        value,
        se,
        m,
        "path-variance",
        confidence,
        {
            "n_steps": n,
            "mean_displacement": float(xs.mean()),
            "max_sq_over_n": max_sq / n,
            "max_sq_over_n_se": max_sq_se / n,
        },
    )


@frozen
class GaussianityResult:
    statistic: float
    pvalue: float
    level: float

    @property
    def passes(self) -> bool:
        return self.pvalue >= self.level


def gaussianity_test(
    replicas: Sequence[Replica],
    sigma2: float | None = None,
    level: float = GAUSSIANITY_LEVEL,
) -> GaussianityResult:
    """Kolmogorov-Smirnov test of ``X_n / sqrt(sigma2 n)`` against N(0, 1)."""
    if sigma2 is None:
        sigma2 = sigma_path_variance(replicas, min_replicas=2).value
    n = replicas[0].n_steps
    scaled = np.array([r.displacement for r in replicas]) / math.sqrt(sigma2 * n)
    result = stats.kstest(scaled, "norm")
    return GaussianityResult(float(result.statistic), float(result.pvalue), level)


@frozen
class VarianceScaling:
    estimates: dict[int, EstimateCI]

    @property
    def consistent(self) -> bool:
        """Whether all pairs of estimates have overlapping intervals."""
        values = list(self.estimates.values())
        return all(
            ci_overlap(a, b) for i, a in enumerate(values) for b in values[i + 1 :]
        )


def variance_scaling(
    replicas_by_n: Mapping[int, Sequence[Replica]],
    min_replicas: int = MIN_SIGMA_REPLICAS,
) -> VarianceScaling:
    """``Var(X_n) / n`` for several path lengths; it is flat under diffusive scaling."""
    return VarianceScaling(
        {
            n: sigma_path_variance(reps, min_replicas=min_replicas)
            for n, reps in sorted(replicas_by_n.items())
        }
    )


def _origin_moments(table: PotentialTable) -> tuple[float, float, float] | None:
    env = table.env
    i = env.index((0, 0))
    kernel = KernelTable.build(env, 0.0)
    if not kernel.usable[i]:
        return None
    s11 = s12 = s22 = 0.0
    for outcome in range(4):
        p = kernel.prob[i, outcome]
        if p == 0:
            continue
        psi = table.psi[(i - 2, i + 2, i ^ 1, i)[outcome]]
        if math.isnan(psi):
            return None
        nu = kernel.nu[i, outcome]
        s11 += p * psi**2
        s12 += p * psi * nu
        s22 += p * nu**2
    return s11, s12, s22


def sigma_psi_moments(
    tables: Sequence[PotentialTable],
    kappa: float | None = None,
    kappa_se: float | None = None,
    confidence: float = 0.95,
) -> SigmaMatrix:
    """Environment averages of the one step moments of ``(psi(Y_1), nu(0, Y_1))``.

    Per environment the three sums over the origin's outcomes are exact; the
    average over environments is Monte Carlo. Environments without ``psi`` next
    to the origin are skipped and counted.
    """
    if not tables:
        raise InsufficientDataError("no potential tables given")
    kappa = tables[0].kappa if kappa is None else kappa
    kappa_se = tables[0].kappa_se if kappa_se is None else kappa_se

    rows, skipped = [], 0
    for table in tables:
        moments = _origin_moments(table)
        if moments is None:
            skipped += 1
        else:
            rows.append(moments)
    if skipped:
        logger.warning("Skipped environments without psi at the origin", n=skipped)
    if len(rows) < 2:
        raise InsufficientDataError("fewer than 2 environments have psi at the origin")

    arr = np.array(rows)
    (s11, se11), (s12, se12), (s22, se22) = (mean_se(arr[:, k]) for k in range(3))
    # s11 scales like kappa**2 and s12 like kappa
    rel = kappa_se / kappa if kappa else 0.0
    se11 = math.hypot(se11, 2 * abs(s11) * rel)
    se12 = math.hypot(se12, abs(s12) * rel)
    return SigmaMatrix(
        s11, s12, s22, se11, se12, se22, len(rows), skipped, confidence
    )


def second_order_concentration(
    replicas: Sequence[Replica], s22: float | EstimateCI, confidence: float = 0.95
) -> EstimateCI:
    """``lam**2 A_n`` averaged over unbiased replicas, compared with ``alpha s22 / 2``.

    ``A_n / n`` converges to ``s22 / 2``, so ``lam**2 A_n`` concentrates at
    ``alpha s22 / 2`` when ``lam**2 n = alpha``.
    """
    if len(replicas) < 2:
        raise InsufficientDataError("need at least 2 replicas")
    lam = replicas[0].tilt
    n = replicas[0].n_steps
    alpha = lam**2 * n
    values = np.array([lam**2 * r.A for r in replicas])
    value, se = mean_se(values)
    target_s22 = s22.value if isinstance(s22, EstimateCI) else float(s22)
    target = alpha * target_s22 / 2
    return attrs.evolve(
        EstimateCI(value, se, len(replicas), "second-order", confidence),
        diagnostics={
            "alpha": alpha,
            "target": target,
            "relative_error": (value - target) / target if target else math.nan,
            "spread": float(values.std(ddof=1)),
        },
    )
