from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Union

import numpy as np
import structlog

from pydiverse.ladderwalk.errors import (
    InsufficientDataError,
    ParameterError,
    PreconditionError,
)
from pydiverse.ladderwalk.estimators.results import EstimateCI
from pydiverse.ladderwalk.util.stats import mean_se
from pydiverse.ladderwalk.walk.trajectory import ReplicaSummary, Trajectory

logger = structlog.get_logger(logger_name=__name__)

MIN_SPEED_REPLICAS = 30
MIN_ESS = 10.0
ALPHA_WINDOW = (0.25, 4.0)

Replica = Union[Trajectory, ReplicaSummary]


def speed_direct(
    replicas: Sequence[Replica],
    min_replicas: int = MIN_SPEED_REPLICAS,
    confidence: float = 0.95,
) -> EstimateCI:
    """Mean of ``X_n / n`` over independent replicas."""
    if len(replicas) < min_replicas:
        raise InsufficientDataError(
            f"speed needs {min_replicas} replicas, got {len(replicas)}"
        )
    speeds = np.array([r.displacement / r.n_steps for r in replicas])
    value, se = mean_se(speeds)
    return EstimateCI(
        value, se, len(replicas), "direct", confidence,
        {"lam": replicas[0].bias, "n_steps": replicas[0].n_steps},
    )


def effective_sample_size(log_weights) -> float:
    """Kish effective sample size ``(sum w)**2 / sum w**2``."""
    lw = np.asarray(log_weights, dtype=float)
    w = np.exp(lw - lw.max())
    return float(w.sum() ** 2 / np.sum(w**2))


def speed_girsanov(
    replicas: Sequence[Replica],
    lam: float | None = None,
    check_alpha_window: bool = True,
    confidence: float = 0.95,
) -> EstimateCI:
    """Importance sampling estimate of ``E_lam[X_n] / (lam n)`` from unbiased paths.

    Every replica must have been simulated at bias 0 with its Girsanov weight
    recorded at tilt `lam`, so that the weight is
    ``exp(lam M_n - lam**2 A_n + R_n)``.

    :param check_alpha_window: Require ``lam**2 n`` to lie in ``[0.25, 4]``.
    """
    if len(replicas) < 2:
        raise InsufficientDataError("need at least 2 replicas")
    lam = replicas[0].tilt if lam is None else lam
    if not lam > 0:
        raise ParameterError(f"the tilt must be positive, got {lam}")
    n = replicas[0].n_steps
    for r in replicas:
        if r.bias != 0:
            raise PreconditionError("Girsanov replicas must be unbiased")
        if not math.isclose(r.tilt, lam) or r.n_steps != n:
            raise PreconditionError("replicas differ in tilt or length")
    alpha = lam**2 * n
    if check_alpha_window and not ALPHA_WINDOW[0] <= alpha <= ALPHA_WINDOW[1]:
        raise PreconditionError(
            f"lam**2 n = {alpha:.3g} is outside {list(ALPHA_WINDOW)}"
        )

    log_w = np.array([r.log_weight for r in replicas])
    xs = np.array([r.displacement for r in replicas], dtype=float)
    value, se = mean_se(xs * np.exp(log_w) / (lam * n))
    ess = effective_sample_size(log_w)
    warnings = []
    if ess < MIN_ESS:
        warnings.append(f"weight degeneracy: effective sample size {ess:.1f}")
        logger.warning("Girsanov weights degenerate", ess=ess, lam=lam, n=n)
    w = np.exp(log_w)
    return EstimateCI(
        value,
        se,
        len(replicas),
        "girsanov",
        confidence,
        {
            "lam": lam,
            "n_steps": n,
            "alpha": alpha,
            "ess": ess,
            "mean_weight": float(w.mean()),
            "self_normalized": float(np.sum(xs * w) / np.sum(w) / (lam * n)),
        },
        warnings,
    )
