"""Small Monte Carlo statistics helpers shared by the estimators."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from pydiverse.ladderwalk.errors import InsufficientDataError


def mean_se(values) -> tuple[float, float]:
    """Sample mean and its standard error (independent samples)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {x.size}")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def ratio_estimate(num, den) -> tuple[float, float]:
    """Ratio of means ``mean(num) / mean(den)`` with a delta method standard error."""
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    if a.shape != b.shape:
        raise ValueError("numerator and denominator samples differ in length")
    if a.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {a.size}")
    b_bar = b.mean()
    if b_bar == 0:
        raise InsufficientDataError("denominator has zero mean")
    ratio = a.mean() / b_bar
    residual = a - ratio * b
    se = math.sqrt(np.sum(residual**2) / (a.size * (a.size - 1))) / abs(b_bar)
    return float(ratio), float(se)


def default_batch_size(n: int) -> int:
    return max(2, math.isqrt(n))


def batch_sums(values, batch_size: int) -> np.ndarray:
    """Sums over consecutive non-overlapping batches; a ragged tail is dropped."""
    x = np.asarray(values, dtype=float)
    k = x.size // batch_size
    return x[: k * batch_size].reshape(k, batch_size).sum(axis=1)


def batch_ratio_estimate(
    num, den, batch_size: int | None = None
) -> tuple[float, float, int]:
    """Pooled ratio ``sum(num) / sum(den)`` for a weakly dependent sequence.

    The standard error comes from non-overlapping batch means with batches of at
    least two consecutive pairs.

    :return: ``(ratio, se, number of batches)``
    """
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    if batch_size is None:
        batch_size = default_batch_size(a.size)
    batch_size = max(2, int(batch_size))
    k = a.size // batch_size
    if k < 2:
        raise InsufficientDataError(
            f"{a.size} samples give fewer than 2 batches of size {batch_size}"
        )
    ratio = a.sum() / b.sum()
    a_batches = batch_sums(a, batch_size)
    b_batches = batch_sums(b, batch_size)
    residual = a_batches - ratio * b_batches
    se = math.sqrt(np.sum(residual**2) / (k * (k - 1))) / abs(b_batches.mean())
    return float(ratio), float(se), k


def normal_quantile(level: float) -> float:
    return float(stats.norm.ppf(0.5 + level / 2))


def lag_correlation(values, lag: int = 1) -> tuple[float, float]:
    """Pearson correlation of ``x[k]`` and ``x[k+lag]`` with its null standard error."""
    x = np.asarray(values, dtype=float)
    m = x.size - lag
    if m < 3:
        raise InsufficientDataError(f"too few samples for a lag {lag} correlation")
    u, v = x[:-lag], x[lag:]
    if u.std() == 0 or v.std() == 0:
        return 0.0, 1 / math.sqrt(m)
    return float(np.corrcoef(u, v)[0, 1]), 1 / math.sqrt(m)


def log_survival_fit(samples, min_count: int = 5) -> tuple[float, float, float]:
    """Least squares fit of ``log P(X >= n)`` against ``n``.

    Only thresholds with at least `min_count` observations at or above them
    enter the regression.

    :return: ``(slope, slope standard error, intercept)``
    """
    x = np.sort(np.asarray(samples, dtype=float))
    thresholds = np.unique(x)
    counts = x.size - np.searchsorted(x, thresholds, side="left")
    keep = counts >= min_count
    if keep.sum() < 3:
        raise InsufficientDataError("too few distinct values for a tail fit")
    fit = stats.linregress(thresholds[keep], np.log(counts[keep] / x.size))
    return float(fit.slope), float(fit.stderr), float(fit.intercept)
