"""Biased walk on a trap ``{0, ..., m}`` reflected at both ends

Inside, the walk steps up with probability ``q = e^lam / (e^lam + e^-lam)``;
from 0 it always moves to 1, from ``m`` always to ``m - 1``. ``r_i`` is the
probability that the walk started at ``i`` returns to ``i`` before visiting 0.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from pydiverse.ladderwalk.errors import ParameterError


def _check(i: int, m: int, lam: float):
    if m < 2:
        raise ParameterError(f"trap length m must be >= 2, got {m}")
    if not 1 <= i <= m:
        raise ParameterError(f"expected 1 <= i <= m, got i={i}, m={m}")
    if lam < 0:
        raise ParameterError("the bias must be nonnegative")


def _step_up(lam: float) -> float:
    return 1 / (1 + math.exp(-2 * lam))


def _ladder_ratio(i: int, lam: float) -> float:
    """``P_{i-1}`` of visiting 0 before ``i``.

    ``(e^{2 lam} - 1) e^{-2 lam i} / (1 - e^{-2 lam i})``
    """
    if lam == 0:
        return 1 / i
    return math.expm1(2 * lam) * math.exp(-2 * lam * i) / -math.expm1(-2 * lam * i)


def ruin_probability_r(i: int, m: int, lam: float) -> float:
    """``r_i = P_i(sigma_i < sigma_0)``"""
    _check(i, m, lam)
    if i == m:
        return 1 - _ladder_ratio(m, lam)
    q = _step_up(lam)
    return q + (1 - q) * (1 - _ladder_ratio(i, lam))


def reflected_kernel(m: int, lam: float) -> np.ndarray:
    q = _step_up(lam)
    kernel = np.zeros((m + 1, m + 1))
    kernel[0, 1] = 1.0
    kernel[m, m - 1] = 1.0
    for j in range(1, m):
        kernel[j, j + 1] = q
        kernel[j, j - 1] = 1 - q
    return kernel


def _hit_before(kernel: np.ndarray, target: int, avoid: int) -> np.ndarray:
    """``g(j) = P_j(hit target before avoid)`` counting time 0."""
    n = len(kernel)
    free = [j for j in range(n) if j not in (target, avoid)]
    system = np.eye(len(free)) - kernel[np.ix_(free, free)]
    g = np.zeros(n)
    g[target] = 1.0
    g[free] = scipy.linalg.solve(system, kernel[free, target])
    return g


def ruin_probability_oracle(i: int, m: int, lam: float) -> float:
    """First step linear solve for ``r_i`` on the reflected chain."""
    _check(i, m, lam)
    kernel = reflected_kernel(m, lam)
    return float(kernel[i] @ _hit_before(kernel, i, 0))


def first_visit_probability(i: int, m: int, lam: float) -> float:
    """``P_0(sigma_i < sigma_0)``"""
    _check(i, m, lam)
    if i == 1:
        return 1.0
    if lam == 0:
        return 1 / i
    rho = math.exp(-2 * lam)
    return (1 - rho) / -math.expm1(-2 * lam * i)


def visit_count_pmf(i: int, m: int, lam: float, k: int) -> float:
    """``P_0(V_i = k)`` for the number of visits to ``i`` before returning to 0.

    Geometric: ``P_0(sigma_i < sigma_0) r_i^{k-1} (1 - r_i)`` for ``k >= 1``.
    """
    first = first_visit_probability(i, m, lam)
    if k == 0:
        return 1 - first
    r = ruin_probability_r(i, m, lam)
    return first * r ** (k - 1) * (1 - r)


def expected_excursion_length(m: int, lam: float) -> float:
    """``E_0[tau_m] = 1 + sum_i E_0[V_i]`` for the return time to 0."""
    return 1 + sum(
        first_visit_probability(i, m, lam) / (1 - ruin_probability_r(i, m, lam))
        for i in range(1, m + 1)
    )


def expected_excursion_length_oracle(m: int, lam: float) -> float:
    """Dense solve of the mean return time to 0."""
    kernel = reflected_kernel(m, lam)
    free = list(range(1, m + 1))
    system = np.eye(m) - kernel[np.ix_(free, free)]
    hitting = scipy.linalg.solve(system, np.ones(m))
    return float(1 + hitting[0])
