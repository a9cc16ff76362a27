"""Exhaustive path sums on tiny windows, used as exact oracles."""

from __future__ import annotations

import math
from collections import defaultdict

import numpy as np

from pydiverse.ladderwalk._typing import Vertex, VertexLike, as_vertex
from pydiverse.ladderwalk.errors import FeasibilityError, PreconditionError
from pydiverse.ladderwalk.percolation.window import WindowConfig
from pydiverse.ladderwalk.walk.kernel import KernelTable, transition_matrix

MAX_ENUMERATION_STEPS = 10


def _check_room(env: WindowConfig, start: Vertex, n: int):
    if not env.x_min + n < start[0] < env.x_max - n:
        raise PreconditionError(
            f"{n} steps from {start} may leave the window {env.span}"
        )


def path_distribution(
    env: WindowConfig, lam: float, start: VertexLike, n: int
) -> dict[Vertex, float]:
    """``P_lam(Y_n = v)`` from matrix powers of the dense kernel."""
    start = as_vertex(start)
    _check_room(env, start, n)
    dist = np.zeros(env.n_vertices)
    dist[env.index(start)] = 1.0
    kernel = transition_matrix(env, lam)
    for _ in range(n):
        dist = dist @ kernel
    return {env.vertex(i): float(dist[i]) for i in np.flatnonzero(dist)}


def weighted_endpoint_distribution(
    env: WindowConfig, lam: float, start: VertexLike, n: int
) -> dict[Vertex, float]:
    """``sum over paths of P_0(path) * exp(log_weight) * 1{Y_n = v}``.

    Every unbiased path of length `n` is enumerated and reweighted to bias `lam`.
    """
    start = as_vertex(start)
    _check_room(env, start, n)
    if n > MAX_ENUMERATION_STEPS:
        raise FeasibilityError(
            f"path enumeration is limited to {MAX_ENUMERATION_STEPS} steps"
        )
    table = KernelTable.build(env, 0.0, tilt=lam)
    targets = lambda i: (i - 2, i + 2, i ^ 1, i)  # noqa: E731

    out: dict[Vertex, float] = defaultdict(float)

    def walk(i: int, depth: int, log_p0: float, log_w: float):
        if depth == n:
            out[env.vertex(i)] += math.exp(log_p0 + log_w)
            return
        for outcome, j in enumerate(targets(i)):
            p = table.prob[i, outcome]
            if p > 0:
                walk(
                    j,
                    depth + 1,
                    log_p0 + math.log(p),
                    log_w + table.log_ratio[i, outcome],
                )

    walk(env.index(start), 0, 0.0, 0.0)
    return dict(out)


def mean_displacement(dist: dict[Vertex, float], start: VertexLike) -> float:
    x0, _ = as_vertex(start)
    return sum(p * (x - x0) for (x, _), p in dist.items())
