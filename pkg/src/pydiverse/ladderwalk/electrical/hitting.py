from __future__ import annotations

import math
from collections import deque
from collections.abc import Iterable

import numpy as np
import scipy.linalg
import structlog
from attrs import frozen

from pydiverse.ladderwalk._typing import VertexLike, as_vertex
from pydiverse.ladderwalk.electrical.network import (
    ResistorGraph,
    effective_resistance,
)
from pydiverse.ladderwalk.errors import ParameterError, PreconditionError
from pydiverse.ladderwalk.percolation.cluster import (
    crossing_cluster_mask,
    find_preregeneration_points,
    forwards_mask,
)
from pydiverse.ladderwalk.percolation.window import WindowConfig
from pydiverse.ladderwalk.walk.kernel import KernelTable, partition_function

DEFAULT_LAMBDA0 = 0.2
SHARP_UPPER_LIMIT = 4 / (3 + math.e**2)
SHARP_UPPER_BOUND = 0.4

logger = structlog.get_logger(logger_name=__name__)


def _prereg_x(env: WindowConfig, v: VertexLike, prereg: set[int], name: str) -> int:
    x, y = as_vertex(v)
    if y != 0 or x not in prereg:
        raise PreconditionError(f"{name}={(x, y)} is not a pre-regeneration point")
    return x


def hitting_probability_exact(
    env: WindowConfig,
    lam: float,
    u: VertexLike,
    v: VertexLike,
    w: VertexLike,
) -> float:
    """``P^v(T_u < T_w)`` for pre-regeneration points ``x(u) < x(v) < x(w)``.

    Only the block ``[u, w)`` matters. As `v` is a cut vertex of that block, the
    answer is ``R(v <-> w) / (R(u <-> v) + R(v <-> w))`` on the tilted network.
    """
    if lam < 0:
        raise ParameterError("the bias must be nonnegative")
    prereg = set(find_preregeneration_points(env))
    xu = _prereg_x(env, u, prereg, "u")
    xv = _prereg_x(env, v, prereg, "v")
    xw = _prereg_x(env, w, prereg, "w")
    if not xu < xv < xw:
        raise PreconditionError(f"expected x(u) < x(v) < x(w), got {xu}, {xv}, {xw}")

    g = ResistorGraph.from_window(env, xu, xw, lam=lam, x_ref=xv)
    r_left = effective_resistance(g, (xu, 0), (xv, 0))
    r_right = effective_resistance(g, (xv, 0), (xw, 0))
    return r_right / (r_left + r_right)


def hitting_probability_to_infinity(
    env: WindowConfig,
    lam: float,
    u: VertexLike,
    v: VertexLike,
    truncation: int | None = None,
) -> float:
    """``P^v(T_u < infinity)`` with infinity replaced by the column ``x(v) + T``."""
    prereg = set(find_preregeneration_points(env))
    xu = _prereg_x(env, u, prereg, "u")
    xv = _prereg_x(env, v, prereg, "v")
    if not xu < xv:
        raise PreconditionError("expected x(u) < x(v)")
    t = _truncation(lam, truncation)
    if xv + t > env.x_max:
        raise PreconditionError(
            f"window ends at {env.x_max}, {t} columns right of {xv} are needed"
        )
    g = ResistorGraph.from_window(env, xu, xv + t, lam=lam, x_ref=xv)
    sink = [(xv + t, 0), (xv + t, 1)]
    r_left = effective_resistance(g, (xu, 0), (xv, 0))
    r_right = effective_resistance(g, (xv, 0), sink)
    return r_right / (r_left + r_right)


@frozen
class HittingBracket:
    lower: float
    upper: float
    in_regime: bool

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


def hitting_probability_bounds(
    L: int, R: float, lam: float, lambda0: float = DEFAULT_LAMBDA0
) -> HittingBracket:
    """Closed form bracket for ``P^v(T_u < T_w)`` when ``x(v) - x(u) = L floor(1/lam)``
    and ``x(w) - x(v) = R floor(1/lam)``.

    `R` may be ``math.inf``. For ``L = 1, R = inf`` the sharper upper bound 0.4
    applies. The bracket is only claimed for small biases, `in_regime` records
    whether ``0 < lam <= lambda0``.
    """
    if L < 1 or R < 1:
        raise ParameterError(f"L and R must be positive, got {L}, {R}")
    e_r = 0.0 if math.isinf(R) else math.exp(-R)
    e_2r = 0.0 if math.isinf(R) else math.exp(-2 * R)
    lower = (1 - e_r) / (1 - e_r + 6 * math.expm1(2 * L))
    upper = (1 - e_2r) / (1 - e_2r + math.expm1(L) / 5)
    if L == 1 and math.isinf(R):
        upper = min(upper, SHARP_UPPER_BOUND)
    return HittingBracket(lower, upper, 0 < lam <= lambda0)


def intermediate_upper_bound(L: int, R: float, lam: float) -> float:
    """The bias dependent upper bound the closed form bracket is derived from.

    Tends to ``4 / (3 + e**2)`` for ``L = 1, R = inf`` as ``lam -> 0``.
    """
    if lam <= 0:
        raise ParameterError("the bias must be positive")
    e_2r = 0.0 if math.isinf(R) else math.exp(-2 * R)
    resistance_ratio = (
        0.5 * math.expm1(2 * (1 - lam) * L) * -math.expm1(-lam) / math.expm1(2 * lam)
    )
    return (1 - e_2r) / (1 - e_2r + resistance_ratio)


def lazy_hitting_probability(
    env: WindowConfig,
    lam: float,
    start: VertexLike,
    targets: Iterable[VertexLike],
    avoid: Iterable[VertexLike],
) -> float:
    """``P^start(hit targets before avoid)`` by first step analysis of the lazy kernel.

    Dense linear solve over the vertices the walk can reach before stopping.
    """
    targets = {env.index(t) for t in targets}
    avoid = {env.index(a) for a in avoid}
    stop = targets | avoid
    i0 = env.index(start)
    if i0 in targets:
        return 1.0
    if i0 in avoid:
        return 0.0

    table = KernelTable.build(env, lam)
    steps = lambda i: (i - 2, i + 2, i ^ 1)  # noqa: E731
    reach, queue = {i0}, deque([i0])
    while queue:
        i = queue.popleft()
        if not table.usable[i]:
            raise PreconditionError("the walk reaches the window boundary first")
        for outcome, j in enumerate(steps(i)):
            if table.prob[i, outcome] > 0 and j not in reach and j not in stop:
                reach.add(j)
                queue.append(j)

    free = sorted(reach)
    pos = {i: k for k, i in enumerate(free)}
    system = np.eye(len(free))
    rhs = np.zeros(len(free))
    for i in free:
        system[pos[i], pos[i]] -= table.prob[i, 3]
        for outcome, j in enumerate(steps(i)):
            p = table.prob[i, outcome]
            if p == 0:
                continue
            if j in targets:
                rhs[pos[i]] += p
            elif j in pos:
                system[pos[i], pos[j]] -= p
    return float(scipy.linalg.solve(system, rhs)[pos[i0]])


@frozen
class EscapeProbability:
    """Escape probability on a truncated window.

    :param truncation: Number of columns kept on either side of the vertex.
    :param truncation_bound: Estimated change of `value` if the network beyond
        the cut were kept, assuming an open forward path beyond it.
    """

    value: float
    lam: float
    truncation: int
    truncation_bound: float

    def __float__(self):
        return self.value


def escape_lower_bound(lam: float) -> float:
    """``(1 - e^-lam) / (e^lam + 1 + e^-lam)``"""
    return -math.expm1(-lam) / partition_function(lam)


def _truncation(lam: float, truncation: int | None) -> int:
    if truncation is not None:
        if truncation < 1:
            raise ParameterError(f"truncation must be positive, got {truncation}")
        return int(truncation)
    if lam <= 0:
        raise ParameterError("an explicit truncation is required for lam = 0")
    return math.ceil(5 / lam)


def escape_probability_exact(
    env: WindowConfig,
    lam: float,
    v: VertexLike,
    truncation: int | None = None,
) -> EscapeProbability:
    """Probability that the lazy walk from `v` never returns to `v`.

    Infinity is replaced by the column ``x(v) + T`` (``T = ceil(5 / lam)`` by
    default), whose vertices are shorted into one sink. The walk is also
    restricted to columns ``>= x(v) - T``.
    """
    if lam < 0:
        raise ParameterError("the bias must be nonnegative")
    x, y = as_vertex(v)
    cluster = crossing_cluster_mask(env)
    if not forwards_mask(env, cluster)[x - env.x_min, y]:
        raise PreconditionError(f"{(x, y)} is not forwards communicating")
    t = _truncation(lam, truncation)
    if x + t > env.x_max:
        raise PreconditionError(
            f"window ends at {env.x_max}, {t} columns right of {x} are needed"
        )

    lo = max(env.x_min, x - t)
    g = ResistorGraph.from_window(env, lo, x + t, lam=lam, x_ref=x)
    r = effective_resistance(g, (x, y), [(x + t, 0), (x + t, 1)])
    value = 1 / (r * partition_function(lam))
    if lam == 0:
        bound = value
    else:
        r_tail = math.exp(-2 * lam * t) / -math.expm1(-lam)
        bound = value * r_tail / (r + r_tail)
    logger.debug("escape probability", vertex=(x, y), lam=lam, value=value, T=t)
    return EscapeProbability(value, lam, t, bound)
