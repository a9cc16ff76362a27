"""The lazy biased kernel on a percolation window

From ``v`` the walk moves to a neighbour ``w`` across an open edge with
probability ``exp(lam * (x(w) - x(v))) / Z(lam)``, ``Z(lam) = e^lam + 1 + e^-lam``.
The mass of the closed edges stays at ``v``. Outcomes are indexed as
``LEFT, RIGHT, VERTICAL, STAY``.
"""

from __future__ import annotations

import math

import numpy as np
from attrs import frozen

from pydiverse.ladderwalk._typing import Vertex, VertexLike, as_vertex
from pydiverse.ladderwalk.errors import ParameterError, PreconditionError
from pydiverse.ladderwalk.percolation.window import WindowConfig

LEFT, RIGHT, VERTICAL, STAY = range(4)
DISPLACEMENT = np.array([-1.0, 1.0, 0.0])
FD_STEP = 1e-4


def partition_function(lam: float) -> float:
    return math.exp(lam) + 1.0 + math.exp(-lam)


def open_directions(env: WindowConfig) -> np.ndarray:
    """``(n_vertices, 3)`` flags of the open (left, right, vertical) edges.

    Rows of boundary column vertices have unknown edges and are flagged by
    :py:func:`usable_vertices`.
    """
    n = env.n_columns
    flags = np.zeros((n, 2, 3), dtype=bool)
    for y, h in enumerate((env.h_bottom, env.h_top)):
        flags[1:, y, LEFT] = h
        flags[:-1, y, RIGHT] = h
        flags[:, y, VERTICAL] = env.vertical
    return flags.reshape(2 * n, 3)


def usable_vertices(env: WindowConfig) -> np.ndarray:
    usable = np.ones(env.n_vertices, dtype=bool)
    usable[:2] = usable[-2:] = False
    return usable


def _target(i: int, outcome: int) -> int:
    return (i - 2, i + 2, i ^ 1, i)[outcome]


@frozen(eq=False)
class KernelTable:
    """Per vertex outcome tables of the kernel and its log derivatives.

    All arrays have shape ``(n_vertices, 4)``, columns indexed by outcome.

    * ``prob``: transition probabilities at the simulation bias
    * ``nu``: derivative of ``log p`` at bias 0
    * ``second``: ``p'' / p`` at bias 0
    * ``log_ratio``: ``log(p_tilt / p_0)``
    * ``remainder``: ``log_ratio - tilt * nu + tilt**2 * (nu**2 - second) / 2``
    """

    env: WindowConfig
    bias: float
    tilt: float
    prob: np.ndarray
    nu: np.ndarray
    second: np.ndarray
    log_ratio: np.ndarray
    remainder: np.ndarray
    usable: np.ndarray

    @classmethod
    def build(
        cls, env: WindowConfig, bias: float, tilt: float | None = None
    ) -> KernelTable:
        if bias < 0 or (tilt is not None and tilt < 0):
            raise ParameterError("the bias must be nonnegative")
        tilt = bias if tilt is None else tilt
        is_open = open_directions(env)
        closed = ~is_open
        n_closed = closed.sum(axis=1)
        safe_closed = np.maximum(n_closed, 1)

        def move_weights(lam):
            return np.exp(lam * DISPLACEMENT)[None, :] * np.ones_like(is_open, float)

        prob = np.zeros((env.n_vertices, 4))
        w = move_weights(bias)
        prob[:, :3] = np.where(is_open, w, 0.0) / partition_function(bias)
        prob[:, STAY] = np.where(closed, w, 0.0).sum(axis=1) / partition_function(bias)

        nu = np.zeros_like(prob)
        nu[:, :3] = DISPLACEMENT
        nu[:, STAY] = (closed * DISPLACEMENT).sum(axis=1) / safe_closed

        second = np.zeros_like(prob)
        second[:, :3] = DISPLACEMENT**2 - 2 / 3
        second[:, STAY] = (closed * DISPLACEMENT**2).sum(axis=1) / safe_closed - 2 / 3

        log_ratio = np.zeros_like(prob)
        log_ratio[:, :3] = tilt * DISPLACEMENT - math.log(partition_function(tilt) / 3)
        stay_tilted = np.where(closed, move_weights(tilt), 0.0).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio[:, STAY] = np.where(
                n_closed > 0,
                np.log(stay_tilted / safe_closed)
                - math.log(partition_function(tilt) / 3),
                0.0,
            )

        remainder = log_ratio - tilt * nu + tilt**2 * (nu**2 - second) / 2
        return cls(
            env, bias, tilt, prob, nu, second, log_ratio, remainder,
            usable_vertices(env),
        )


def _row_index(env: WindowConfig, v: VertexLike) -> int:
    v = as_vertex(v)
    if not env.contains(v):
        raise PreconditionError(f"vertex {v} outside of window {env.span}")
    x, _ = v
    if x in (env.x_min, env.x_max):
        raise PreconditionError(f"vertex {v} lies on the window boundary")
    return env.index(v)


def _outcome(env: WindowConfig, v: VertexLike, w: VertexLike) -> tuple[int, int]:
    i = _row_index(env, v)
    w = as_vertex(w)
    if w == env.vertex(i):
        outcome = STAY
    else:
        for outcome in (LEFT, RIGHT, VERTICAL):
            if env.vertex(_target(i, outcome)) == w:
                break
        else:
            raise PreconditionError(f"{w} is not a neighbour of {v}")
    return i, outcome


def _single_row(env: WindowConfig, lam: float, i: int) -> tuple[np.ndarray, np.ndarray]:
    is_open = open_directions(env)[i]
    weights = np.exp(lam * DISPLACEMENT)
    z = partition_function(lam)
    return np.where(is_open, weights, 0.0) / z, np.where(~is_open, weights, 0.0) / z


def transition_row(env: WindowConfig, lam: float, v: VertexLike) -> dict[Vertex, float]:
    """Transition probabilities out of `v`; the self loop is always listed."""
    if lam < 0:
        raise ParameterError("the bias must be nonnegative")
    i = _row_index(env, v)
    moves, stay = _single_row(env, lam, i)
    row = {env.vertex(i): float(stay.sum())}
    for outcome in (LEFT, RIGHT, VERTICAL):
        if moves[outcome] > 0:
            row[env.vertex(_target(i, outcome))] = float(moves[outcome])
    return row


def transition_probability(
    env: WindowConfig, lam: float, v: VertexLike, w: VertexLike
) -> float:
    i, outcome = _outcome(env, v, w)
    moves, stay = _single_row(env, lam, i)
    return float(stay.sum() if outcome == STAY else moves[outcome])


def _check_neighbour(env, v, w) -> tuple[int, int]:
    i, outcome = _outcome(env, v, w)
    if transition_probability(env, 0.0, v, w) == 0:
        raise PreconditionError(f"{w} can't be reached from {v} in one step")
    return i, outcome


def nu(env: WindowConfig, v: VertexLike, w: VertexLike) -> float:
    """Derivative of ``log p_lam(v, w)`` at ``lam = 0``.

    Moves give ``x(w) - x(v)``; the self loop gives the mean displacement of the
    closed edges at `v`.
    """
    i, outcome = _check_neighbour(env, v, w)
    if outcome != STAY:
        return float(DISPLACEMENT[outcome])
    closed = ~open_directions(env)[i]
    return float(DISPLACEMENT[closed].mean())


def log_p_second_derivative_ratio(
    env: WindowConfig, v: VertexLike, w: VertexLike
) -> float:
    """``p''_0(v, w) / p_0(v, w)``; ``Z(0) = 3, Z'(0) = 0, Z''(0) = 2``."""
    i, outcome = _check_neighbour(env, v, w)
    if outcome != STAY:
        return float(DISPLACEMENT[outcome] ** 2 - 2 / 3)
    closed = ~open_directions(env)[i]
    return float((DISPLACEMENT[closed] ** 2).mean() - 2 / 3)


def finite_difference_nu(
    env: WindowConfig, v: VertexLike, w: VertexLike, h: float = FD_STEP
) -> float:
    """Central difference of ``log p_lam(v, w)`` around ``lam = 0``."""
    return (
        math.log(transition_probability(env, h, v, w))
        - math.log(transition_probability(env, -h, v, w))
    ) / (2 * h)


def finite_difference_second_ratio(
    env: WindowConfig, v: VertexLike, w: VertexLike, h: float = FD_STEP
) -> float:
    p0 = transition_probability(env, 0.0, v, w)
    second = (
        transition_probability(env, h, v, w)
        - 2 * p0
        + transition_probability(env, -h, v, w)
    ) / h**2
    return second / p0


def martingale_checks(
    env: WindowConfig, vertices=None, trajectory=None
) -> float:
    """Largest violation of the per vertex identities ``sum_w nu(v, w) p_0(v, w) = 0``
    and ``sum_w p''_0(v, w) = 0``.

    If a `trajectory` is given, ``nu(Y_{k-1}, Y_k) = X_k - X_{k-1}`` is also
    checked for each of its moves.
    """
    table = KernelTable.build(env, 0.0)
    if vertices is None:
        idx = np.flatnonzero(table.usable)
    else:
        idx = np.array([_row_index(env, v) for v in vertices], dtype=np.int64)
    drift = np.abs((table.nu[idx] * table.prob[idx]).sum(axis=1))
    curvature = np.abs((table.second[idx] * table.prob[idx]).sum(axis=1))
    residual = float(max(drift.max(initial=0.0), curvature.max(initial=0.0)))

    if trajectory is not None:
        xs = trajectory.positions[:, 0]
        moved = np.any(trajectory.positions[1:] != trajectory.positions[:-1], axis=1)
        increments = trajectory.nu_increments()
        dx = np.diff(xs).astype(float)
        if moved.any():
            residual = max(residual, float(np.abs(increments - dx)[moved].max()))
    return residual


def transition_matrix(env: WindowConfig, lam: float) -> np.ndarray:
    """Dense kernel over all window vertices; boundary rows are left empty."""
    table = KernelTable.build(env, lam)
    n = env.n_vertices
    matrix = np.zeros((n, n))
    for i in np.flatnonzero(table.usable):
        for outcome in range(4):
            if table.prob[i, outcome] > 0:
                matrix[i, _target(i, outcome)] += table.prob[i, outcome]
    return matrix
