"""Exact samplers for bond percolation on a ladder window

The crossing conditioned law is sampled with a transfer matrix over the column
frontier. After the edges of column ``k`` have been revealed, the frontier
``{(k, 0), (k, 1)}`` is in one of four live states

=========  =============================================================
LINKED     both frontier vertices reach the left boundary, joined inside
TOP        only the top vertex reaches the left boundary
BOTTOM     only the bottom vertex reaches the left boundary
UNLINKED   both reach the left boundary, not joined by explored edges
=========  =============================================================

or in the absorbing DEAD state. A backward pass computes the probability that a
crossing still happens from every (column, state) pair, a forward pass then
draws the three edges ``(h_bottom[k], h_top[k], vertical[k + 1])`` of each column
from the Bernoulli prior tilted by that table.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable

import numpy as np
import structlog
from attrs import frozen

from pydiverse.ladderwalk.errors import FeasibilityError, ParameterError
from pydiverse.ladderwalk.percolation.window import WindowConfig

LINKED, TOP, BOTTOM, UNLINKED, DEAD = range(5)
N_STATES = 5
STATE_NAMES = ("linked", "top", "bottom", "unlinked", "dead")

# (h_bottom, h_top, next vertical) in the order used by the forward pass
COMBOS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=bool)

MAX_ENUMERATION_EDGES = 24

logger = structlog.get_logger(logger_name=__name__)


def _decode(state: int) -> tuple[bool, bool, bool]:
    return {
        LINKED: (True, True, True),
        TOP: (False, True, False),
        BOTTOM: (True, False, False),
        UNLINKED: (True, True, False),
        DEAD: (False, False, False),
    }[state]


def _encode(bottom: bool, top: bool, linked: bool) -> int:
    if bottom and top:
        return LINKED if linked else UNLINKED
    if top:
        return TOP
    if bottom:
        return BOTTOM
    return DEAD


def frontier_step(state: int, hb: bool, ht: bool, v: bool) -> int:
    """Frontier state of column ``k + 1`` given the state of column ``k``."""
    b, t, linked = _decode(state)
    nb, nt = hb and b, ht and t
    if v:
        nb = nt = nb or nt
    return _encode(nb, nt, v or (hb and ht and linked))


TRANSITIONS = np.array(
    [[frontier_step(s, *map(bool, combo)) for combo in COMBOS] for s in range(5)],
    dtype=np.int8,
)
LIVE = np.array([1.0, 1.0, 1.0, 1.0, 0.0])


def _check_p(p: float, allow_zero: bool):
    if not (0 <= p <= 1) or (p == 0 and not allow_zero) or math.isnan(p):
        raise ParameterError(f"invalid percolation probability p={p}")


def sample_window_unconditioned(
    p: float, x_min: int, x_max: int, rng: np.random.Generator
) -> WindowConfig:
    """Independent Bernoulli(p) edges on ``[x_min, x_max]``."""
    _check_p(p, allow_zero=True)
    if x_min >= x_max:
        raise ParameterError(f"empty window [{x_min}, {x_max}]")
    n = x_max - x_min + 1
    return WindowConfig(
        x_min,
        x_max,
        rng.random(n) < p,
        rng.random(n - 1) < p,
        rng.random(n - 1) < p,
        conditioned=False,
        p=p,
    )


class ConditionedSampler:
    """Transfer matrix sampler for the crossing conditioned law on a fixed window.

    :param isolate_top: Columns whose top vertex is forced to be isolated (the
        rung and both top horizontals are closed). Combined with the crossing
        condition this pins pre-regeneration points at those columns.
    """

    def __init__(
        self,
        p: float,
        x_min: int,
        x_max: int,
        isolate_top: Iterable[int] = (),
    ):
        _check_p(p, allow_zero=False)
        if x_min >= x_max:
            raise ParameterError(f"empty window [{x_min}, {x_max}]")
        self.p = p
        self.x_min = x_min
        self.x_max = x_max
        self.isolate_top = tuple(sorted(set(int(x) for x in isolate_top)))
        n = self.n_columns

        q_v = np.full(n, p)
        q_hb = np.full(n - 1, p)
        q_ht = np.full(n - 1, p)
        for x in self.isolate_top:
            k = x - x_min
            if not 0 <= k < n:
                raise ParameterError(f"isolated column {x} outside of window")
            q_v[k] = 0.0
            if k > 0:
                q_ht[k - 1] = 0.0
            if k < n - 1:
                q_ht[k] = 0.0
        self._q_v = q_v

        # Prior weight of every combo at every column boundary, shape (n-1, 8)
        c = COMBOS.astype(float)
        self._w = (
            np.where(c[None, :, 0], q_hb[:, None], 1 - q_hb[:, None])
            * np.where(c[None, :, 1], q_ht[:, None], 1 - q_ht[:, None])
            * np.where(c[None, :, 2], q_v[1:, None], 1 - q_v[1:, None])
        )

        # Backward table, rescaled per column to avoid underflow
        beta = np.empty((n, N_STATES))
        beta[-1] = LIVE
        log_scale = 0.0
        for k in range(n - 2, -1, -1):
            row = (beta[k + 1][TRANSITIONS] * self._w[k]).sum(axis=1)
            scale = row.max()
            if scale == 0:
                beta[: k + 1] = 0.0
                log_scale = -math.inf
                break
            beta[k] = row / scale
            log_scale += math.log(scale)
        self._beta = beta

        z = q_v[0] * beta[0][LINKED] + (1 - q_v[0]) * beta[0][UNLINKED]
        self.log_crossing_probability = (
            math.log(z) + log_scale if z > 0 and log_scale > -math.inf else -math.inf
        )

    @property
    def n_columns(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def n_edges(self) -> int:
        return 3 * self.n_columns - 2

    @property
    def crossing_probability(self) -> float:
        """``mu_p`` of the crossing event (with the forced closed edges)."""
        return math.exp(self.log_crossing_probability)

    def sample_bits(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` windows at once.

        :return: Boolean array of shape ``(size, 3 * n - 2)`` in column major
            ``(vertical, h_bottom, h_top)`` order, see :py:func:`window_code`.
        """
        if self.log_crossing_probability == -math.inf:
            raise FeasibilityError(
                f"no crossing configuration exists on [{self.x_min}, {self.x_max}]"
            )
        n = self.n_columns
        beta = self._beta
        bits = np.zeros((size, self.n_edges), dtype=bool)

        w_open = self._q_v[0] * beta[0][LINKED]
        w_closed = (1 - self._q_v[0]) * beta[0][UNLINKED]
        v0 = rng.random(size) * (w_open + w_closed) < w_open
        bits[:, 0] = v0
        state = np.where(v0, LINKED, UNLINKED)

        for k in range(n - 1):
            weights = self._w[k][None, :] * beta[k + 1][TRANSITIONS[state]]
            cum = np.cumsum(weights, axis=1)
            u = rng.random(size) * cum[:, -1]
            choice = (u[:, None] >= cum).sum(axis=1)
            combo = COMBOS[choice]
            bits[:, 3 * k + 1] = combo[:, 0]
            bits[:, 3 * k + 2] = combo[:, 1]
            bits[:, 3 * k + 3] = combo[:, 2]
            state = TRANSITIONS[state, choice]

        return bits

    def sample(self, rng: np.random.Generator) -> WindowConfig:
        return window_from_bits(
            self.sample_bits(rng, 1)[0], self.x_min, self.x_max, self.p, True
        )


def sample_window_conditioned(
    p: float,
    n1: int,
    n2: int,
    rng: np.random.Generator,
    isolate_top: Iterable[int] = (),
) -> WindowConfig:
    """Exact draw from the crossing conditioned law on ``[-n1, n2]``."""
    if n1 < 1 or n2 < 1:
        raise ParameterError(f"window half widths must be >= 1, got {n1}, {n2}")
    return ConditionedSampler(p, -n1, n2, isolate_top=isolate_top).sample(rng)


def sample_segment(p: float, length: int, rng: np.random.Generator) -> WindowConfig:
    """Conditioned draw on ``[0, length]`` with isolated top vertices at both ends.

    Both end columns are pre-regeneration points of any longer environment the
    segment is glued into.
    """
    if length < 1:
        raise ParameterError(f"segment length must be >= 1, got {length}")
    return ConditionedSampler(p, 0, length, isolate_top=(0, length)).sample(rng)


def sample_window_rejection(
    p: float,
    n1: int,
    n2: int,
    rng: np.random.Generator,
    max_tries: int = 100_000,
) -> WindowConfig:
    """Rejection oracle for :py:func:`sample_window_conditioned`."""
    from pydiverse.ladderwalk.percolation.cluster import crossing_exists

    for _ in range(max_tries):
        w = sample_window_unconditioned(p, -n1, n2, rng)
        if crossing_exists(w):
            return WindowConfig(
                w.x_min, w.x_max, w.vertical, w.h_bottom, w.h_top, True, p
            )
    raise FeasibilityError(f"no crossing window after {max_tries} tries (p={p})")


def crossing_probability(p: float, n1: int, n2: int) -> float:
    return ConditionedSampler(p, -n1, n2).crossing_probability


# Bit codes


def window_bits(w: WindowConfig) -> np.ndarray:
    bits = np.zeros(w.n_edges, dtype=bool)
    bits[0::3] = w.vertical
    bits[1::3] = w.h_bottom
    bits[2::3] = w.h_top
    return bits


def window_from_bits(
    bits: np.ndarray, x_min: int, x_max: int, p: float | None, conditioned: bool
) -> WindowConfig:
    bits = np.asarray(bits, dtype=bool)
    return WindowConfig(
        x_min, x_max, bits[0::3], bits[1::3], bits[2::3], conditioned=conditioned, p=p
    )


def bits_to_codes(bits: np.ndarray) -> np.ndarray:
    """Integer code ``sum(bit_e << e)`` of each row of a bit matrix."""
    bits = np.atleast_2d(bits)
    weights = np.left_shift(np.int64(1), np.arange(bits.shape[1], dtype=np.int64))
    return bits.astype(np.int64) @ weights


def window_code(w: WindowConfig) -> int:
    return int(bits_to_codes(window_bits(w))[0])


@frozen(eq=False)
class ExactDistribution:
    """The crossing conditioned law of a small window, listed configuration by
    configuration."""

    x_min: int
    x_max: int
    p: float
    codes: np.ndarray
    probabilities: np.ndarray
    crossing_probability: float

    def __len__(self):
        return len(self.codes)

    @property
    def n_edges(self) -> int:
        return 3 * (self.x_max - self.x_min) + 1

    def bits(self) -> np.ndarray:
        shifts = np.arange(self.n_edges, dtype=np.int64)
        return ((self.codes[:, None] >> shifts[None, :]) & 1).astype(bool)

    def window(self, i: int) -> WindowConfig:
        return window_from_bits(self.bits()[i], self.x_min, self.x_max, self.p, True)

    def probability_of(self, w: WindowConfig) -> float:
        code = window_code(w)
        i = np.searchsorted(self.codes, code)
        if i < len(self.codes) and self.codes[i] == code:
            return float(self.probabilities[i])
        return 0.0

    def edge_marginals(self) -> np.ndarray:
        """Probability that each edge (in bit code order) is open."""
        return self.probabilities @ self.bits()


def enumerate_conditioned_distribution(
    p: float, n1: int, n2: int, chunk_bits: int = 16
) -> ExactDistribution:
    """Brute force the crossing conditioned law on ``[-n1, n2]``.

    :raises FeasibilityError: if the window has more than
        ``MAX_ENUMERATION_EDGES`` edges.
    """
    _check_p(p, allow_zero=False)
    if n1 < 1 or n2 < 1:
        raise ParameterError(f"window half widths must be >= 1, got {n1}, {n2}")
    n = n1 + n2 + 1
    n_edges = 3 * n - 2
    if n_edges > MAX_ENUMERATION_EDGES:
        raise FeasibilityError(
            f"window [-{n1}, {n2}] has {n_edges} edges;"
            f" enumeration is limited to {MAX_ENUMERATION_EDGES}"
        )

    total = 1 << n_edges
    chunk = 1 << min(chunk_bits, n_edges)
    shifts = np.arange(n_edges, dtype=np.int64)
    codes, weights = [], []
    for start in range(0, total, chunk):
        c = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((c[:, None] >> shifts[None, :]) & 1).astype(bool)
        state = np.where(bits[:, 0], LINKED, UNLINKED)
        for k in range(n - 1):
            choice = (
                4 * bits[:, 3 * k + 1] + 2 * bits[:, 3 * k + 2] + bits[:, 3 * k + 3]
            )
            state = TRANSITIONS[state, choice]
        crossing = state != DEAD
        n_open = bits[crossing].sum(axis=1)
        codes.append(c[crossing])
        weights.append(p**n_open * (1 - p) ** (n_edges - n_open))

    codes = np.concatenate(codes)
    weights = np.concatenate(weights)
    z = float(weights.sum())
    logger.debug("enumerated crossing configurations", n=len(codes), z=z)
    return ExactDistribution(-n1, n2, p, codes, weights / z, z)
