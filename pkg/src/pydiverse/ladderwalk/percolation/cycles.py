from __future__ import annotations

from collections.abc import Sequence

import attrs
import numpy as np
import structlog
from attrs import define, frozen

from pydiverse.ladderwalk.errors import CycleSourceError, ParameterError
from pydiverse.ladderwalk.percolation.cluster import find_preregeneration_points
from pydiverse.ladderwalk.percolation.sampling import ConditionedSampler
from pydiverse.ladderwalk.percolation.window import WindowConfig

logger = structlog.get_logger(logger_name=__name__)

DEFAULT_MARGIN = 10


def block_conductance(block: WindowConfig) -> float:
    """Effective conductance between the bottom vertices of the two end columns."""
    from pydiverse.ladderwalk.electrical.network import (
        ResistorGraph,
        effective_conductance,
    )

    g = ResistorGraph.from_window(block)
    return effective_conductance(g, (block.x_min, 0), (block.x_max, 0))


@frozen(eq=False)
class Cycle:
    """The block between two consecutive pre-regeneration points.

    `block` holds the block's edges on the columns ``[0, length]``: the
    verticals and top horizontals at both ends are closed.
    """

    length: int
    conductance: float
    block: WindowConfig = attrs.field(repr=False)
    source_x: int | None = None

    def __attrs_post_init__(self):
        b = self.block
        if self.length < 1 or b.span != (0, self.length):
            raise ParameterError(f"block must span [0, {self.length}], got {b.span}")
        if b.vertical[0] or b.vertical[-1] or b.h_top[0] or b.h_top[-1]:
            raise ParameterError(
                "the top vertices at both ends of a cycle must be isolated"
            )
        if not self.conductance > 0:
            raise ParameterError("cycle conductance must be positive")
        if 1 / self.conductance > 2 * self.length * (1 + 1e-12):
            raise ParameterError(
                f"resistance {1 / self.conductance} exceeds 2L = {2 * self.length}"
            )

    @classmethod
    def from_block(cls, block: WindowConfig, source_x: int | None = None) -> Cycle:
        if block.x_min != 0:
            block = block.shift(block.x_min)
        return cls(block.x_max, block_conductance(block), block, source_x)

    @classmethod
    def minimal(cls) -> Cycle:
        return cls.from_block(WindowConfig.bottom_line(0, 1))

    @property
    def resistance(self) -> float:
        return 1 / self.conductance


def extract_cycles(
    w: WindowConfig,
    margin: int = DEFAULT_MARGIN,
    exclude_origin: bool = False,
) -> list[Cycle]:
    """Cycles between consecutive pre-regeneration points at least `margin`
    columns away from the window boundary.

    :param exclude_origin: Drop the cycle ``[a, b)`` with ``a <= 0 < b``, whose law
        differs from the others.
    """
    prereg = [
        x
        for x in find_preregeneration_points(w)
        if x - w.x_min >= margin and w.x_max - x >= margin
    ]
    cycles = []
    for a, b in zip(prereg, prereg[1:]):
        if exclude_origin and a <= 0 < b:
            continue
        cycles.append(Cycle.from_block(w.slice(a, b), source_x=a))
    return cycles


def concatenate_cycles(
    cycles: Sequence[Cycle], origin_index: int = 0, p: float | None = None
) -> WindowConfig:
    """Glue cycles left to right, with ``x = 0`` at the left end of
    ``cycles[origin_index]``."""
    if not cycles:
        raise ParameterError("need at least one cycle")
    if not 0 <= origin_index < len(cycles):
        raise ParameterError(f"origin index {origin_index} out of range")
    x_min = -sum(c.length for c in cycles[:origin_index])
    vertical = [False]
    h_bottom, h_top = [], []
    for c in cycles:
        vertical.extend(c.block.vertical[1:])
        h_bottom.extend(c.block.h_bottom)
        h_top.extend(c.block.h_top)
    x_max = x_min + len(vertical) - 1
    return WindowConfig(
        x_min, x_max, vertical, h_bottom, h_top, conditioned=True, p=p
    )


class CycleSource:
    """Supplies i.i.d. cycles."""

    def next_cycle(self, rng: np.random.Generator) -> Cycle:
        raise NotImplementedError

    def take(self, n: int, rng: np.random.Generator) -> list[Cycle]:
        return [self.next_cycle(rng) for _ in range(n)]


@define
class CyclePool(CycleSource):
    """A finite harvested pool; cycles are handed out in random order without
    replacement.

    The cycles are an immutable tuple and may be shared freely. The draw order
    and cursor are state of this pool object, so a pool belongs to a single
    worker; build one ``CyclePool(pool.cycles)`` per worker to draw in parallel.
    """

    cycles: tuple[Cycle, ...] = attrs.field(converter=tuple)
    _order: np.ndarray | None = attrs.field(default=None, init=False)
    _cursor: int = attrs.field(default=0, init=False)

    def __len__(self):
        return len(self.cycles)

    @property
    def remaining(self) -> int:
        return len(self.cycles) - self._cursor

    def next_cycle(self, rng: np.random.Generator) -> Cycle:
        if self._order is None:
            self._order = rng.permutation(len(self.cycles))
        if self._cursor >= len(self.cycles):
            raise CycleSourceError(f"cycle pool of size {len(self.cycles)} exhausted")
        cycle = self.cycles[self._order[self._cursor]]
        self._cursor += 1
        return cycle

    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.cycles], dtype=float)

    def resistances(self) -> np.ndarray:
        return np.array([c.resistance for c in self.cycles])


class CycleSampler(CycleSource):
    """Harvests cycles on demand from freshly sampled conditioned windows."""

    def __init__(
        self, p: float, n1: int = 500, n2: int = 500, margin: int = DEFAULT_MARGIN
    ):
        self.p = p
        self.margin = margin
        self._sampler = ConditionedSampler(p, -n1, n2)
        self._buffer: list[Cycle] = []

    def next_cycle(self, rng: np.random.Generator) -> Cycle:
        for _ in range(1000):
            if self._buffer:
                return self._buffer.pop(0)
            w = self._sampler.sample(rng)
            self._buffer = extract_cycles(w, self.margin, exclude_origin=True)
        raise CycleSourceError(f"no cycles found in 1000 windows at p={self.p}")


def harvest_cycles(
    p: float,
    n_cycles: int,
    rng: np.random.Generator,
    n1: int = 500,
    n2: int = 500,
    margin: int = DEFAULT_MARGIN,
) -> CyclePool:
    """Sample conditioned windows until `n_cycles` non-origin cycles are collected."""
    sampler = CycleSampler(p, n1, n2, margin)
    cycles = [sampler.next_cycle(rng) for _ in range(n_cycles)]
    mean_length = float(np.mean([c.length for c in cycles]))
    logger.info("harvested cycles", p=p, n=n_cycles, mean_length=mean_length)
    return CyclePool(cycles)


def build_cycle_stationary_env(
    source: CycleSource,
    n_cycles: int,
    rng: np.random.Generator,
    origin_index: int | None = None,
):
    """Environment made of `n_cycles` i.i.d. cycles with the origin at the left
    end of cycle ``origin_index`` (the middle one by default).

    :return: ``(window, decomposition)``
    """
    from pydiverse.ladderwalk.percolation.decomposition import classify_communication

    if n_cycles < 1:
        raise ParameterError(f"n_cycles must be positive, got {n_cycles}")
    origin_index = n_cycles // 2 if origin_index is None else origin_index
    cycles = source.take(n_cycles, rng)
    p = getattr(source, "p", None)
    env = concatenate_cycles(cycles, origin_index, p=p)
    decomposition = attrs.evolve(classify_communication(env), cycles=cycles)
    return env, decomposition


def boundary_columns(env: WindowConfig, cycles: Sequence[Cycle]) -> list[int]:
    """Interior columns where consecutive cycles of a concatenation meet."""
    xs = np.cumsum([c.length for c in cycles])[:-1] + env.x_min
    return [int(x) for x in xs]
