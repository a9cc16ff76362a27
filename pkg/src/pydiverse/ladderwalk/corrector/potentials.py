from __future__ import annotations

import math
from collections.abc import Iterable
from pathlib import Path

import attrs
import numpy as np
import pandas as pd
import structlog
from attrs import frozen

from pydiverse.ladderwalk._typing import VertexLike, as_vertex
from pydiverse.ladderwalk.electrical.network import (
    ResistorGraph,
    effective_resistance,
    voltage,
)
from pydiverse.ladderwalk.errors import InsufficientDataError, PreconditionError
from pydiverse.ladderwalk.percolation.cluster import (
    crossing_cluster_mask,
    find_preregeneration_points,
)
from pydiverse.ladderwalk.percolation.cycles import Cycle
from pydiverse.ladderwalk.percolation.window import WindowConfig
from pydiverse.ladderwalk.util.stats import normal_quantile, ratio_estimate
from pydiverse.ladderwalk.walk.kernel import KernelTable

logger = structlog.get_logger(logger_name=__name__)

MIN_KAPPA_CYCLES = 100


@frozen
class KappaEstimate:
    """``kappa = E[L] / E[1/C]`` with its delta method standard error.

    Unpacks as ``(value, se)``.
    """

    value: float
    se: float
    n_cycles: int
    mean_length: float
    mean_resistance: float
    confidence: float = 0.95

    def __iter__(self):
        return iter((self.value, self.se))

    @property
    def ci(self) -> tuple[float, float]:
        half = normal_quantile(self.confidence) * self.se
        return self.value - half, self.value + half


def _cycle_pairs(cycles) -> tuple[np.ndarray, np.ndarray]:
    lengths, resistances = [], []
    for c in cycles:
        if isinstance(c, Cycle):
            lengths.append(c.length)
            resistances.append(c.resistance)
        else:
            length, conductance = c
            lengths.append(length)
            resistances.append(1 / conductance)
    return np.asarray(lengths, dtype=float), np.asarray(resistances, dtype=float)


def estimate_kappa(
    cycles: Iterable[Cycle | tuple[float, float]],
    confidence: float = 0.95,
    min_cycles: int = MIN_KAPPA_CYCLES,
) -> KappaEstimate:
    """Ratio of means ``mean(L) / mean(1/C)`` over cycles that don't contain the origin.

    :param cycles: :py:class:`Cycle` objects or ``(L, C)`` pairs.
    """
    lengths, resistances = _cycle_pairs(cycles)
    if len(lengths) == 0:
        raise InsufficientDataError("no cycles given")
    if len(lengths) < min_cycles:
        raise InsufficientDataError(
            f"kappa needs at least {min_cycles} cycles, got {len(lengths)}"
        )
    value, se = ratio_estimate(lengths, resistances)
    return KappaEstimate(
        value, se, len(lengths), float(lengths.mean()), float(resistances.mean()),
        confidence,
    )


def eta_increments(cycles, kappa: float) -> np.ndarray:
    """``L_k - kappa / C_k``; centered when `kappa` is exact."""
    lengths, resistances = _cycle_pairs(cycles)
    return lengths - kappa * resistances


@frozen(eq=False)
class PotentialTable:
    """``phi``, ``psi`` and ``chi`` on the vertices of a window.

    Arrays are indexed like the window's vertices; ``nan`` marks vertices
    without a value (off the crossing cluster or outside the outermost
    pre-regeneration points).
    """

    env: WindowConfig = attrs.field(repr=False)
    kappa: float
    kappa_se: float
    phi: np.ndarray = attrs.field(repr=False)
    psi: np.ndarray = attrs.field(repr=False)
    chi: np.ndarray = attrs.field(repr=False)
    prereg_xs: list[int] = attrs.field(repr=False)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.psi)

    def _value(self, arr: np.ndarray, v: VertexLike) -> float:
        return float(arr[self.env.index(as_vertex(v))])

    def phi_at(self, v: VertexLike) -> float:
        return self._value(self.phi, v)

    def psi_at(self, v: VertexLike) -> float:
        return self._value(self.psi, v)

    def chi_at(self, v: VertexLike) -> float:
        return self._value(self.chi, v)

    def to_frame(self) -> pd.DataFrame:
        idx = np.flatnonzero(self.defined)
        return pd.DataFrame(
            {
                "vertex_x": self.env.x_min + idx // 2,
                "vertex_y": idx % 2,
                "phi": self.phi[idx],
                "psi": self.psi[idx],
                "chi": self.chi[idx],
            }
        )

    def harmonicity_residual(self) -> float:
        """Largest ``|E^v[psi(Y_1)] - psi(v)|`` over vertices whose neighbours all
        carry a value."""
        table = KernelTable.build(self.env, 0.0)
        n = self.env.n_vertices
        worst = 0.0
        for i in np.flatnonzero(self.defined & table.usable):
            targets = (i - 2, i + 2, i ^ 1, i)
            mean = 0.0
            for outcome, j in enumerate(targets):
                p = table.prob[i, outcome]
                if p == 0:
                    continue
                if not (0 <= j < n) or np.isnan(self.psi[j]):
                    break
                mean += p * self.psi[j]
            else:
                worst = max(worst, abs(mean - self.psi[i]))
        return worst

    def max_increments(self) -> tuple[float, float]:
        """Largest ``|phi(v) - phi(w)|`` and ``|psi(v) - psi(w)|`` over open edges."""
        src, dst = self.env.edge_lists()
        ok = self.defined[src] & self.defined[dst]
        if not ok.any():
            return 0.0, 0.0
        d_phi = np.abs(self.phi[src[ok]] - self.phi[dst[ok]]).max()
        d_psi = np.abs(self.psi[src[ok]] - self.psi[dst[ok]]).max()
        return float(d_phi), float(d_psi)


def _block_potentials(env: WindowConfig, a: int, b: int):
    g = ResistorGraph.from_window(env, a, b)
    resistance = effective_resistance(g, (a, 0), (b, 0))
    volts = voltage(g, (b, 0), (a, 0))
    return g, resistance, volts


def build_potentials(
    env: WindowConfig, kappa: float, kappa_se: float = 0.0
) -> PotentialTable:
    """Harmonic potentials of `env`.

    ``phi`` is 0 at the left pre-regeneration point of the block containing the
    origin and grows by ``1 / C`` across every block. Inside a block from ``a`` to
    ``b``, ``phi(v) = phi(a) + P^v(T_b < T_a) / C``, the voltage of a unit current
    from ``a`` to ``b``. Then ``psi = kappa * (phi - phi(0))`` and
    ``chi = x - psi``.
    """
    origin = (0, 0)
    if not env.contains(origin) or not crossing_cluster_mask(env)[env.index(origin)]:
        raise PreconditionError("the origin is not on the crossing cluster")
    prereg = find_preregeneration_points(env)
    left = [x for x in prereg if x <= 0]
    right = [x for x in prereg if x > 0]
    if not left or not right:
        raise PreconditionError(
            "need pre-regeneration points on both sides of the origin"
        )

    phi = np.full(env.n_vertices, np.nan)
    anchor = prereg.index(left[-1])
    level = {prereg[anchor]: 0.0}
    for a, b in zip(prereg[anchor:], prereg[anchor + 1 :]):
        g, resistance, volts = _block_potentials(env, a, b)
        _assign(env, phi, g, volts, level[a], resistance, b)
        level[b] = level[a] + resistance
    for a, b in reversed(list(zip(prereg[: anchor + 1], prereg[1 : anchor + 1]))):
        g, resistance, volts = _block_potentials(env, a, b)
        level[a] = level[b] - resistance
        _assign(env, phi, g, volts, level[a], resistance, b)
    phi[env.index((prereg[-1], 0))] = level[prereg[-1]]

    psi = kappa * (phi - phi[env.index(origin)])
    x = np.repeat(env.xs, 2).astype(float)
    return PotentialTable(env, kappa, kappa_se, phi, psi, x - psi, prereg)


def _assign(env, phi, g: ResistorGraph, volts, base, resistance, b):
    for k, (x, y) in enumerate(g.vertices):
        if x < b and not math.isnan(volts[k]):
            phi[env.index((x, y))] = base + resistance * volts[k]


def cocycle_check(
    env: WindowConfig,
    u: VertexLike,
    kappa: float = 1.0,
    test_vertices: Iterable[VertexLike] | None = None,
) -> float:
    """``max |psi(w, u + v) - psi(w, u) - psi(theta^u w, v)|`` over test vertices.

    For ``y(u) = 1`` the shift also swaps the rows.
    """
    ux, uy = as_vertex(u)
    table = build_potentials(env, kappa)
    if np.isnan(table.psi_at((ux, uy))):
        raise PreconditionError(f"psi is undefined at {(ux, uy)}")
    shifted_env = env.shift(ux)
    if uy == 1:
        shifted_env = shifted_env.flip()
    shifted = build_potentials(shifted_env, kappa)

    if test_vertices is None:
        test_vertices = [
            shifted_env.vertex(i) for i in np.flatnonzero(shifted.defined)
        ]
    deviation, n_checked = 0.0, 0
    for v in test_vertices:
        vx, vy = as_vertex(v)
        target = (ux + vx, (uy + vy) % 2)
        if not env.contains(target) or not shifted_env.contains((vx, vy)):
            continue
        lhs = table.psi_at(target) - table.psi_at((ux, uy))
        rhs = shifted.psi_at((vx, vy))
        if math.isnan(lhs) or math.isnan(rhs):
            continue
        deviation = max(deviation, abs(lhs - rhs))
        n_checked += 1
    if n_checked == 0:
        raise PreconditionError("no test vertex has psi values in both windows")
    return deviation


def write_potentials_csv(
    table: PotentialTable, path: str | Path, provenance: dict | None = None
):
    from pydiverse.ladderwalk.core.artifacts import write_csv

    write_csv(table.to_frame(), path, provenance)
