from __future__ import annotations

import math
from collections.abc import Iterable

import attrs
import networkx as nx
import numpy as np
import scipy.linalg
from attrs import frozen
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from pydiverse.ladderwalk._typing import Vertex, VertexLike, as_vertex
from pydiverse.ladderwalk.errors import (
    ConnectivityError,
    NetworkError,
    ParameterError,
)
from pydiverse.ladderwalk.percolation.window import WindowConfig


def tilted_conductance(x_v: int, x_w: int, lam: float, x_ref: int = 0) -> float:
    """Conductance ``exp(lam * (x(v) + x(w) - 2 x_ref))`` of an open edge.

    The induced chain moves like the lazy biased walk conditioned on moving.
    """
    return math.exp(lam * (x_v + x_w - 2 * x_ref))


@frozen(eq=False)
class ResistorGraph:
    """Finite electrical network on ladder vertices."""

    vertices: tuple[Vertex, ...] = attrs.field(converter=tuple)
    edges: np.ndarray = attrs.field(
        converter=lambda e: np.asarray(e, dtype=np.int64).reshape(-1, 2)
    )
    conductances: np.ndarray = attrs.field(
        converter=lambda c: np.asarray(c, dtype=float).reshape(-1)
    )
    _index: dict = attrs.field(init=False, repr=False)

    def __attrs_post_init__(self):
        if len(self.edges) != len(self.conductances):
            raise ParameterError("every edge needs exactly one conductance")
        if np.any(~(self.conductances > 0)) or np.any(~np.isfinite(self.conductances)):
            raise ParameterError("conductances must be positive and finite")
        if len(self.edges) and (
            self.edges.min() < 0 or self.edges.max() >= len(self.vertices)
        ):
            raise ParameterError("edge refers to an unknown vertex")
        object.__setattr__(
            self, "_index", {v: i for i, v in enumerate(self.vertices)}
        )

    @classmethod
    def from_window(
        cls,
        w: WindowConfig,
        a: int | None = None,
        b: int | None = None,
        lam: float = 0.0,
        x_ref: int | None = None,
    ) -> ResistorGraph:
        """Network of the open edges with both endpoints in the columns ``[a, b]``.

        :param lam: Bias of the tilted conductances (0 gives unit conductances).
        :param x_ref: Column at which the tilt is normalized to 1, defaults to `a`.
        """
        a = w.x_min if a is None else a
        b = w.x_max if b is None else b
        if not w.x_min <= a < b <= w.x_max:
            raise ParameterError(f"[{a}, {b}] is not inside the window {w.span}")
        x_ref = a if x_ref is None else x_ref

        vertices = [(x, y) for x in range(a, b + 1) for y in (0, 1)]
        edges, conductances = [], []
        for x in range(a, b + 1):
            k = x - a
            v, hb, ht = w.column(x)
            if v:
                edges.append((2 * k, 2 * k + 1))
                conductances.append(tilted_conductance(x, x, lam, x_ref))
            if x < b:
                c = tilted_conductance(x, x + 1, lam, x_ref)
                if hb:
                    edges.append((2 * k, 2 * k + 2))
                    conductances.append(c)
                if ht:
                    edges.append((2 * k + 1, 2 * k + 3))
                    conductances.append(c)
        return cls(vertices, edges, conductances)

    @classmethod
    def from_edges(
        cls, edges: Iterable[tuple[VertexLike, VertexLike, float]]
    ) -> ResistorGraph:
        edges = [(as_vertex(v), as_vertex(w), float(c)) for v, w, c in edges]
        vertices = sorted({v for e in edges for v in e[:2]})
        index = {v: i for i, v in enumerate(vertices)}
        return cls(
            vertices,
            [(index[v], index[w]) for v, w, _ in edges],
            [c for *_, c in edges],
        )

    def index(self, v: VertexLike) -> int:
        v = as_vertex(v)
        try:
            return self._index[v]
        except KeyError:
            raise ParameterError(f"vertex {v} is not part of the network") from None

    def __contains__(self, v) -> bool:
        return as_vertex(v) in self._index

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def laplacian(self) -> np.ndarray:
        n = self.n_vertices
        lap = np.zeros((n, n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.add.at(lap, (i, j), -self.conductances)
        np.add.at(lap, (j, i), -self.conductances)
        np.add.at(lap, (i, i), self.conductances)
        np.add.at(lap, (j, j), self.conductances)
        return lap

    def component_of(self, v: VertexLike) -> np.ndarray:
        """Boolean mask of the vertices connected to `v`."""
        n = self.n_vertices
        adjacency = sparse.coo_matrix(
            (np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
            shape=(n, n),
        )
        _, labels = connected_components(adjacency, directed=False)
        return labels == labels[self.index(v)]

    def without_edge(self, k: int) -> ResistorGraph:
        keep = np.arange(len(self.edges)) != k
        return ResistorGraph(self.vertices, self.edges[keep], self.conductances[keep])

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.vertices)
        for (i, j), c in zip(self.edges, self.conductances):
            g.add_edge(self.vertices[i], self.vertices[j], conductance=float(c))
        return g


def _is_vertex(v) -> bool:
    if isinstance(v, (int, np.integer)):
        return True
    return (
        isinstance(v, tuple)
        and len(v) == 2
        and all(isinstance(c, (int, np.integer)) for c in v)
    )


def _terminals(g: ResistorGraph, b) -> list[int]:
    if _is_vertex(b):
        return [g.index(b)]
    return [g.index(v) for v in b]


def _dirichlet_solve(
    lap: np.ndarray, free: np.ndarray, fixed: np.ndarray, rhs_fixed: np.ndarray,
    source: np.ndarray | None = None,
) -> np.ndarray:
    """Solve ``L_ff u_f = source - L_fs u_s`` with a partial pivoting LU."""
    rhs = -lap[np.ix_(free, fixed)] @ rhs_fixed
    if source is not None:
        rhs = rhs + source
    try:
        lu = scipy.linalg.lu_factor(lap[np.ix_(free, free)], check_finite=False)
        sol = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NetworkError(f"Laplacian solve failed: {e}") from e
    if not np.all(np.isfinite(sol)):
        raise NetworkError("Laplacian solve produced non finite values")
    return sol


def effective_resistance(
    g: ResistorGraph, a: VertexLike, b: VertexLike | Iterable[VertexLike]
) -> float:
    """Effective resistance between `a` and `b`.

    `b` may also be a collection of vertices; they are shorted together and
    act as a single terminal.

    :raises ConnectivityError: if no terminal in `b` is connected to `a`.
    """
    ia = g.index(a)
    sinks = _terminals(g, b)
    if ia in sinks:
        raise ParameterError("the two terminals must differ")
    component = g.component_of(a)
    sinks = [i for i in sinks if component[i]]
    if not sinks:
        raise ConnectivityError(f"{a} is not connected to {b}")

    lap = g.laplacian()
    free = np.array([i for i in np.flatnonzero(component) if i not in sinks])
    source = (free == ia).astype(float)
    potential = _dirichlet_solve(
        lap, free, np.array(sinks), np.zeros(len(sinks)), source
    )
    return float(potential[np.flatnonzero(free == ia)[0]])


def effective_conductance(
    g: ResistorGraph, a: VertexLike, b: VertexLike | Iterable[VertexLike]
) -> float:
    return 1.0 / effective_resistance(g, a, b)


def effective_resistance_pinv(g: ResistorGraph, a: VertexLike, b: VertexLike) -> float:
    """Dense oracle ``L+_aa + L+_bb - 2 L+_ab`` on the component of `a`."""
    component = g.component_of(a)
    ib = g.index(b)
    if not component[ib]:
        raise ConnectivityError(f"{a} is not connected to {b}")
    idx = np.flatnonzero(component)
    pinv = np.linalg.pinv(g.laplacian()[np.ix_(idx, idx)], rcond=1e-13)
    i = int(np.flatnonzero(idx == g.index(a))[0])
    j = int(np.flatnonzero(idx == ib)[0])
    return float(pinv[i, i] + pinv[j, j] - 2 * pinv[i, j])


def voltage(
    g: ResistorGraph,
    source: VertexLike | Iterable[VertexLike],
    sink: VertexLike | Iterable[VertexLike],
) -> np.ndarray:
    """Harmonic potential that is 1 on `source` and 0 on `sink`.

    Equals the probability that the network's random walk visits `source` before
    `sink`. Vertices that are not connected to the terminals get ``nan``.
    """
    src = _terminals(g, source)
    snk = _terminals(g, sink)
    if set(src) & set(snk):
        raise ParameterError("source and sink overlap")
    component = g.component_of(g.vertices[src[0]])
    if not any(component[i] for i in snk):
        raise ConnectivityError(f"{source} is not connected to {sink}")

    fixed = np.array([i for i in src + snk if component[i]])
    values = np.array([1.0 if i in src else 0.0 for i in fixed])
    free = np.array(
        [i for i in np.flatnonzero(component) if i not in set(fixed.tolist())],
        dtype=np.int64,
    )
    out = np.full(g.n_vertices, np.nan)
    out[fixed] = values
    if len(free):
        out[free] = _dirichlet_solve(g.laplacian(), free, fixed, values)
    return out


def nash_williams_bound(g: ResistorGraph, a: VertexLike, b: VertexLike) -> float:
    """Lower bound on ``R_eff(a <-> b)`` from the disjoint column cuts between them.

    Every set of horizontal edges between two neighbouring columns strictly
    between `a` and `b` separates them.
    """
    (xa, _), (xb, _) = as_vertex(a), as_vertex(b)
    lo, hi = min(xa, xb), max(xa, xb)
    cut_conductance = {x: 0.0 for x in range(lo, hi)}
    for (i, j), c in zip(g.edges, g.conductances):
        (xi, _), (xj, _) = g.vertices[i], g.vertices[j]
        if xi != xj and lo <= min(xi, xj) < hi:
            cut_conductance[min(xi, xj)] += c
    if any(c == 0 for c in cut_conductance.values()):
        return math.inf
    return float(sum(1 / c for c in cut_conductance.values()))
