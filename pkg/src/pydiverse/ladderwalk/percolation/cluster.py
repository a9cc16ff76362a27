from __future__ import annotations

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from pydiverse.ladderwalk._typing import Vertex
from pydiverse.ladderwalk.percolation.window import WindowConfig


def component_labels(w: WindowConfig) -> np.ndarray:
    """Open cluster label of every vertex (indexed ``2 * (x - x_min) + y``)."""
    src, dst = w.edge_lists()
    adjacency = sparse.coo_matrix(
        (np.ones(len(src)), (src, dst)), shape=(w.n_vertices, w.n_vertices)
    )
    _, labels = connected_components(adjacency, directed=False)
    return labels


def crossing_cluster_mask(w: WindowConfig) -> np.ndarray:
    """Vertices whose open cluster touches both boundary columns."""
    labels = component_labels(w)
    left = set(labels[:2].tolist())
    right = set(labels[-2:].tolist())
    return np.isin(labels, list(left & right))


def crossing_exists(w: WindowConfig) -> bool:
    """Whether an open path joins column ``x_min`` to column ``x_max``."""
    labels = component_labels(w)
    return bool(set(labels[:2].tolist()) & set(labels[-2:].tolist()))


def find_preregeneration_points(
    w: WindowConfig, cluster: np.ndarray | None = None
) -> list[int]:
    """Interior columns ``x`` whose top vertex is isolated while ``(x, 0)`` lies on
    the crossing cluster.

    The boundary columns are never reported since the edges beyond the window
    are unknown.
    """
    if cluster is None:
        cluster = crossing_cluster_mask(w)
    k = np.arange(1, w.n_columns - 1)
    isolated = (~w.vertical[k]) & (~w.h_top[k - 1]) & (~w.h_top[k])
    on_cluster = cluster[2 * k]
    return [int(x) for x in w.x_min + k[isolated & on_cluster]]


def forwards_mask(w: WindowConfig, cluster: np.ndarray | None = None) -> np.ndarray:
    """Vertices that reach the right boundary without moving left of their column.

    Boolean array of shape ``(n_columns, 2)``.
    """
    if cluster is None:
        cluster = crossing_cluster_mask(w)
    n = w.n_columns
    f = np.zeros((n, 2), dtype=bool)
    f[-1] = True
    for k in range(n - 2, -1, -1):
        h = (w.h_bottom[k], w.h_top[k])
        straight = [h[y] and f[k + 1, y] for y in (0, 1)]
        for y in (0, 1):
            f[k, y] = straight[y] or (w.vertical[k] and straight[1 - y])
    return f & cluster.reshape(n, 2)


def backwards_mask(w: WindowConfig, cluster: np.ndarray | None = None) -> np.ndarray:
    """Vertices reached from the left boundary without moving right of their column."""
    if cluster is None:
        cluster = crossing_cluster_mask(w)
    n = w.n_columns
    b = np.zeros((n, 2), dtype=bool)
    b[0] = True
    for k in range(1, n):
        h = (w.h_bottom[k - 1], w.h_top[k - 1])
        straight = [h[y] and b[k - 1, y] for y in (0, 1)]
        for y in (0, 1):
            b[k, y] = straight[y] or (w.vertical[k] and straight[1 - y])
    return b & cluster.reshape(n, 2)


def t_states(backwards: np.ndarray) -> list[str]:
    """Per column ``"<bottom><top>"`` string of backwards communication bits."""
    return [f"{int(b)}{int(t)}" for b, t in backwards]


def cluster_graph(w: WindowConfig, mask: np.ndarray | None = None) -> nx.Graph:
    """The open subgraph on the vertices selected by `mask` (all by default)."""
    if mask is None:
        mask = np.ones(w.n_vertices, dtype=bool)
    mask = np.asarray(mask).reshape(-1)
    g = nx.Graph()
    g.add_nodes_from(w.vertex(i) for i in np.flatnonzero(mask))
    for i, j in zip(*w.edge_lists()):
        if mask[i] and mask[j]:
            g.add_edge(w.vertex(i), w.vertex(j))
    return g


def trap_components(w: WindowConfig, trap_mask: np.ndarray) -> list[list[Vertex]]:
    g = cluster_graph(w, trap_mask)
    return sorted(
        (sorted(component) for component in nx.connected_components(g)),
        key=lambda c: c[0],
    )


def trap_length(component: list[Vertex]) -> int:
    xs = [x for x, _ in component]
    return max(xs) - min(xs) + 1
