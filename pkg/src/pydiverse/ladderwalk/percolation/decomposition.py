from __future__ import annotations

import attrs
import numpy as np
from attrs import frozen

from pydiverse.ladderwalk._typing import Vertex
from pydiverse.ladderwalk.percolation.cluster import (
    backwards_mask,
    crossing_cluster_mask,
    find_preregeneration_points,
    forwards_mask,
    t_states,
    trap_components,
    trap_length,
)
from pydiverse.ladderwalk.percolation.cycles import Cycle, extract_cycles
from pydiverse.ladderwalk.percolation.window import WindowConfig


@frozen(eq=False)
class ClusterDecomposition:
    """Pre-regeneration points, cycles, backbone and traps of a window.

    The masks have shape ``(n_columns, 2)`` and are indexed by
    ``(x - x_min, y)``. Traps are the clusters of crossing cluster vertices that
    are not forwards communicating; their length is their x extent.
    """

    x_min: int
    prereg_xs: list[int]
    cycles: list[Cycle] = attrs.field(repr=False)
    cluster_mask: np.ndarray = attrs.field(repr=False)
    backbone_mask: np.ndarray = attrs.field(repr=False)
    backwards_mask: np.ndarray = attrs.field(repr=False)
    traps: list[list[Vertex]] = attrs.field(repr=False)
    trap_lengths: list[int]
    t_states: list[str] = attrs.field(repr=False)

    def on_backbone(self, v: Vertex) -> bool:
        x, y = v
        return bool(self.backbone_mask[x - self.x_min, y])

    def t_state(self, x: int) -> str:
        return self.t_states[x - self.x_min]


def classify_communication(w: WindowConfig, margin: int = 0) -> ClusterDecomposition:
    """Forwards and backwards communication, traps and T-states of a window.

    :param margin: Passed on to :py:func:`extract_cycles`.
    """
    cluster = crossing_cluster_mask(w)
    forwards = forwards_mask(w, cluster)
    backwards = backwards_mask(w, cluster)
    trap_mask = cluster.reshape(-1, 2) & ~forwards
    traps = trap_components(w, trap_mask)
    return ClusterDecomposition(
        x_min=w.x_min,
        prereg_xs=find_preregeneration_points(w, cluster),
        cycles=extract_cycles(w, margin),
        cluster_mask=cluster.reshape(-1, 2),
        backbone_mask=forwards,
        backwards_mask=backwards,
        traps=traps,
        trap_lengths=[trap_length(t) for t in traps],
        t_states=t_states(backwards),
    )
