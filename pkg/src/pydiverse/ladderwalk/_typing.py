from __future__ import annotations

from typing import Tuple, TypeVar, Union

import numpy as np

T = TypeVar("T")

# A ladder vertex (x, y) with y in {0, 1}
Vertex = Tuple[int, int]
VertexLike = Union[Vertex, int]

FloatArray = np.ndarray
BoolArray = np.ndarray


def as_vertex(v: VertexLike) -> Vertex:
    """Bare integers denote bottom row vertices ``(x, 0)``."""
    if isinstance(v, (int, np.integer)):
        return int(v), 0
    x, y = v
    return int(x), int(y)
