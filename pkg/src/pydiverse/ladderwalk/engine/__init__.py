from __future__ import annotations

from .base import ReplicaEngine, create_engine
from .dask import DaskEngine
from .sequential import SequentialEngine

__all__ = [
    "ReplicaEngine",
    "SequentialEngine",
    "DaskEngine",
    "create_engine",
]
