from __future__ import annotations

from collections.abc import Callable, Sequence
from typing import Any

from pydiverse.ladderwalk.engine.base import ReplicaEngine


class SequentialEngine(ReplicaEngine):
    """Runs all jobs one after the other in the calling process."""

    def map(self, fn: Callable[[Any], Any], jobs: Sequence[Any]) -> list[Any]:
        return [fn(job) for job in jobs]
