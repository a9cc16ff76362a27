from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from typing import Any


class ReplicaEngine(ABC):
    """Runs independent replica jobs.

    Every job carries its own random stream, so the results only depend on the
    jobs and never on how they are scheduled.
    """

    @abstractmethod
    def map(self, fn: Callable[[Any], Any], jobs: Sequence[Any]) -> list[Any]:
        """Apply `fn` to every job.

        :param fn: A picklable module level function.
        :return: The results in job order.
        """


def create_engine(name: str = "sequential", threads: int = 1) -> ReplicaEngine:
    from pydiverse.ladderwalk.engine.dask import DaskEngine
    from pydiverse.ladderwalk.engine.sequential import SequentialEngine

    if name == "sequential" or threads <= 1:
        return SequentialEngine()
    if name == "dask":
        return DaskEngine(num_workers=threads)
    raise ValueError(f"unknown engine {name!r}")
