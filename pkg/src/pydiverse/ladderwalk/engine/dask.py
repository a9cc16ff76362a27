from __future__ import annotations

import sys
import warnings
from collections.abc import Callable, Sequence
from typing import Any

import structlog

from pydiverse.ladderwalk.engine.base import ReplicaEngine
from pydiverse.ladderwalk.util import requires

try:
    import dask
except ImportError as e:
    warnings.warn(str(e), ImportWarning)
    dask = None


@requires(dask, ImportError("DaskEngine requires 'dask' to be installed."))
class DaskEngine(ReplicaEngine):
    """
    Run replicas in parallel on a single machine using `dask <https://dask.org>`_.

    :param dask_compute_kwargs:
        Keyword arguments that get passed to :py:func:`dask.compute`, most
        notably ``num_workers``. By default, dask spawns one worker process per
        CPU core.
    """

    def __init__(self, **dask_compute_kwargs):
        self.dask_compute_kwargs = dict(
            traverse=True,
            optimize_graph=False,
            scheduler="processes",
            num_workers=None,
            chunksize=1,
        )
        self.dask_compute_kwargs.update(dask_compute_kwargs)

    def map(self, fn: Callable[[Any], Any], jobs: Sequence[Any]) -> list[Any]:
        # The log stream of the parent process may not be picklable
        structlog_config = {
            k: v for k, v in structlog.get_config().items() if k != "logger_factory"
        }
        structlog_context = structlog.contextvars.get_contextvars()

        def run(job):
            structlog.configure(
                logger_factory=structlog.PrintLoggerFactory(sys.stderr),
                **structlog_config,
            )
            with structlog.contextvars.bound_contextvars(**structlog_context):
                return fn(job)

        run.__name__ = getattr(fn, "__name__", "replica")
        delayed = [dask.delayed(run, pure=False)(job) for job in jobs]
        return list(dask.compute(delayed, **self.dask_compute_kwargs)[0])
