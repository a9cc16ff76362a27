from __future__ import annotations

import pytest

from pydiverse.ladderwalk.core.experiment import ReplicaJob, run_replica, walk_window
from pydiverse.ladderwalk.engine import (
    DaskEngine,
    ReplicaEngine,
    SequentialEngine,
    create_engine,
)


def _square(x):
    return x * x


def _jobs(n=6):
    n1, n2 = walk_window(0.3, 300, 5)
    return [
        ReplicaJob(
            p=0.7,
            lam=0.3,
            n_steps=300,
            seed=1,
            labels=("engine", i),
            n1=n1,
            n2=n2,
            margin=5,
            detect_regen=True,
        )
        for i in range(n)
    ]


def test_create_engine():
    assert isinstance(create_engine(), SequentialEngine)
    # a single worker never starts a cluster
    assert isinstance(create_engine("dask", threads=1), SequentialEngine)
    with pytest.raises(ValueError):
        create_engine("ray", threads=4)


def test_sequential_engine_keeps_job_order():
    assert SequentialEngine().map(_square, [3, 1, 2]) == [9, 1, 4]


def test_replicas_are_reproducible():
    engine = SequentialEngine()
    first = engine.map(run_replica, _jobs())
    again = engine.map(run_replica, list(reversed(_jobs())))[::-1]
    assert [s.displacement for s in first] == [s.displacement for s in again]
    assert [s.log_weight for s in first] == [s.log_weight for s in again]
    assert all(s.regen is not None for s in first)
    assert all(s.bias == s.tilt == 0.3 for s in first)


def test_engine_is_abstract():
    with pytest.raises(TypeError):
        ReplicaEngine()


@pytest.mark.dask
def test_dask_engine_matches_sequential():
    jobs = _jobs(4)
    engine = create_engine("dask", threads=2)
    assert isinstance(engine, DaskEngine)
    parallel = engine.map(run_replica, jobs)
    sequential = SequentialEngine().map(run_replica, jobs)
    assert [s.displacement for s in parallel] == [s.displacement for s in sequential]
    assert [s.M for s in parallel] == pytest.approx([s.M for s in sequential])
    assert engine.map(_square, [2, 3]) == [4, 9]
