from __future__ import annotations

import math

import pytest

from pydiverse.ladderwalk.core import experiment
from pydiverse.ladderwalk.core.artifacts import read_csv, read_json
from pydiverse.ladderwalk.core.config import ExperimentConfig, LadderwalkConfig
from pydiverse.ladderwalk.errors import PreconditionError, WalkBoundaryError
from pydiverse.ladderwalk.percolation import crossing_cluster_mask
from pydiverse.ladderwalk.util.rng import make_stream


def _cfg(tmp_path, **changes) -> ExperimentConfig:
    values = dict(
        p=0.7,
        n1=40,
        n2=40,
        replicas=30,
        seed=5,
        cycle_pool=150,
        n_envs=8,
        out=str(tmp_path / "out"),
        attrs={"psi_half_width": 200},
    )
    values.update(changes)
    return ExperimentConfig(**values)


def test_step_counts():
    assert experiment.default_n_steps(0.0) == experiment.UNBIASED_STEPS
    assert experiment.default_n_steps(0.5) == 2_000
    assert experiment.default_n_steps(0.05) == 400_000
    assert experiment.girsanov_steps(0.1, 1.0) == 100
    assert experiment.girsanov_steps(0.2, 0.5) == 13


def test_rooted_environment():
    for i in range(5):
        env = experiment.sample_rooted_environment(
            0.5, 10, 10, make_stream(0, "rooted", i)
        )
        assert crossing_cluster_mask(env)[env.index((0, 0))]


def test_pinned_environment():
    env, step = experiment.pinned_environment(0.6, 0.25, 2, 3, 4, make_stream(0, "pin"))
    assert step == 4
    assert (env.x_min, env.x_max) == (-12, 16)
    for x in (-8, 0, 12):
        assert not env.vertical[x - env.x_min]


def test_replica_retries_then_gives_up():
    # 500 unbiased steps leave [-5, 5]
    job = experiment.ReplicaJob(
        p=0.7, lam=0.0, n_steps=500, seed=0, labels=("narrow",), n1=3, n2=3,
        margin=1, max_retries=1,
    )
    with pytest.raises(WalkBoundaryError):
        experiment.run_replica(job)


def test_replica_retry_on_a_doubled_window(monkeypatch):
    widths = []
    simulate = experiment.simulate

    def flaky(env, *args, **kwargs):
        widths.append(env.x_max)
        if len(widths) == 1:
            raise WalkBoundaryError(7, (env.x_max - 1, 0))
        return simulate(env, *args, **kwargs)

    monkeypatch.setattr(experiment, "simulate", flaky)
    job = experiment.ReplicaJob(
        p=0.7, lam=0.2, n_steps=50, seed=0, labels=("retry",), n1=40, n2=60,
    )
    summary = experiment.run_replica(job)
    assert widths == [60, 120]
    assert summary.retries == 1
    assert summary.n_steps == 50


def test_sample_env(tmp_path):
    cfg = _cfg(tmp_path)
    frame = experiment.sample_env(cfg, 3)
    assert len(frame) == 3
    assert frame["open_fraction"].between(0, 1).all()
    assert len(list((cfg.out_dir / "windows").glob("window_*.txt"))) == 3


def test_speed_is_reproducible(tmp_path):
    cfg = _cfg(tmp_path, lam=0.5, n_steps=600)
    first = experiment.speed(cfg)
    again = experiment.speed(cfg, write=False)
    assert first.direct.value == again.direct.value
    assert first.n_steps == 600
    assert 0 < first.direct.value < 1
    assert (cfg.out_dir / "speed_0.5.json").is_file()
    replicas = read_csv(cfg.out_dir / "replicas_0.5.csv")
    assert len(replicas) == 30
    assert replicas["displacement"].tolist() == [
        s.displacement for s in first.replicas
    ]
    assert (cfg.out_dir / "gaps_0.5.csv").is_file()

    other = experiment.speed(cfg.evolve(seed=6), write=False)
    assert other.direct.value != first.direct.value


def _speed_artifacts(cfg) -> dict[str, bytes]:
    experiment.speed(cfg)
    return {
        path.name: path.read_bytes() for path in sorted(cfg.out_dir.iterdir())
    }


@pytest.mark.parametrize("threads", [4, 16])
def test_speed_artifacts_do_not_depend_on_threads(tmp_path, threads):
    cfg = _cfg(tmp_path, lam=0.5, n_steps=300, replicas=10)
    single = _speed_artifacts(cfg)
    many = _speed_artifacts(cfg.evolve(threads=threads))
    assert set(single) == {"speed_0.5.json", "replicas_0.5.csv", "gaps_0.5.csv"}
    assert many == single

    config = read_json(cfg.out_dir / "speed_0.5.json")["provenance"]["config"]
    assert "threads" not in config
    assert "engine" not in config
    assert config["seed"] == 5


def test_thread_override_leaves_artifacts_unchanged(tmp_path, monkeypatch):
    path = tmp_path / "ladderwalk.yaml"
    path.write_text(
        "p: 0.7\nn1: 40\nn2: 40\nreplicas: 10\nseed: 5\nlam: 0.5\nn_steps: 300\n"
        f"out: {tmp_path / 'out'}\n"
    )
    single = _speed_artifacts(LadderwalkConfig(path).get())
    monkeypatch.setenv("LADDER_THREADS", "8")
    cfg = LadderwalkConfig(path).get()
    assert cfg.threads == 8
    assert _speed_artifacts(cfg) == single


@pytest.mark.dask
def test_dask_speed_artifacts_match_sequential(tmp_path):
    cfg = _cfg(tmp_path, lam=0.5, n_steps=300, replicas=10)
    single = _speed_artifacts(cfg)
    assert _speed_artifacts(cfg.evolve(engine="dask", threads=2)) == single


def test_unbiased_speed_has_no_regenerations(tmp_path):
    cfg = _cfg(tmp_path, lam=0.0, n_steps=200)
    result = experiment.speed(cfg, write=False)
    assert result.regen is None
    assert all(s.regen is None for s in result.replicas)


def test_hitting_check(tmp_path):
    cfg = _cfg(tmp_path, hitting_lambdas=[0.1])
    frame = experiment.hitting_check(cfg, n_envs=2)
    assert len(frame) == 20
    assert frame["in_regime"].all()
    assert frame["inside"].all()
    assert set(frame["R"]) == {1, 2, 3, math.inf}


def test_sigma(tmp_path):
    cfg = _cfg(tmp_path, n_steps=200, replicas=100)
    result = experiment.sigma(cfg)
    assert result.path_variance.value > 0
    assert result.psi_moments.n_environments >= 2
    assert result.kappa.n_cycles == 150
    data = read_json(cfg.out_dir / "sigma.json")
    assert set(data) >= {"provenance", "path_variance", "psi_moments", "kappa"}
    assert (cfg.out_dir / "kappa.json").is_file()


@pytest.mark.slow
def test_einstein(tmp_path):
    cfg = _cfg(
        tmp_path, lambdas=[0.3, 0.5], alphas=[0.5], alpha=1.0, n_steps=400
    )
    report = experiment.einstein(cfg)
    assert [row.lam for row in report.rows] == [0.5, 0.3]
    assert [s["alpha"] for s in report.alpha_sweep] == [0.5, 1.0]
    assert report.second_order is not None
    assert report.verdict.trend in {
        "flat", "decreasing_in_lambda", "increasing_in_lambda", "mixed"
    }

    data = read_json(cfg.out_dir / "einstein.json")
    assert data["schema_version"] == 1
    assert data["provenance"]["command"] == "einstein"
    assert data["config"]["lambdas"] == [0.3, 0.5]
    frame = read_csv(cfg.out_dir / "einstein.csv")
    assert set(frame["estimator"]) >= {"direct", "girsanov", "ratio", "sigma_s11"}
    direct = frame[frame["estimator"] == "direct"].set_index("lam")["n_steps"]
    girsanov = frame[frame["estimator"] == "girsanov"].set_index("lam")["n_steps"]
    assert direct.to_dict() == {0.5: 400, 0.3: 400}
    assert girsanov.to_dict() == {
        0.5: experiment.girsanov_steps(0.5, 1.0),
        0.3: experiment.girsanov_steps(0.3, 1.0),
    }


def test_einstein_needs_a_positive_bias(tmp_path):
    with pytest.raises(PreconditionError):
        experiment.einstein(_cfg(tmp_path, lambdas=[0.0]))
