"""Experiment commands behind the ``ladderwalk`` CLI.

Each command turns an :py:class:`ExperimentConfig` into results and artifacts
in ``cfg.out``. Random numbers are drawn from streams keyed by the master seed
and labels naming the command, bias and replica, so results are the same for
every engine and worker count.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any

import numpy as np
import pandas as pd
import structlog
from attrs import frozen

from pydiverse.ladderwalk.core.artifacts import provenance, write_csv, write_json
from pydiverse.ladderwalk.core.config import ExperimentConfig
from pydiverse.ladderwalk.corrector import (
    KappaEstimate,
    PotentialTable,
    build_potentials,
    estimate_kappa,
)
from pydiverse.ladderwalk.electrical import (
    hitting_probability_bounds,
    hitting_probability_exact,
    hitting_probability_to_infinity,
)
from pydiverse.ladderwalk.engine import ReplicaEngine, create_engine
from pydiverse.ladderwalk.errors import (
    FeasibilityError,
    InsufficientDataError,
    PreconditionError,
    WalkBoundaryError,
)
from pydiverse.ladderwalk.estimators import (
    EinsteinReport,
    EstimateCI,
    GaussianityResult,
    LambdaRow,
    SigmaMatrix,
    einstein_report,
    gaussianity_test,
    second_order_concentration,
    sigma_path_variance,
    sigma_psi_moments,
    speed_direct,
    speed_girsanov,
)
from pydiverse.ladderwalk.percolation import (
    WindowConfig,
    classify_communication,
    crossing_cluster_mask,
    harvest_cycles,
    sample_window_conditioned,
)
from pydiverse.ladderwalk.regeneration import (
    RegenRecord,
    TailDiagnostic,
    detect_regenerations,
    gaps_frame,
    regen_tail_diagnostic,
    speed_regen,
)
from pydiverse.ladderwalk.util.rng import make_stream
from pydiverse.ladderwalk.walk import ReplicaSummary, simulate

logger = structlog.get_logger(logger_name=__name__)

MAX_ROOT_TRIES = 1000
MAX_BOUNDARY_RETRIES = 3
UNBIASED_STEPS = 10_000


def sample_rooted_environment(
    p: float,
    n1: int,
    n2: int,
    rng: np.random.Generator,
    max_tries: int = MAX_ROOT_TRIES,
) -> WindowConfig:
    """Conditioned window on ``[-n1, n2]`` with the origin on the crossing cluster."""
    for _ in range(max_tries):
        env = sample_window_conditioned(p, n1, n2, rng)
        if crossing_cluster_mask(env)[env.index((0, 0))]:
            return env
    raise FeasibilityError(f"origin missed the cluster {max_tries} times (p={p})")


def default_n_steps(lam: float) -> int:
    """Path length of speed runs: about ``50 / lam**3`` steps, which leaves a few
    dozen regenerations per path."""
    if lam <= 0:
        return UNBIASED_STEPS
    return int(min(400_000, max(2_000, math.ceil(50 / lam**3))))


def girsanov_steps(lam: float, alpha: float) -> int:
    return max(1, math.ceil(alpha / lam**2))


def walk_window(lam: float, n_steps: int, margin: int) -> tuple[int, int]:
    """Half widths that a walk of `n_steps` at bias `lam` rarely leaves."""
    spread = math.ceil(5 * math.sqrt(n_steps)) + margin
    drift = math.ceil(0.7 * lam * n_steps)
    return spread, spread + drift


@frozen
class ReplicaJob:
    """One environment plus one walk on it.

    :param tilt: Bias of the recorded Girsanov weight, defaults to `lam`.
    """

    p: float
    lam: float
    n_steps: int
    seed: int
    labels: tuple
    n1: int
    n2: int
    margin: int = 10
    tilt: float | None = None
    detect_regen: bool = False
    max_retries: int = MAX_BOUNDARY_RETRIES


def run_replica(job: ReplicaJob) -> ReplicaSummary:
    """Sample an environment and walk on it; retry on a doubled window when the
    walk reaches the boundary."""
    error = None
    for attempt in range(job.max_retries + 1):
        scale = 2**attempt
        env = sample_rooted_environment(
            job.p,
            job.n1 * scale,
            job.n2 * scale,
            make_stream(job.seed, *job.labels, "env", attempt),
        )
        try:
            traj = simulate(
                env,
                job.lam,
                (0, 0),
                job.n_steps,
                (job.seed, (*job.labels, "walk", attempt)),
                tilt=job.tilt,
                margin=job.margin,
            )
        except WalkBoundaryError as e:
            logger.warning(
                "Walk reached the window boundary, retrying with a larger window",
                labels=job.labels,
                step=e.step,
                attempt=attempt,
            )
            error = e
            continue
        regen = None
        if job.detect_regen and job.lam > 0:
            regen = detect_regenerations(traj)
        return traj.summary(regen, retries=attempt)
    raise error


def run_replicas(
    engine: ReplicaEngine,
    cfg: ExperimentConfig,
    tag: str,
    lam: float,
    n_steps: int,
    *,
    tilt: float | None = None,
    detect_regen: bool = False,
) -> list[ReplicaSummary]:
    n1, n2 = walk_window(max(lam, tilt or 0.0), n_steps, cfg.margin)
    jobs = [
        ReplicaJob(
            p=cfg.p,
            lam=lam,
            n_steps=n_steps,
            seed=cfg.seed,
            labels=(tag, lam, tilt, n_steps, i),
            n1=n1,
            n2=n2,
            margin=cfg.margin,
            tilt=tilt,
            detect_regen=detect_regen,
        )
        for i in range(cfg.replicas)
    ]
    logger.info(
        "Running replicas", tag=tag, lam=lam, tilt=tilt, n_steps=n_steps,
        replicas=len(jobs),
    )
    return engine.map(run_replica, jobs)


def replicas_frame(summaries: Sequence[ReplicaSummary]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "replica": np.arange(len(summaries)),
            "n_steps": [s.n_steps for s in summaries],
            "bias": [s.bias for s in summaries],
            "tilt": [s.tilt for s in summaries],
            "displacement": [s.displacement for s in summaries],
            "M": [s.M for s in summaries],
            "A": [s.A for s in summaries],
            "log_weight": [s.log_weight for s in summaries],
            "remainder": [s.remainder for s in summaries],
            "max_sq_displacement": [s.max_sq_displacement for s in summaries],
            "n_regenerations": [
                -1 if s.regen is None else s.regen.n_confirmed for s in summaries
            ],
            "retries": [s.retries for s in summaries],
        }
    )


def _engine(cfg: ExperimentConfig, engine: ReplicaEngine | None) -> ReplicaEngine:
    return engine if engine is not None else create_engine(cfg.engine, cfg.threads)


# sample-env


def sample_env(cfg: ExperimentConfig, n_windows: int | None = None) -> pd.DataFrame:
    """Sample conditioned windows, write them and their decomposition statistics."""
    n_windows = int(cfg.attrs.get("n_windows", 10) if n_windows is None else n_windows)
    out = cfg.out_dir / "windows"
    out.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg, "sample-env")
    rows = []
    for i in range(n_windows):
        env = sample_window_conditioned(
            cfg.p, cfg.n1, cfg.n2, make_stream(cfg.seed, "sample-env", i)
        )
        decomposition = classify_communication(env, cfg.margin)
        env.write(out / f"window_{i:04d}.txt", {"seed": cfg.seed, "index": i})
        lengths = [c.length for c in decomposition.cycles]
        rows.append(
            {
                "window": i,
                "open_fraction": env.open_fraction(),
                "origin_on_cluster": bool(
                    decomposition.cluster_mask[-env.x_min, 0]
                ),
                "n_prereg": len(decomposition.prereg_xs),
                "n_cycles": len(lengths),
                "mean_cycle_length": float(np.mean(lengths)) if lengths else np.nan,
                "mean_resistance": (
                    float(np.mean([c.resistance for c in decomposition.cycles]))
                    if lengths
                    else np.nan
                ),
                "n_traps": len(decomposition.traps),
                "max_trap_length": max(decomposition.trap_lengths, default=0),
            }
        )
    frame = pd.DataFrame(rows)
    write_csv(frame, cfg.out_dir / "windows.csv", prov)
    return frame


# kappa


def kappa(cfg: ExperimentConfig, write: bool = True) -> KappaEstimate:
    pool = harvest_cycles(
        cfg.p,
        cfg.cycle_pool,
        make_stream(cfg.seed, "kappa"),
        n1=cfg.n1,
        n2=cfg.n2,
        margin=cfg.margin,
    )
    estimate = estimate_kappa(pool.cycles)
    logger.info(
        "Estimated kappa",
        kappa=estimate.value,
        se=estimate.se,
        n_cycles=estimate.n_cycles,
    )
    if write:
        prov = provenance(cfg, "kappa")
        write_json(
            {
                "kappa": estimate.value,
                "se": estimate.se,
                "ci": list(estimate.ci),
                "n_cycles": estimate.n_cycles,
                "mean_length": estimate.mean_length,
                "mean_resistance": estimate.mean_resistance,
            },
            cfg.out_dir / "kappa.json",
            prov,
        )
        write_csv(
            pd.DataFrame(
                {"length": pool.lengths(), "conductance": 1 / pool.resistances()}
            ),
            cfg.out_dir / "cycles.csv",
            prov,
        )
    return estimate


# hitting-check


def pinned_environment(
    p: float,
    lam: float,
    left: int,
    right: int | None,
    pad: int,
    rng: np.random.Generator,
) -> tuple[WindowConfig, int]:
    """Conditioned window with pre-regeneration points pinned at ``-left * step``,
    0 and ``right * step`` where ``step = floor(1 / lam)``."""
    step = max(1, math.floor(1 / lam))
    xu = -left * step
    pins = [xu, 0] + ([] if right is None else [right * step])
    n2 = (right * step if right is not None else 0) + pad
    env = sample_window_conditioned(p, -xu + pad, n2, rng, isolate_top=pins)
    return env, step


def hitting_check(cfg: ExperimentConfig, n_envs: int | None = None) -> pd.DataFrame:
    """Exact hitting probabilities of pinned environments against the closed form
    brackets."""
    n_envs = int(cfg.attrs.get("hitting_envs", 100) if n_envs is None else n_envs)
    rows = []
    for lam in cfg.hitting_lambdas:
        if lam <= 0:
            continue
        truncation = math.ceil(5 / lam)
        for left in (1, 2, 3):
            for right in (1, 2, 3, None):
                if right is None and left != 1:
                    continue
                bracket = hitting_probability_bounds(
                    left, math.inf if right is None else right, lam, cfg.lambda0
                )
                for i in range(n_envs):
                    rng = make_stream(cfg.seed, "hitting", lam, left, right, i)
                    pad = cfg.margin + (truncation if right is None else 0)
                    env, step = pinned_environment(cfg.p, lam, left, right, pad, rng)
                    u = (-left * step, 0)
                    if right is None:
                        value = hitting_probability_to_infinity(
                            env, lam, u, (0, 0), truncation
                        )
                    else:
                        value = hitting_probability_exact(
                            env, lam, u, (0, 0), (right * step, 0)
                        )
                    inside = bracket.contains(value, tol=1e-12)
                    if bracket.in_regime and not inside:
                        logger.warning(
                            "Hitting probability outside of its bracket",
                            lam=lam,
                            L=left,
                            R=right,
                            env=i,
                            value=value,
                            bracket=(bracket.lower, bracket.upper),
                        )
                    rows.append(
                        {
                            "lam": lam,
                            "L": left,
                            "R": math.inf if right is None else right,
                            "env": i,
                            "value": value,
                            "lower": bracket.lower,
                            "upper": bracket.upper,
                            "inside": inside,
                            "in_regime": bracket.in_regime,
                        }
                    )
    frame = pd.DataFrame(rows)
    write_csv(frame, cfg.out_dir / "hitting.csv", provenance(cfg, "hitting-check"))
    return frame


# speed


@frozen
class SpeedResult:
    lam: float
    n_steps: int
    direct: EstimateCI
    regen: EstimateCI | None
    tail: TailDiagnostic | None
    replicas: list[ReplicaSummary]

    def to_dict(self) -> dict[str, Any]:
        return {
            "lam": self.lam,
            "n_steps": self.n_steps,
            "direct": self.direct.to_dict(),
            "regen": None if self.regen is None else self.regen.to_dict(),
            "tail": None
            if self.tail is None
            else {
                "slope": self.tail.slope,
                "slope_se": self.tail.slope_se,
                "rate_constant": self.tail.rate_constant,
                "exponential_tail": self.tail.exponential_tail,
                "lag2_consistent": self.tail.lag2_consistent(),
                "min_rho_gap": self.tail.min_rho_gap,
                "n_gaps": self.tail.n_gaps,
            },
        }


def _regen_estimates(records: list[RegenRecord]):
    regen = tail = None
    try:
        regen = speed_regen(records)
    except InsufficientDataError as e:
        logger.warning("No regeneration speed estimate", reason=str(e))
    try:
        tail = regen_tail_diagnostic(records)
    except InsufficientDataError as e:
        logger.info("No regeneration tail diagnostic", reason=str(e))
    return regen, tail


def speed(
    cfg: ExperimentConfig,
    lam: float | None = None,
    engine: ReplicaEngine | None = None,
    write: bool = True,
) -> SpeedResult:
    """Direct and regeneration speed estimates at one bias."""
    lam = cfg.lam if lam is None else lam
    n_steps = cfg.n_steps or default_n_steps(lam)
    summaries = run_replicas(
        _engine(cfg, engine), cfg, "speed", lam, n_steps, detect_regen=True
    )
    direct = speed_direct(summaries, min_replicas=min(30, len(summaries)))
    regen, tail = (None, None)
    if lam > 0:
        regen, tail = _regen_estimates([s.regen for s in summaries])
    result = SpeedResult(lam, n_steps, direct, regen, tail, summaries)
    if write:
        prov = provenance(cfg, "speed", lam=lam)
        write_json(result, cfg.out_dir / f"speed_{lam:g}.json", prov)
        write_csv(
            replicas_frame(summaries), cfg.out_dir / f"replicas_{lam:g}.csv", prov
        )
        if lam > 0:
            write_csv(
                gaps_frame([s.regen for s in summaries]),
                cfg.out_dir / f"gaps_{lam:g}.csv",
                prov,
            )
    return result


# sigma


def potential_tables(
    cfg: ExperimentConfig, kappa_estimate: KappaEstimate, n_envs: int | None = None
) -> list[PotentialTable]:
    """``psi`` on `n_envs` rooted environments; windows without pre-regeneration
    points on both sides of the origin are counted and dropped."""
    n_envs = cfg.n_envs if n_envs is None else n_envs
    half_width = int(cfg.attrs.get("psi_half_width", 100))
    tables, skipped = [], 0
    for i in range(n_envs):
        env = sample_rooted_environment(
            cfg.p, half_width, half_width, make_stream(cfg.seed, "psi", i)
        )
        try:
            tables.append(
                build_potentials(env, kappa_estimate.value, kappa_estimate.se)
            )
        except PreconditionError:
            skipped += 1
    if skipped:
        logger.warning("Environments without potentials", n=skipped)
    return tables


@frozen
class SigmaResult:
    path_variance: EstimateCI
    gaussianity: GaussianityResult
    psi_moments: SigmaMatrix
    kappa: KappaEstimate

    def to_dict(self) -> dict[str, Any]:
        return {
            "path_variance": self.path_variance.to_dict(),
            "gaussianity": {
                "statistic": self.gaussianity.statistic,
                "pvalue": self.gaussianity.pvalue,
                "passes": self.gaussianity.passes,
            },
            "psi_moments": self.psi_moments.to_dict(),
            "cauchy_schwarz_ok": self.psi_moments.cauchy_schwarz_ok(),
            "kappa": {"value": self.kappa.value, "se": self.kappa.se},
        }


def sigma(
    cfg: ExperimentConfig,
    engine: ReplicaEngine | None = None,
    write: bool = True,
    kappa_estimate: KappaEstimate | None = None,
) -> SigmaResult:
    n_steps = cfg.n_steps or UNBIASED_STEPS
    summaries = run_replicas(_engine(cfg, engine), cfg, "sigma", 0.0, n_steps)
    path = sigma_path_variance(summaries, min_replicas=min(100, len(summaries)))
    gauss = gaussianity_test(summaries, path.value)
    if kappa_estimate is None:
        kappa_estimate = kappa(cfg, write=write)
    matrix = sigma_psi_moments(potential_tables(cfg, kappa_estimate))
    result = SigmaResult(path, gauss, matrix, kappa_estimate)
    logger.info(
        "Diffusivity",
        report={
            "path_variance": round(path.value, 5),
            "s11": round(matrix.s11, 5),
            "s12": round(matrix.s12, 5),
            "s22": round(matrix.s22, 5),
        },
    )
    if write:
        prov = provenance(cfg, "sigma")
        write_json(result, cfg.out_dir / "sigma.json", prov)
        write_csv(replicas_frame(summaries), cfg.out_dir / "replicas_sigma.csv", prov)
    return result


# einstein


def _lambda_row(cfg, engine, lam) -> LambdaRow:
    # direct and regeneration speeds share the speed run's paths; only the
    # Girsanov arm is sized by alpha
    speed_result = speed(cfg, lam, engine, write=False)
    n_girsanov = girsanov_steps(lam, cfg.alpha)
    unbiased = run_replicas(
        engine, cfg, "girsanov", 0.0, n_girsanov, tilt=lam
    )
    girsanov = speed_girsanov(unbiased, lam, check_alpha_window=False)
    return LambdaRow(
        lam=lam,
        n_steps=speed_result.n_steps,
        direct=speed_result.direct,
        regen=speed_result.regen,
        girsanov=girsanov,
        girsanov_steps=n_girsanov,
    )


def _sweep_row(cfg, engine, lam, alpha) -> tuple[LambdaRow, list[ReplicaSummary]]:
    n = girsanov_steps(lam, alpha)
    biased = run_replicas(engine, cfg, "sweep", lam, n)
    unbiased = run_replicas(engine, cfg, "girsanov", 0.0, n, tilt=lam)
    row = LambdaRow(
        lam=lam,
        n_steps=n,
        direct=speed_direct(biased, min_replicas=min(30, len(biased))),
        girsanov=speed_girsanov(unbiased, lam, check_alpha_window=False),
        alpha=alpha,
        girsanov_steps=n,
    )
    return row, unbiased


def einstein(
    cfg: ExperimentConfig, engine: ReplicaEngine | None = None, write: bool = True
) -> EinsteinReport:
    """Speeds on the bias grid against the diffusivity."""
    engine = _engine(cfg, engine)
    grid = sorted((lam for lam in cfg.lambdas if lam > 0), reverse=True)
    if not grid:
        raise PreconditionError("the bias grid has no positive bias")

    sigma_result = sigma(cfg, engine, write=write)
    rows = [_lambda_row(cfg, engine, lam) for lam in grid]

    sweep, second_order = [], None
    for alpha in sorted(set(cfg.alphas) | {cfg.alpha}):
        row, unbiased = _sweep_row(cfg, engine, grid[-1], alpha)
        sweep.append(row)
        if alpha == cfg.alpha:
            second_order = second_order_concentration(
                unbiased, sigma_result.psi_moments.estimate("s22")
            )

    report = einstein_report(
        rows,
        sigma_result.path_variance,
        sigma_result.psi_moments,
        config=cfg.result_dict(),
        provenance=provenance(cfg, "einstein"),
        alpha_sweep=sweep,
        second_order=second_order,
    )
    if write:
        write_json(report, cfg.out_dir / "einstein.json")
        write_csv(
            report.to_frame(), cfg.out_dir / "einstein.csv", report.provenance
        )
    return report
