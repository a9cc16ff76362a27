"""Exact identities the library has to satisfy on every environment.

:py:func:`run_selftest` runs small versions of the exact oracle suites in
process and raises :py:class:`OracleFailure` at the first check that fails.
"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import structlog
from attrs import frozen

from pydiverse.ladderwalk.core.experiment import (
    pinned_environment,
    sample_rooted_environment,
)
from pydiverse.ladderwalk.corrector import build_potentials, cocycle_check
from pydiverse.ladderwalk.electrical import (
    ResistorGraph,
    effective_resistance,
    effective_resistance_pinv,
    escape_lower_bound,
    escape_probability_exact,
    expected_excursion_length,
    expected_excursion_length_oracle,
    hitting_probability_bounds,
    hitting_probability_exact,
    hitting_probability_to_infinity,
    ruin_probability_oracle,
    ruin_probability_r,
)
from pydiverse.ladderwalk.errors import OracleFailure, PreconditionError
from pydiverse.ladderwalk.percolation import (
    crossing_cluster_mask,
    crossing_probability,
    enumerate_conditioned_distribution,
    find_preregeneration_points,
    sample_window_conditioned,
)
from pydiverse.ladderwalk.regeneration import detect_regenerations, replay_check
from pydiverse.ladderwalk.util.rng import make_stream
from pydiverse.ladderwalk.walk import (
    KernelTable,
    finite_difference_nu,
    finite_difference_second_ratio,
    log_p_second_derivative_ratio,
    martingale_checks,
    nu,
    path_distribution,
    simulate,
    transition_row,
    weighted_endpoint_distribution,
)

logger = structlog.get_logger(logger_name=__name__)


@frozen
class CheckResult:
    name: str
    residual: float
    tolerance: float


def _expect(check: str, residual: float, tolerance: float, what: str) -> CheckResult:
    if not residual <= tolerance:
        raise OracleFailure(check, f"{what}: {residual:.3e} > {tolerance:.1e}")
    return CheckResult(check, float(residual), tolerance)


def _windows(seed: int, name: str, n: int, p_values=(0.3, 0.5, 0.7), half=12):
    for i in range(n):
        p = p_values[i % len(p_values)]
        yield sample_window_conditioned(p, half, half, make_stream(seed, name, i))


def check_kernel_rows(seed: int) -> CheckResult:
    worst = 0.0
    for env in _windows(seed, "kernel-rows", 30):
        for lam in (0.0, 0.1, 0.5, 1.0):
            table = KernelTable.build(env, lam)
            rows = table.prob[table.usable].sum(axis=1)
            worst = max(worst, float(np.abs(rows - 1).max()))
    return _expect("kernel-rows", worst, 1e-12, "row sum deviates from 1")


def check_derivatives(seed: int) -> CheckResult:
    worst = 0.0
    for env in _windows(seed, "derivatives", 10):
        for x in range(env.x_min + 1, env.x_max):
            for v in ((x, 0), (x, 1)):
                for w in transition_row(env, 0.0, v):
                    worst = max(
                        worst,
                        abs(nu(env, v, w) - finite_difference_nu(env, v, w)),
                        abs(
                            log_p_second_derivative_ratio(env, v, w)
                            - finite_difference_second_ratio(env, v, w)
                        ),
                    )
    return _expect("derivatives", worst, 1e-6, "finite difference mismatch")


def check_martingale(seed: int) -> CheckResult:
    worst = 0.0
    for i, env in enumerate(_windows(seed, "martingale", 10, half=60)):
        if not crossing_cluster_mask(env)[env.index((0, 0))]:
            worst = max(worst, martingale_checks(env))
            continue
        traj = simulate(env, 0.0, (0, 0), 200, (seed, ("selftest", "martingale", i)))
        worst = max(worst, martingale_checks(env, trajectory=traj))
    return _expect("martingale", worst, 1e-10, "martingale identity violated")


def check_sampler(seed: int) -> CheckResult:
    worst = 0.0
    for p in (0.3, 0.5, 0.7):
        exact = enumerate_conditioned_distribution(p, 3, 3)
        dp = crossing_probability(p, 3, 3)
        worst = max(worst, abs(dp - exact.crossing_probability) / dp)
    return _expect("sampler", worst, 1e-10, "transfer matrix crossing probability")


def check_resistance(seed: int) -> CheckResult:
    worst = 0.0
    for env in _windows(seed, "resistance", 30, half=5):
        for lam in (0.0, 0.3):
            g = ResistorGraph.from_window(env, lam=lam)
            component = g.component_of((env.x_min, 0))
            others = [g.vertices[i] for i in np.flatnonzero(component)][1:]
            for b in others[:5]:
                r = effective_resistance(g, (env.x_min, 0), b)
                oracle = effective_resistance_pinv(g, (env.x_min, 0), b)
                worst = max(worst, abs(r - oracle) / max(1.0, oracle))
    return _expect("resistance", worst, 1e-10, "effective resistance vs pinv")


def check_potentials(seed: int) -> CheckResult:
    """Harmonicity of ``psi`` and the increment bounds of ``phi`` and ``psi``."""
    worst, kappa = 0.0, 0.8
    for i in range(10):
        env = sample_rooted_environment(0.7, 60, 60, make_stream(seed, "potentials", i))
        try:
            table = build_potentials(env, kappa)
        except PreconditionError:
            continue
        d_phi, d_psi = table.max_increments()
        worst = max(
            worst,
            table.harmonicity_residual(),
            max(d_phi - 1, 0.0),
            max(d_psi - kappa, 0.0),
        )
    return _expect("potentials", worst, 1e-9, "harmonicity or increment bound")


def check_girsanov(seed: int) -> CheckResult:
    worst = 0.0
    for env in _windows(seed, "girsanov", 6, half=8):
        for lam in (0.1, 0.3):
            for n in (1, 4, 6):
                weighted = weighted_endpoint_distribution(env, lam, (0, 0), n)
                exact = path_distribution(env, lam, (0, 0), n)
                for v in set(weighted) | set(exact):
                    worst = max(worst, abs(weighted.get(v, 0.0) - exact.get(v, 0.0)))
    return _expect("girsanov", worst, 1e-12, "reweighted path sum")


def check_ruin(seed: int) -> CheckResult:
    worst = 0.0
    for lam in (1e-4, 0.1, 0.5):
        for m in (2, 5, 12, 20):
            for i in range(1, m + 1):
                worst = max(
                    worst,
                    abs(
                        ruin_probability_r(i, m, lam)
                        - ruin_probability_oracle(i, m, lam)
                    ),
                )
            excursion = expected_excursion_length(m, lam)
            oracle = expected_excursion_length_oracle(m, lam)
            worst = max(worst, abs(excursion - oracle) / oracle)
    limit = max(
        abs(ruin_probability_r(m - 1, m, 1e-4) - (2 * m - 3) / (2 * m - 2))
        for m in range(3, 21)
    )
    _expect("ruin", limit, 1e-3, "small bias limit of r_(m-1)")
    return _expect("ruin", worst, 1e-10, "ruin probability vs linear solve")


def check_escape(seed: int) -> CheckResult:
    worst = 0.0
    for lam in (0.2, 0.5):
        t = math.ceil(5 / lam)
        for env in _windows(seed, f"escape-{lam}", 5, (0.7,), half=3 * t):
            xs = [x for x in find_preregeneration_points(env) if abs(x) <= t]
            for x in xs[:3]:
                try:
                    value = escape_probability_exact(env, lam, (x, 0)).value
                except PreconditionError:
                    continue
                worst = max(worst, escape_lower_bound(lam) - value)
    return _expect("escape", worst, 1e-12, "escape probability below its bound")


def check_hitting(seed: int) -> CheckResult:
    worst = 0.0
    for lam in (0.05, 0.1):
        for left in (1, 2, 3):
            for right in (1, 2, 3):
                bracket = hitting_probability_bounds(left, right, lam)
                env, step = pinned_environment(
                    0.7, lam, left, right, 2,
                    make_stream(seed, "hitting", lam, left, right),
                )
                value = hitting_probability_exact(
                    env, lam, (-left * step, 0), (0, 0), (right * step, 0)
                )
                worst = max(worst, bracket.lower - value, value - bracket.upper)
        truncation = math.ceil(5 / lam)
        env, step = pinned_environment(
            0.7, lam, 1, None, truncation + 2, make_stream(seed, "hitting", lam, "inf")
        )
        value = hitting_probability_to_infinity(
            env, lam, (-step, 0), (0, 0), truncation
        )
        worst = max(worst, value - hitting_probability_bounds(1, math.inf, lam).upper)
    return _expect("hitting", worst, 1e-12, "hitting probability outside its bracket")


def check_cocycle(seed: int) -> CheckResult:
    worst = 0.0
    for i in range(5):
        env = sample_rooted_environment(0.7, 60, 60, make_stream(seed, "cocycle", i))
        try:
            table = build_potentials(env, 1.0)
        except PreconditionError:
            continue
        inner = [x for x in table.prereg_xs if 0 < x][1:-1]
        if not inner:
            continue
        try:
            worst = max(worst, cocycle_check(env, (inner[0], 0)))
        except PreconditionError:
            continue
        # shifts by an upper-row vertex are reported, not asserted
        try:
            upper = cocycle_check(env, (inner[0], 1))
        except PreconditionError:
            continue
        logger.info("Cocycle deviation for an upper-row shift", deviation=upper)
    return _expect("cocycle", worst, 1e-8, "psi is not additive under shifts")


def check_regeneration(seed: int) -> CheckResult:
    failures = 0
    for i in range(3):
        env = sample_rooted_environment(0.7, 100, 600, make_stream(seed, "regen", i))
        stream = (seed, ("selftest", "regen", i))
        traj = simulate(env, 0.3, (0, 0), 1000, stream, margin=5)
        failures += not replay_check(traj, detect_regenerations(traj))
    return _expect(
        "regeneration", failures, 0, "regeneration times revisited on replay"
    )


CHECKS: tuple[tuple[str, Callable[[int], CheckResult]], ...] = (
    ("kernel-rows", check_kernel_rows),
    ("derivatives", check_derivatives),
    ("martingale", check_martingale),
    ("sampler", check_sampler),
    ("resistance", check_resistance),
    ("potentials", check_potentials),
    ("girsanov", check_girsanov),
    ("ruin", check_ruin),
    ("escape", check_escape),
    ("hitting", check_hitting),
    ("cocycle", check_cocycle),
    ("regeneration", check_regeneration),
)


def run_selftest(seed: int = 0, only: list[str] | None = None) -> list[CheckResult]:
    """Run the exact checks in order.

    :raises OracleFailure: at the first failing check.
    """
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        result = check(seed)
        logger.info("Check passed", check=name, residual=result.residual)
        results.append(result)
    return results
