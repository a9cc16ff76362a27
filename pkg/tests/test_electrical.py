from __future__ import annotations

import math

import numpy as np
import pytest

from pydiverse.ladderwalk.electrical import (
    ResistorGraph,
    effective_conductance,
    effective_resistance,
    effective_resistance_pinv,
    escape_lower_bound,
    escape_probability_exact,
    expected_excursion_length,
    expected_excursion_length_oracle,
    hitting_probability_bounds,
    hitting_probability_exact,
    hitting_probability_to_infinity,
    lazy_hitting_probability,
    nash_williams_bound,
    ruin_probability_oracle,
    ruin_probability_r,
    visit_count_pmf,
    voltage,
)
from pydiverse.ladderwalk.electrical.hitting import (
    SHARP_UPPER_LIMIT,
    intermediate_upper_bound,
)
from pydiverse.ladderwalk.errors import (
    ConnectivityError,
    ParameterError,
    PreconditionError,
)
from pydiverse.ladderwalk.percolation import WindowConfig, sample_window_conditioned
from pydiverse.ladderwalk.util.rng import make_stream
from pydiverse.ladderwalk.walk import partition_function
from tests.util.vectors import loop_window, trap_window, window


def _line_resistance(lam: float, a: int, b: int, x_ref: int = 0) -> float:
    return sum(math.exp(-lam * (2 * k + 1 - 2 * x_ref)) for k in range(a, b))


class TestNetwork:
    def test_series_and_parallel(self):
        g = ResistorGraph.from_edges([((0, 0), (1, 0), 1.0), ((1, 0), (2, 0), 0.5)])
        assert effective_resistance(g, (0, 0), (2, 0)) == pytest.approx(3.0)

        g = ResistorGraph.from_edges(
            [((0, 0), (1, 0), 1.0), ((1, 0), (2, 0), 0.5), ((0, 0), (2, 0), 3.0)]
        )
        assert effective_resistance(g, (0, 0), (2, 0)) == pytest.approx(0.3)
        assert effective_conductance(g, (0, 0), (2, 0)) == pytest.approx(1 / 0.3)
        assert effective_resistance_pinv(g, (0, 0), (2, 0)) == pytest.approx(0.3)

    def test_cycle_block(self):
        g = ResistorGraph.from_window(loop_window(), 0, 3)
        assert effective_resistance(g, (0, 0), (3, 0)) == pytest.approx(2.75)

    def test_dead_ends_carry_no_current(self):
        g = ResistorGraph.from_window(trap_window())
        assert effective_resistance(g, (0, 0), (10, 0)) == pytest.approx(10.0)

    def test_tilted_line(self):
        lam = 0.3
        g = ResistorGraph.from_window(WindowConfig.bottom_line(0, 4), lam=lam)
        assert effective_resistance(g, (0, 0), (4, 0)) == pytest.approx(
            _line_resistance(lam, 0, 4), rel=1e-12
        )

    def test_shorted_terminals(self):
        g = ResistorGraph.from_window(WindowConfig.all_open(0, 2))
        single = effective_resistance(g, (0, 0), (2, 0))
        shorted = effective_resistance(g, (0, 0), [(2, 0), (2, 1)])
        assert shorted < single

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_pseudo_inverse(self, seed):
        env = sample_window_conditioned(0.5, 6, 6, make_stream(seed, "pinv"))
        g = ResistorGraph.from_window(env, lam=0.2)
        a = (env.x_min, 0)
        component = g.component_of(a)
        for i in np.flatnonzero(component)[1:6]:
            b = g.vertices[i]
            if b == a:
                continue
            assert effective_resistance(g, a, b) == pytest.approx(
                effective_resistance_pinv(g, a, b), rel=1e-9
            )

    def test_disconnected(self):
        g = ResistorGraph.from_window(window(0, 3, bottom=[0, 2]))
        with pytest.raises(ConnectivityError):
            effective_resistance(g, (0, 0), (3, 0))
        with pytest.raises(ConnectivityError):
            effective_resistance_pinv(g, (0, 0), (3, 0))

    def test_invalid_arguments(self):
        g = ResistorGraph.from_window(WindowConfig.bottom_line(0, 3))
        with pytest.raises(ParameterError):
            effective_resistance(g, (1, 0), (1, 0))
        with pytest.raises(ParameterError):
            effective_resistance(g, (0, 0), (7, 0))
        with pytest.raises(ParameterError):
            ResistorGraph.from_edges([((0, 0), (1, 0), -1.0)])
        with pytest.raises(ParameterError):
            ResistorGraph.from_window(WindowConfig.bottom_line(0, 3), 2, 5)

    def test_voltage_is_linear_on_a_line(self):
        g = ResistorGraph.from_window(WindowConfig.bottom_line(0, 4))
        u = voltage(g, (0, 0), (4, 0))
        bottom = [u[g.index((x, 0))] for x in range(5)]
        assert bottom == pytest.approx([1.0, 0.75, 0.5, 0.25, 0.0])
        assert np.isnan(u[g.index((2, 1))])
        with pytest.raises(ParameterError):
            voltage(g, (0, 0), [(0, 0), (4, 0)])

    def test_nash_williams(self):
        line = ResistorGraph.from_window(WindowConfig.bottom_line(0, 6))
        assert nash_williams_bound(line, (0, 0), (6, 0)) == pytest.approx(6.0)

        g = ResistorGraph.from_window(loop_window())
        bound = nash_williams_bound(g, (-6, 0), (6, 0))
        assert bound <= effective_resistance(g, (-6, 0), (6, 0)) + 1e-12

        broken = ResistorGraph.from_window(window(0, 3, bottom=[0, 2]))
        assert nash_williams_bound(broken, (0, 0), (3, 0)) == math.inf

    def test_to_networkx(self):
        g = ResistorGraph.from_window(loop_window(), 0, 3)
        nx_graph = g.to_networkx()
        assert nx_graph.number_of_edges() == len(g.edges)
        assert nx_graph.edges[(1, 0), (1, 1)]["conductance"] == 1.0


class TestHitting:
    @pytest.mark.parametrize("lam", [0.0, 0.1, 0.7])
    def test_gamblers_ruin_on_a_line(self, lam):
        env = WindowConfig.bottom_line(-10, 10)
        value = hitting_probability_exact(env, lam, (-2, 0), (0, 0), (3, 0))
        if lam == 0:
            expected = 3 / 5
        else:
            rho = math.exp(-2 * lam)
            expected = (rho**2 - rho**5) / (1 - rho**5)
        assert value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("lam", [0.05, 0.4])
    def test_lazy_kernel_agrees(self, lam):
        env = loop_window()
        exact = hitting_probability_exact(env, lam, (-2, 0), (0, 0), (4, 0))
        lazy = lazy_hitting_probability(env, lam, (0, 0), [(-2, 0)], [(4, 0)])
        assert lazy == pytest.approx(exact, rel=1e-10)

    def test_lazy_trivial_cases(self):
        env = loop_window()
        assert lazy_hitting_probability(env, 0.1, (0, 0), [(0, 0)], [(4, 0)]) == 1.0
        assert lazy_hitting_probability(env, 0.1, (0, 0), [(4, 0)], [(0, 0)]) == 0.0
        with pytest.raises(PreconditionError):
            lazy_hitting_probability(env, 0.1, (0, 0), [(-3, 0)], [(-4, 0)])

    def test_requires_preregeneration_points(self):
        env = loop_window()
        with pytest.raises(PreconditionError):
            hitting_probability_exact(env, 0.1, (-2, 0), (1, 0), (4, 0))
        with pytest.raises(PreconditionError):
            hitting_probability_exact(env, 0.1, (-2, 0), (0, 1), (4, 0))
        with pytest.raises(PreconditionError):
            hitting_probability_exact(env, 0.1, (3, 0), (0, 0), (4, 0))

    def test_to_infinity(self):
        lam = 0.5
        env = WindowConfig.bottom_line(-5, 20)
        value = hitting_probability_to_infinity(env, lam, (-1, 0), (0, 0), 10)
        assert value == pytest.approx(
            _line_resistance(lam, 0, 10) / _line_resistance(lam, -1, 10), rel=1e-12
        )
        with pytest.raises(PreconditionError):
            hitting_probability_to_infinity(env, lam, (-1, 0), (0, 0), 40)

    def test_bounds(self):
        bracket = hitting_probability_bounds(1, math.inf, 0.1)
        assert bracket.upper == 0.4
        assert bracket.lower == pytest.approx(1 / (1 + 6 * (math.e**2 - 1)))
        assert bracket.in_regime
        assert not hitting_probability_bounds(1, math.inf, 0.5).in_regime
        assert not hitting_probability_bounds(1, 2, 0.0).in_regime

        finite = hitting_probability_bounds(2, 3, 0.1)
        assert 0 < finite.lower < finite.upper < 1
        assert finite.contains(finite.lower)
        assert not finite.contains(finite.upper + 1e-6)

        with pytest.raises(ParameterError):
            hitting_probability_bounds(0, 1, 0.1)

    def test_bounds_grow_with_distance_to_the_far_target(self):
        near = hitting_probability_bounds(1, 1, 0.1)
        far = hitting_probability_bounds(1, 3, 0.1)
        assert far.lower > near.lower
        assert far.upper > near.upper

    def test_sharp_upper_limit(self):
        assert intermediate_upper_bound(1, math.inf, 1e-7) == pytest.approx(
            SHARP_UPPER_LIMIT, rel=1e-5
        )
        assert SHARP_UPPER_LIMIT < 0.4
        with pytest.raises(ParameterError):
            intermediate_upper_bound(1, math.inf, 0.0)


class TestEscape:
    @pytest.mark.parametrize("lam", [0.2, 0.5, 1.0])
    def test_line(self, lam):
        env = WindowConfig.bottom_line(-20, 40)
        escape = escape_probability_exact(env, lam, (0, 0))
        t = math.ceil(5 / lam)
        assert escape.truncation == t
        assert escape.value == pytest.approx(
            1 / (_line_resistance(lam, 0, t) * partition_function(lam)), rel=1e-10
        )

        infinite = (math.exp(lam) - math.exp(-lam)) / partition_function(lam)
        assert 0 <= escape.value - infinite <= escape.truncation_bound
        assert escape.value >= escape_lower_bound(lam)
        assert float(escape) == escape.value

    def test_preconditions(self):
        env = trap_window()
        with pytest.raises(PreconditionError):
            escape_probability_exact(env, 0.5, (6, 1), truncation=2)
        with pytest.raises(ParameterError):
            escape_probability_exact(env, 0.0, (2, 0))
        with pytest.raises(PreconditionError):
            escape_probability_exact(env, 0.5, (2, 0))
        assert escape_probability_exact(env, 0.0, (2, 0), truncation=4).value > 0


class TestRuin:
    def test_unbiased_values(self):
        assert ruin_probability_r(2, 5, 0.0) == pytest.approx(0.75)
        assert ruin_probability_r(5, 5, 0.0) == pytest.approx(0.8)

    @pytest.mark.parametrize("lam", [0.0, 0.01, 0.3, 1.5])
    @pytest.mark.parametrize("m", [2, 3, 8])
    def test_matches_oracle(self, lam, m):
        for i in range(1, m + 1):
            assert ruin_probability_r(i, m, lam) == pytest.approx(
                ruin_probability_oracle(i, m, lam), abs=1e-12
            )
        assert expected_excursion_length(m, lam) == pytest.approx(
            expected_excursion_length_oracle(m, lam), rel=1e-10
        )

    @pytest.mark.parametrize("m", [3, 6, 15])
    def test_small_bias_limit(self, m):
        assert ruin_probability_r(m - 1, m, 1e-8) == pytest.approx(
            (2 * m - 3) / (2 * m - 2), abs=1e-6
        )

    @pytest.mark.parametrize("m", [2, 4, 9])
    def test_unbiased_excursion_length(self, m):
        assert expected_excursion_length(m, 0.0) == pytest.approx(2 * m)

    @pytest.mark.parametrize("lam", [0.0, 0.4])
    def test_visit_count_pmf_sums_to_one(self, lam):
        total = sum(visit_count_pmf(3, 6, lam, k) for k in range(2000))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_invalid_arguments(self):
        with pytest.raises(ParameterError):
            ruin_probability_r(1, 1, 0.1)
        with pytest.raises(ParameterError):
            ruin_probability_r(0, 4, 0.1)
        with pytest.raises(ParameterError):
            ruin_probability_r(5, 4, 0.1)
        with pytest.raises(ParameterError):
            ruin_probability_r(2, 4, -0.1)
