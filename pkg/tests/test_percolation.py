from __future__ import annotations

import io

import numpy as np
import pytest
from scipy import stats

from pydiverse.ladderwalk.errors import (
    CycleSourceError,
    FeasibilityError,
    ParameterError,
    WindowFormatError,
)
from pydiverse.ladderwalk.percolation import (
    ConditionedSampler,
    Cycle,
    CyclePool,
    WindowConfig,
    build_cycle_stationary_env,
    classify_communication,
    concatenate_cycles,
    crossing_cluster_mask,
    crossing_exists,
    crossing_probability,
    enumerate_conditioned_distribution,
    extract_cycles,
    find_preregeneration_points,
    loads,
    read,
    sample_segment,
    sample_window_conditioned,
    sample_window_rejection,
    window_code,
)
from pydiverse.ladderwalk.percolation.sampling import bits_to_codes, window_bits
from pydiverse.ladderwalk.util.rng import make_stream
from tests.util.vectors import loop_window, trap_window, window


def test_window_validation():
    with pytest.raises(ParameterError):
        window(3, 3)
    with pytest.raises(ParameterError, match="vertical"):
        WindowConfig(0, 3, [1, 1, 1], [1, 1, 1], [0, 0, 0])


def test_edge_open():
    w = trap_window()
    assert w.edge_open((4, 0), (4, 1))
    assert w.edge_open((5, 1), (4, 1))
    assert not w.edge_open((7, 1), (8, 1))
    assert not w.edge_open((10, 0), (11, 0))
    with pytest.raises(ParameterError):
        w.edge_open((0, 0), (2, 0))


def test_shift_and_flip():
    w = trap_window()
    shifted = w.shift(4)
    assert shifted.span == (-4, 6)
    assert shifted.edge_open((0, 0), (0, 1))
    flipped = w.flip()
    assert flipped.edge_open((5, 0), (6, 0))
    assert not flipped.edge_open((7, 0), (8, 0))
    assert flipped.flip() == w


def test_slice():
    w = trap_window()
    s = w.slice(3, 8)
    assert s.span == (3, 8)
    assert s.edge_open((4, 1), (5, 1))
    with pytest.raises(ParameterError):
        w.slice(5, 12)


def test_serialization_round_trip(tmp_path):
    w = sample_window_conditioned(0.6, 8, 9, make_stream(0, "serialize"))
    assert loads(w.dumps({"seed": 0})) == w
    w.write(tmp_path / "w.txt")
    assert read(tmp_path / "w.txt") == w
    buffer = io.StringIO()
    w.write(buffer)
    assert read(io.StringIO(buffer.getvalue())) == w


def test_loads_reports_line_numbers():
    text = "# comment\nladder-window v1 0 2 nan 1\n0 1 1 0\n1 1 2 0\n2 0 0 0\n"
    with pytest.raises(WindowFormatError) as e:
        loads(text)
    assert e.value.line == 4

    with pytest.raises(WindowFormatError) as e:
        loads("ladder-window v2 0 2 nan 1\n")
    assert e.value.line == 1

    # a horizontal edge leaving the window
    with pytest.raises(WindowFormatError) as e:
        loads("ladder-window v1 0 1 0.5 0\n0 1 1 0\n1 0 1 0\n")
    assert e.value.line == 3


def test_crossing():
    assert crossing_exists(window(0, 5, bottom=range(5)))
    assert not crossing_exists(window(0, 5, bottom=[0, 1, 3, 4]))
    # detour over the top row
    assert crossing_exists(window(0, 5, vertical=[1, 3], bottom=[0, 3, 4], top=[1, 2]))


def test_preregeneration_points():
    assert find_preregeneration_points(window(0, 5, bottom=range(5))) == [1, 2, 3, 4]
    assert find_preregeneration_points(trap_window()) == [1, 2, 3, 8, 9]
    prereg = find_preregeneration_points(loop_window())
    assert prereg == [-5, -4, -3, -2, -1, 0, 3, 4, 5]
    assert find_preregeneration_points(WindowConfig.all_open(0, 6)) == []


def test_trap_decomposition():
    d = classify_communication(trap_window())
    assert d.trap_lengths == [3]
    assert d.traps == [[(5, 1), (6, 1), (7, 1)]]
    assert d.on_backbone((4, 1))
    assert not d.on_backbone((6, 1))
    assert d.prereg_xs == [1, 2, 3, 8, 9]
    assert bool(d.cluster_mask[6, 1])
    # backwards communication reaches the top row only through the rung at 4
    assert d.t_state(3) == "10"
    assert d.t_state(5) == "11"


def test_extract_cycles():
    cycles = extract_cycles(trap_window(), margin=0)
    assert [c.length for c in cycles] == [1, 1, 5, 1]
    # the trap is a dead end and carries no current
    assert cycles[2].resistance == pytest.approx(5.0, rel=1e-12)

    (loop,) = [c for c in extract_cycles(loop_window(), margin=0) if c.length == 3]
    assert loop.resistance == pytest.approx(2.75, rel=1e-12)
    assert loop.source_x == 0

    excluded = extract_cycles(loop_window(), margin=0, exclude_origin=True)
    assert all(not (c.source_x <= 0 < c.source_x + c.length) for c in excluded)


def test_cycle_validation():
    with pytest.raises(ParameterError):
        Cycle.from_block(window(0, 2, vertical=[0], bottom=[0, 1]))
    minimal = Cycle.minimal()
    assert minimal.length == 1
    assert minimal.conductance == pytest.approx(1.0)


def test_concatenate_cycles():
    cycles = [c for c in extract_cycles(loop_window(), margin=0)]
    env = concatenate_cycles(cycles, origin_index=2)
    assert env.span == (-2, env.x_max)
    assert env.n_columns == sum(c.length for c in cycles) + 1
    assert crossing_exists(env)
    with pytest.raises(ParameterError):
        concatenate_cycles([])


def test_cycle_pool_exhausts():
    cycles = extract_cycles(trap_window(), margin=0)
    pool = CyclePool(cycles)
    rng = make_stream(0, "pool")
    taken = pool.take(len(cycles), rng)
    assert sorted(c.length for c in taken) == sorted(c.length for c in cycles)
    assert pool.remaining == 0
    with pytest.raises(CycleSourceError):
        pool.next_cycle(rng)


def test_cycle_pools_share_only_their_cycles():
    cycles = extract_cycles(loop_window(), margin=0)
    first = CyclePool(cycles)
    second = CyclePool(first.cycles)
    assert isinstance(first.cycles, tuple)
    assert second.cycles == first.cycles

    first.take(len(cycles), make_stream(0, "first"))
    assert first.remaining == 0
    assert second.remaining == len(cycles)

    cycles.clear()
    assert len(first) == len(second) > 0


def test_cycle_stationary_env():
    pool = CyclePool(extract_cycles(loop_window(), margin=0) * 3)
    env, decomposition = build_cycle_stationary_env(pool, 9, make_stream(0, "stat"), 4)
    assert find_preregeneration_points(env)
    assert len(decomposition.cycles) == 9
    assert crossing_cluster_mask(env)[env.index((0, 0))]


@pytest.mark.parametrize("p", [0.3, 0.7])
def test_conditioned_samples_cross(p):
    rng = make_stream(1, "cross", p)
    for _ in range(20):
        w = sample_window_conditioned(p, 10, 10, rng)
        assert w.conditioned
        assert crossing_exists(w)


def test_sampling_is_reproducible():
    a = sample_window_conditioned(0.5, 20, 20, make_stream(7, "same"))
    b = sample_window_conditioned(0.5, 20, 20, make_stream(7, "same"))
    c = sample_window_conditioned(0.5, 20, 20, make_stream(7, "other"))
    assert a == b
    assert a != c


@pytest.mark.parametrize("p", [0.3, 0.5, 0.8])
def test_crossing_probability_matches_enumeration(p):
    exact = enumerate_conditioned_distribution(p, 2, 3)
    assert crossing_probability(p, 2, 3) == pytest.approx(
        exact.crossing_probability, rel=1e-12
    )
    assert exact.probabilities.sum() == pytest.approx(1.0, rel=1e-12)


def test_enumeration_limit():
    with pytest.raises(FeasibilityError):
        enumerate_conditioned_distribution(0.5, 5, 5)


def test_exact_distribution_lookup():
    exact = enumerate_conditioned_distribution(0.5, 1, 1)
    w = exact.window(0)
    assert exact.probability_of(w) == pytest.approx(exact.probabilities[0])
    assert window_code(w) == exact.codes[0]
    assert exact.probability_of(window(-1, 1)) == 0.0


def test_edge_marginals_match_enumeration():
    exact = enumerate_conditioned_distribution(0.5, 2, 2)
    sampler = ConditionedSampler(0.5, -2, 2)
    n = 40_000
    bits = sampler.sample_bits(make_stream(3, "marginals"), n)
    freq = bits.mean(axis=0)
    target = exact.edge_marginals()
    se = np.sqrt(target * (1 - target) / n)
    assert np.all(np.abs(freq - target) <= 6 * se + 1e-12)


def test_sample_bits_order_matches_window_bits():
    sampler = ConditionedSampler(0.5, -3, 4)
    rng = make_stream(0, "order")
    w = sampler.sample(rng)
    assert crossing_exists(w)
    assert window_bits(w).shape == (w.n_edges,)


def test_isolate_top_pins_preregeneration_points():
    rng = make_stream(0, "pins")
    for _ in range(10):
        w = sample_window_conditioned(0.7, 12, 12, rng, isolate_top=[-6, 0, 6])
        assert {-6, 0, 6} <= set(find_preregeneration_points(w))
    with pytest.raises(ParameterError):
        ConditionedSampler(0.7, -3, 3, isolate_top=[5])


def test_sample_segment_is_a_cycle_chain():
    seg = sample_segment(0.6, 7, make_stream(0, "segment"))
    assert seg.span == (0, 7)
    assert not seg.vertical[0] and not seg.vertical[-1]
    Cycle.from_block(seg)


def test_rejection_sampler():
    w = sample_window_rejection(0.6, 4, 4, make_stream(0, "reject"))
    assert w.conditioned
    assert crossing_exists(w)


@pytest.mark.statistical
def test_sampler_goodness_of_fit():
    exact = enumerate_conditioned_distribution(0.5, 3, 3)
    sampler = ConditionedSampler(0.5, -3, 3)
    n = 1_000_000
    rng = make_stream(0, "chi2")
    codes = np.concatenate(
        [
            bits_to_codes(sampler.sample_bits(rng, 100_000))
            for _ in range(n // 100_000)
        ]
    )
    observed = np.bincount(np.searchsorted(exact.codes, codes), minlength=len(exact))
    expected = exact.probabilities * n
    keep = expected >= 5
    chi2 = ((observed[keep] - expected[keep]) ** 2 / expected[keep]).sum()
    pvalue = stats.chi2.sf(chi2, keep.sum() - 1)
    assert pvalue > 1e-3
