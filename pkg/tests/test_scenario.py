import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from emmsim.errors import ConfigError, CoverageError
from emmsim.scenario import (
    BsState,
    BsStateTable,
    NetworkConfig,
    ObservationModel,
    SubtaskCost,
    TaskSpec,
    WorkloadConfig,
    candidate_set,
    check_coverage,
    draw_bs_state,
    generate_network,
    generate_task,
    observe,
    path_loss_gain,
    step_mobility,
    subtask_cost,
    uplink_rate,
)

NOISELESS = NetworkConfig(interference_model="off")


def make_task(intensity=500.0, bits=0.62e6):
    return TaskSpec(1, (0.0, 0.0), 80, bits, intensity, 0.150, 0.005)


def test_default_grid_is_7x7_with_pitch_1000_over_7():
    net = generate_network(NetworkConfig())
    assert net.positions.shape == (49, 2)
    xs = np.unique(net.positions[:, 0])
    assert len(xs) == 7
    assert np.allclose(np.diff(xs), 1000 / 7)
    check_coverage(net)


def test_single_bs_sits_in_the_center():
    net = generate_network(NetworkConfig(bs_count=1, coverage_radius=800))
    assert net.positions.tolist() == [[500.0, 500.0]]


def test_3x3_grid_on_300m():
    net = generate_network(NetworkConfig(area_side=300, bs_count=9))
    assert sorted(map(tuple, net.positions.tolist()))[0] == (50.0, 50.0)
    assert sorted(map(tuple, net.positions.tolist()))[-1] == (250.0, 250.0)
    assert np.allclose(np.unique(net.positions[:, 0]), [50, 150, 250])


def test_non_square_count_rejected():
    with pytest.raises(ConfigError):
        generate_network(NetworkConfig(bs_count=50))


def test_coverage_hole_detected():
    net = generate_network(NetworkConfig(coverage_radius=50))
    with pytest.raises(CoverageError):
        check_coverage(net)


def test_candidates_at_a_bs_are_it_and_its_axis_neighbors():
    net = generate_network(NetworkConfig())
    center = 24  # middle of the 7x7 grid
    cands = candidate_set(tuple(net.positions[center]), net)
    assert len(cands) == 5
    assert center in cands
    assert cands == tuple(sorted(cands))


def test_candidate_at_exact_radius_included():
    net = generate_network(NetworkConfig(bs_count=1, area_side=1000, coverage_radius=150))
    assert candidate_set((650.0, 500.0), net) == (0,)


def test_uncovered_location_raises():
    net = generate_network(NetworkConfig(bs_count=1, coverage_radius=10))
    with pytest.raises(CoverageError):
        candidate_set((0.0, 0.0), net)


def test_zero_step_leaves_location():
    rng = np.random.default_rng(0)
    assert step_mobility((10.0, 20.0), rng, 1000.0, 0.0) == pytest.approx((10.0, 20.0))


def test_steps_near_corner_stay_inside():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        x, y = step_mobility((1.0, 1.0), rng, 1000.0, 20.0)
        assert 0 <= x <= 1000 and 0 <= y <= 1000


def test_random_walk_monte_carlo():
    rng = np.random.default_rng(2)
    loc = (500.0, 500.0)
    steps = []
    for _ in range(100_000):
        new = step_mobility(loc, rng, 1000.0, 20.0)
        assert 0 <= new[0] <= 1000 and 0 <= new[1] <= 1000
        steps.append(math.dist(loc, new))
        loc = new
    # reflection only shortens the rare boundary-crossing steps
    assert np.median(steps) == pytest.approx(20.0)
    assert np.mean(steps) == pytest.approx(20.0, rel=0.01)


def test_path_loss_values():
    assert path_loss_gain(100.0) == pytest.approx(1.9953e-10, rel=1e-4)
    assert path_loss_gain(1000.0) == pytest.approx(1.9953e-13, rel=1e-4)
    assert path_loss_gain(10.0) / path_loss_gain(100.0) == pytest.approx(1e3)


def test_path_loss_minimum_distance():
    assert path_loss_gain(0.0) == path_loss_gain(1.0)


def test_uplink_rate_examples():
    state = BsState(0, 1e9, path_loss_gain(100.0), 0.0)
    rate = uplink_rate(state, NOISELESS)
    snr = 0.5 * path_loss_gain(100.0) / 2e-13
    assert snr == pytest.approx(498.8, rel=1e-3)
    assert rate == pytest.approx(1.793e8, rel=1e-3)

    unit = BsState(0, 1e9, 2 * 2e-13, 0.0)  # 0.5 W * 4e-13 / 2e-13 = SNR 1
    assert uplink_rate(unit, NOISELESS) == pytest.approx(20e6)

    half = BsState(0, 1e9, 2e-13, 0.0)
    assert uplink_rate(half, NOISELESS) == pytest.approx(1.170e7, rel=1e-3)


def test_subtask_cost_example():
    state = BsState(0, 25e9, path_loss_gain(100.0), 0.0)
    c = subtask_cost(make_task(), state, NOISELESS)
    assert c.comp_delay == pytest.approx(0.0124)
    assert c.tx_delay == pytest.approx(3.458e-3, rel=1e-3)
    assert c.energy == pytest.approx(1.729e-3, rel=1e-3)
    assert c.delay == pytest.approx(c.comp_delay + c.tx_delay)


def test_doubling_cpu_halves_computation_only():
    task = make_task()
    a = subtask_cost(task, BsState(0, 10e9, 1e-10, 0.0), NOISELESS)
    b = subtask_cost(task, BsState(0, 20e9, 1e-10, 0.0), NOISELESS)
    assert b.comp_delay == pytest.approx(a.comp_delay / 2)
    assert (b.tx_delay, b.energy) == (a.tx_delay, a.energy)


def test_bs_state_rejects_zero_cpu():
    with pytest.raises(ValueError):
        BsState(0, 0.0, 1e-10, 0.0)


def test_cpu_draw_mean_is_half_of_max():
    rng = np.random.default_rng(3)
    task = make_task()
    cpus = [draw_bs_state(task, 0, 50.0, rng, NetworkConfig()).cpu_alloc for _ in range(100_000)]
    assert np.mean(cpus) == pytest.approx(12.5e9, rel=0.01)
    assert min(cpus) > 0


def test_interference_off_is_zero():
    rng = np.random.default_rng(4)
    for _ in range(100):
        assert draw_bs_state(make_task(), 0, 50.0, rng, NOISELESS).interference == 0.0


def test_state_table_memoizes():
    net = generate_network(NetworkConfig())
    table = BsStateTable(net, np.random.default_rng(5))
    task = make_task()
    assert table.get(task, 3) is table.get(task, 3)


def test_generate_task_ranges():
    rng = np.random.default_rng(6)
    wl = WorkloadConfig()
    for m in range(200):
        t = generate_task(m, (0.0, 0.0), rng, wl)
        assert 60 <= t.subtask_count <= 120
        assert 500 <= t.intensity <= 1000
        assert t.input_bits == t.subtask_count * 0.62e6


def test_observe_without_noise_is_truth():
    c = SubtaskCost(0.01, 0.002, 0.001)
    assert observe(c, ObservationModel(0.0), np.random.default_rng(0)) == c


def test_observation_noise_monte_carlo():
    rng = np.random.default_rng(7)
    model = ObservationModel(0.3)
    obs = np.array([observe(SubtaskCost(1.0, 1.0, 1.0), model, rng).comp_delay
                    for _ in range(100_000)])
    assert obs.mean() == pytest.approx(1.0, rel=0.005)
    assert obs.min() >= 0.7 and obs.max() <= 1.3


def test_zero_cost_observed_as_zero():
    c = observe(SubtaskCost(0.0, 0.0, 0.0), ObservationModel(0.5), np.random.default_rng(0))
    assert (c.comp_delay, c.tx_delay, c.energy) == (0.0, 0.0, 0.0)


@given(st.floats(1e-15, 1e-9), st.floats(1e-15, 1e-9), st.floats(0, 1e-9))
def test_rate_increases_with_gain(g1, g2, interference):
    lo, hi = sorted((g1, g2))
    r_lo = uplink_rate(BsState(0, 1.0, lo, interference), NetworkConfig())
    r_hi = uplink_rate(BsState(0, 1.0, hi, interference), NetworkConfig())
    assert r_lo <= r_hi


@given(st.floats(1e-15, 1e-9), st.floats(0, 1e-9), st.floats(0, 1e-9))
def test_rate_decreases_with_interference(gain, i1, i2):
    lo, hi = sorted((i1, i2))
    cfg = NetworkConfig()
    assert uplink_rate(BsState(0, 1.0, gain, hi), cfg) <= uplink_rate(BsState(0, 1.0, gain, lo), cfg)


@given(st.floats(0.0, 2000.0), st.floats(0.0, 2000.0))
def test_gain_decreases_with_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert path_loss_gain(hi) <= path_loss_gain(lo)
