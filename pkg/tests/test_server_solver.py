import numpy as np
import pytest

from mec_ppo import oracles
from mec_ppo.scenario import generate_scenario
from mec_ppo.server_solver import (MIDPOINT, curve_points, curve_search, midpoint_start,
                                   optimize_server, solve_group)
from mec_ppo.verify import random_server_problem
from mec_ppo.workload import ServerProblem

from conftest import make_scenario, make_ue


def test_zero_energy_single_ue_full_offload():
    sc = make_scenario([[1e-5]], ues=[make_ue(0, E=0.0)])
    sol = solve_group(sc, 0, [0], sc.bandwidth)
    s = sol.schedule
    assert sol.d_off[0] == 200e6
    assert s.t_lc == 0.0
    assert s.t_ttl == pytest.approx(s.t_pm + s.t_ir + s.t_srv, rel=1e-12)


def test_empty_group():
    sc = generate_scenario(0, 2, 3)
    sol = solve_group(sc, 1, [], 0.0)
    assert sol.t_ttl == 0.0 and sol.d_off.size == 0


def test_nonempty_group_needs_bandwidth():
    sc = generate_scenario(0, 1, 2)
    with pytest.raises(ValueError):
        solve_group(sc, 0, [0, 1], 0.0)


def test_unknown_start_rejected():
    prob = random_server_problem(np.random.default_rng(0), 2)
    with pytest.raises(ValueError):
        optimize_server(prob, start="random")


def test_curve_points_respect_box():
    prob = random_server_problem(np.random.default_rng(1), 3)
    X = curve_points(prob, np.linspace(0, 500, 11))
    assert np.all(X >= prob.lower) and np.all(X <= prob.data_size)
    np.testing.assert_allclose(X[0], prob.data_size)


def test_curve_search_beats_fixed_candidates():
    prob = random_server_problem(np.random.default_rng(2), 4)
    x, val = curve_search(prob)
    assert val == pytest.approx(float(prob.objective(x)[0]))
    for cand in (midpoint_start(prob), prob.lower, prob.data_size):
        assert val <= float(prob.objective(cand)[0]) + 1e-12


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("start", ["curve", MIDPOINT])
def test_trace_non_increasing(seed, start):
    rng = np.random.default_rng(seed)
    prob = random_server_problem(rng, int(rng.integers(1, 7)))
    sol = optimize_server(prob, start=start)
    assert np.all(np.diff(sol.trace) <= 1e-9)
    again = prob.schedule(sol.d_off)
    assert again.t_ttl == pytest.approx(sol.t_ttl, rel=1e-12)
    assert np.all(sol.d_off >= prob.lower) and np.all(sol.d_off <= prob.data_size)


def test_curve_start_never_worse_than_midpoint():
    for seed in range(10):
        prob = random_server_problem(np.random.default_rng(seed), 3)
        assert optimize_server(prob).t_ttl <= optimize_server(prob, start=MIDPOINT).t_ttl + 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_two_ue_within_two_percent_of_joint_oracle(seed):
    prob = random_server_problem(np.random.default_rng(50 + seed), 2)
    _, ref = oracles.server_time_grid(prob)
    assert optimize_server(prob).t_ttl <= ref * 1.02


def test_tdma_skips_partition_refinement():
    sc = generate_scenario(4, 1, 4, None).with_access("tdma")
    prob = ServerProblem.from_scenario(sc, 0, range(4), sc.bandwidth)
    sol = optimize_server(prob)
    assert sol.iterations == 0 and len(sol.trace) == 1
    x, val = curve_search(prob)
    assert sol.t_ttl == pytest.approx(val)


def test_hints_are_used():
    prob = random_server_problem(np.random.default_rng(3), 3)
    best = optimize_server(prob)
    hinted = optimize_server(prob, hints=best.d_off)
    assert hinted.t_ttl <= best.t_ttl + 1e-12


def test_offloads_keyed_by_ue_id():
    sc = generate_scenario(5, 1, 3)
    sol = solve_group(sc, 0, [2, 0], sc.bandwidth)
    assert set(sol.offloads()) == {0, 2}
    assert tuple(sol.schedule.ue_ids) == tuple(sol.offloads())
