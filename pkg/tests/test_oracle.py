import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from emmsim.oracle import exhaustive_lookahead, jstep_lookahead
from emmsim.scenario import SubtaskCost, TaskSpec


def toy_frame():
    tasks = [TaskSpec(m, (0.0, 0.0), 1, 1.0, 0.0, math.inf, 0.0) for m in (1, 2)]
    delays = [[1, 2], [2, 1]]
    energies = [[2, 1], [1, 2]]
    costs = [{n + 1: SubtaskCost(delays[m][n], 0.0, energies[m][n]) for n in range(2)} for m in range(2)]
    return tasks, [(1, 2), (1, 2)], costs


def brute_force(tasks, candidates, costs, budget, deadlines=True):
    """Independent reference: enumerate every assignment with itertools."""
    best = None
    for combo in itertools.product(*[sorted(c) for c in candidates]):
        if deadlines and any(costs[i][n].delay > tasks[i].subtask_deadline for i, n in enumerate(combo)):
            continue
        energy = sum(tasks[i].subtask_count * costs[i][n].energy for i, n in enumerate(combo))
        if energy > budget:
            continue
        delay = sum(tasks[i].subtask_count * costs[i][n].delay for i, n in enumerate(combo))
        if best is None or delay < best[0]:
            best = (delay, combo)
    if best is None:
        return None
    return best[0] / len(tasks)


def test_toy_frame_optimum():
    tasks, cands, costs = toy_frame()
    plan = jstep_lookahead(tasks, cands, costs, 3.0)
    assert plan.feasible
    assert plan.g_value == pytest.approx(1.5)
    assert plan.assignments in ((1, 1), (2, 2))
    assert plan.frame_energy <= 3.0


def test_unbounded_budget_gives_per_task_fastest():
    tasks, cands, costs = toy_frame()
    plan = jstep_lookahead(tasks, cands, costs, math.inf)
    assert plan.assignments == (1, 2)
    assert plan.g_value == pytest.approx(1.0)


def test_budget_below_minimum_is_infeasible_min_energy():
    tasks, cands, costs = toy_frame()
    plan = jstep_lookahead(tasks, cands, costs, 1.0)
    assert not plan.feasible
    assert plan.assignments == (2, 1)
    assert plan.frame_energy == pytest.approx(2.0)


def test_empty_frame():
    assert jstep_lookahead([], [], [], 1.0).feasible


def random_frame(rng, j, n_bs):
    tasks, cands, costs = [], [], []
    for m in range(j):
        k = int(rng.integers(1, 5))
        tasks.append(TaskSpec(m, (0.0, 0.0), k, 1.0, 0.0, float(rng.uniform(0.05, 0.2)), 0.0))
        ids = tuple(sorted(rng.choice(10, size=int(rng.integers(1, n_bs + 1)), replace=False).tolist()))
        cands.append(ids)
        costs.append({n: SubtaskCost(float(rng.uniform(0.01, 0.2)), 0.0, float(rng.uniform(0.1, 1.0)))
                      for n in ids})
    return tasks, cands, costs


@given(st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(0.5, 20.0),
       st.booleans())
def test_branch_and_bound_matches_brute_force(j, n_bs, seed, budget, deadlines):
    tasks, cands, costs = random_frame(np.random.default_rng(seed), j, n_bs)
    plan = jstep_lookahead(tasks, cands, costs, budget, enforce_deadlines=deadlines, verify=True)
    ref = brute_force(tasks, cands, costs, budget, deadlines)
    assert plan.feasible == (ref is not None)
    if ref is not None:
        assert plan.g_value == pytest.approx(ref, rel=1e-12)
        assert plan.frame_energy <= budget + 1e-12
        assert exhaustive_lookahead(tasks, cands, costs, budget, deadlines).g_value == pytest.approx(ref)
