"""Exact J-step lookahead: minimize a frame's average delay under its energy budget.

Every task in a frame is served by a single BS (no intra-task handover with
full information), so a frame plan is one BS per task. The search is a
depth-first branch and bound; :func:`exhaustive_lookahead` enumerates the
whole assignment grid with numpy and serves as its cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from emmsim.policies import Costs
from emmsim.scenario import TaskSpec

ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class FramePlan:
    assignments: tuple[int, ...]
    g_value: float
    frame_energy: float
    feasible: bool


def _options(tasks: Sequence[TaskSpec], candidates: Sequence[Sequence[int]],
             costs: Sequence[Costs], enforce_deadlines: bool):
    """Per task: list of (total delay, total energy, bs) sorted by delay then id."""
    out = []
    for task, cands, c in zip(tasks, candidates, costs):
        opts = []
        for n in sorted(cands):
            if enforce_deadlines and c[n].delay > task.subtask_deadline:
                continue
            opts.append((task.subtask_count * c[n].delay, task.subtask_count * c[n].energy, n))
        opts.sort()
        out.append(opts)
    return out


def _fallback(tasks, candidates, costs) -> FramePlan:
    chosen, delay, energy = [], 0.0, 0.0
    for task, cands, c in zip(tasks, candidates, costs):
        n = min(sorted(cands), key=lambda b: c[b].energy)
        chosen.append(n)
        delay += task.subtask_count * c[n].delay
        energy += task.subtask_count * c[n].energy
    return FramePlan(tuple(chosen), delay / len(tasks), energy, False)


def jstep_lookahead(tasks: Sequence[TaskSpec], candidates: Sequence[Sequence[int]],
                    costs: Sequence[Costs], frame_budget: float,
                    enforce_deadlines: bool = True, verify: bool = False) -> FramePlan:
    """Branch-and-bound solution of one frame.

    Infeasible frames return the minimum-energy assignment with
    ``feasible=False``. With ``verify`` the result is checked against full
    enumeration whenever the grid has at most ``ENUMERATION_LIMIT`` points.
    """
    if not tasks:
        return FramePlan((), 0.0, 0.0, True)
    opts = _options(tasks, candidates, costs, enforce_deadlines)
    if any(not o for o in opts):
        return _fallback(tasks, candidates, costs)

    n_tasks = len(tasks)
    min_e = [min(e for _, e, _ in o) for o in opts]
    min_d = [o[0][0] for o in opts]
    rest_e = [0.0] * (n_tasks + 1)
    rest_d = [0.0] * (n_tasks + 1)
    for i in range(n_tasks - 1, -1, -1):
        rest_e[i] = rest_e[i + 1] + min_e[i]
        rest_d[i] = rest_d[i + 1] + min_d[i]

    best_delay = math.inf
    best: tuple[int, ...] | None = None
    best_energy = 0.0
    chosen: list[int] = []

    def dfs(i: int, delay: float, energy: float) -> None:
        nonlocal best_delay, best, best_energy
        if i == n_tasks:
            if delay < best_delay:
                best_delay, best, best_energy = delay, tuple(chosen), energy
            return
        for d, e, n in opts[i]:
            if delay + d + rest_d[i + 1] >= best_delay:
                break  # options are sorted by delay
            if energy + e + rest_e[i + 1] > frame_budget:
                continue
            chosen.append(n)
            dfs(i + 1, delay + d, energy + e)
            chosen.pop()

    dfs(0, 0.0, 0.0)
    if best is None:
        plan = _fallback(tasks, candidates, costs)
    else:
        plan = FramePlan(best, best_delay / n_tasks, best_energy, True)

    if verify and math.prod(len(o) for o in opts) <= ENUMERATION_LIMIT:
        ref = exhaustive_lookahead(tasks, candidates, costs, frame_budget, enforce_deadlines)
        if ref.feasible != plan.feasible or (
                plan.feasible and not math.isclose(ref.g_value, plan.g_value, rel_tol=1e-12)):
            raise AssertionError(f"branch and bound {plan} disagrees with enumeration {ref}")
    return plan


def exhaustive_lookahead(tasks: Sequence[TaskSpec], candidates: Sequence[Sequence[int]],
                         costs: Sequence[Costs], frame_budget: float,
                         enforce_deadlines: bool = True) -> FramePlan:
    """Enumerate every assignment with numpy broadcasting."""
    if not tasks:
        return FramePlan((), 0.0, 0.0, True)
    opts = _options(tasks, candidates, costs, enforce_deadlines)
    if any(not o for o in opts):
        return _fallback(tasks, candidates, costs)
    n_tasks = len(opts)
    total_d = np.zeros([1] * n_tasks)
    total_e = np.zeros([1] * n_tasks)
    for i, o in enumerate(opts):
        shape = [1] * n_tasks
        shape[i] = len(o)
        total_d = total_d + np.array([d for d, _, _ in o]).reshape(shape)
        total_e = total_e + np.array([e for _, e, _ in o]).reshape(shape)
    masked = np.where(total_e <= frame_budget, total_d, np.inf)
    flat = int(np.argmin(masked))
    if not np.isfinite(masked.flat[flat]):
        return _fallback(tasks, candidates, costs)
    idx = np.unravel_index(flat, masked.shape)
    assignment = tuple(opts[i][j][2] for i, j in enumerate(idx))
    return FramePlan(assignment, float(masked.flat[flat]) / n_tasks, float(total_e.flat[flat]), True)
