"""Mobility-management policies.

GSI policies (``emm_gsi_decide``, ``delay_optimal_decide``,
``energy_optimal_decide``) see true subtask costs and pick one BS per epoch.
LSI policies learn from noisy observations subtask by subtask. The J-step
lookahead oracle lives in :mod:`emmsim.oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from emmsim.bandit import (
    LearnerState,
    RegretLedger,
    StopRule,
    regret_decompose,
    stop_check,
    ucb1_init,
    ucb1_select,
    ucb1_update,
    vucb1_epoch_start,
    vucb1_select,
)
from emmsim.lyapunov import weighted_cost
from emmsim.scenario import ObservationModel, SubtaskCost, TaskSpec, observe

Costs = Mapping[int, SubtaskCost]


@dataclass(frozen=True)
class Epoch:
    start: int
    available: tuple[int, ...]


@dataclass(frozen=True)
class Decision:
    task_id: int
    subtask_index: int
    bs_id: int
    is_handover: bool
    epoch_index: int = 0
    observed: SubtaskCost | None = None


@dataclass(frozen=True)
class TaskOutcome:
    total_delay: float
    total_energy: float
    handover_count: int
    deadline_violated: bool
    violations: int = 0


class TaskRun(NamedTuple):
    decisions: list[Decision]
    outcome: TaskOutcome
    regret: RegretLedger
    learned_bs: int | None = None


class TaskEnv:
    """True costs of one task plus the noisy channel a learner observes them through."""

    def __init__(self, costs: Costs, model: ObservationModel, rng: np.random.Generator):
        self.costs = costs
        self.model = model
        self.rng = rng

    def observe(self, bs_id: int) -> SubtaskCost:
        return observe(self.costs[bs_id], self.model, self.rng)


def task_outcome(task: TaskSpec, decisions: Sequence[Decision], costs: Costs) -> TaskOutcome:
    delay = energy = 0.0
    violations = 0
    for d in decisions:
        c = costs[d.bs_id]
        delay += c.delay
        energy += c.energy
        violations += c.delay > task.subtask_deadline
    handovers = sum(d.is_handover for d in decisions)
    delay += task.handover_cost * handovers
    return TaskOutcome(delay, energy, handovers, violations > 0, violations)


def _argmin(candidates: Sequence[int], key: Callable[[int], float]) -> int:
    if not candidates:
        raise ValueError("empty candidate set")
    return min(sorted(candidates), key=key)


def deadline_feasible(task: TaskSpec, candidates: Sequence[int], costs: Costs) -> list[int]:
    return [n for n in candidates if costs[n].delay <= task.subtask_deadline]


def emm_gsi_decide(task: TaskSpec, candidates: Sequence[int], costs: Costs, v: float, q: float) -> int:
    """Drift-plus-penalty choice among deadline-feasible BSs (min-delay BS if none is)."""
    feasible = deadline_feasible(task, candidates, costs)
    if not feasible:
        return delay_optimal_decide(task, candidates, costs)
    return _argmin(feasible, lambda n: weighted_cost(v, q, costs[n].delay, costs[n].energy))


def delay_optimal_decide(task: TaskSpec, candidates: Sequence[int], costs: Costs) -> int:
    return _argmin(candidates, lambda n: costs[n].delay)


def energy_optimal_decide(task: TaskSpec, candidates: Sequence[int], costs: Costs) -> int:
    return _argmin(candidates, lambda n: costs[n].energy)


def _p3_costs(task: TaskSpec, epochs: Sequence[Epoch], costs: Costs, v: float, q: float):
    """Per-epoch true weighted cost of the P3 optimum."""
    return [weighted_cost(v, q, costs[best].delay, costs[best].energy)
            for best in (emm_gsi_decide(task, e.available, costs, v, q) for e in epochs)]


def _epoch_bounds(task: TaskSpec, epochs: Sequence[Epoch]) -> list[tuple[int, int]]:
    if not epochs:
        raise ValueError("empty epoch schedule")
    if epochs[0].start != 1 or any(b.start <= a.start for a, b in zip(epochs, epochs[1:])):
        raise ValueError("epochs must start at subtask 1 and be strictly increasing")
    if any(not e.available for e in epochs):
        raise ValueError("every epoch needs at least one BS")
    ends = [e.start - 1 for e in epochs[1:]] + [task.subtask_count]
    return [(e.start, min(end, task.subtask_count)) for e, end in zip(epochs, ends)
            if e.start <= task.subtask_count]


def _finish(task: TaskSpec, decisions: list[Decision], epochs: Sequence[Epoch], costs: Costs,
            v: float, q: float, learned_bs: int | None = None) -> TaskRun:
    bounds = _epoch_bounds(task, epochs)
    best_z = _p3_costs(task, epochs[: len(bounds)], costs, v, q)
    optimal = [best_z[d.epoch_index] for d in decisions]
    trace = [(d.bs_id, weighted_cost(v, q, costs[d.bs_id].delay, costs[d.bs_id].energy))
             for d in decisions]
    ledger = regret_decompose(trace, optimal, v, task.handover_cost)
    return TaskRun(decisions, task_outcome(task, decisions, costs), ledger, learned_bs)


def run_fixed_choice(task: TaskSpec, epochs: Sequence[Epoch], costs: Costs, v: float, q: float,
                     choose: Callable[[Sequence[int]], int]) -> TaskRun:
    """Serve each epoch from one BS picked by ``choose`` (GSI policies)."""
    decisions: list[Decision] = []
    prev = None
    for b, (start, end) in enumerate(_epoch_bounds(task, epochs)):
        bs = choose(epochs[b].available)
        for k in range(start, end + 1):
            decisions.append(Decision(task.task_id, k, bs, prev is not None and bs != prev, b))
            prev = bs
    return _finish(task, decisions, epochs, costs, v, q)


class _Recorder:
    """Turns learner pulls into Decisions and feeds back the learner's cost."""

    def __init__(self, task: TaskSpec, env: TaskEnv, cost_of: Callable[[SubtaskCost], float]):
        self.task = task
        self.env = env
        self.cost_of = cost_of
        self.decisions: list[Decision] = []
        self.epoch = 0

    @property
    def k(self) -> int:
        return len(self.decisions)

    def pull(self, bs: int) -> float:
        obs = self.env.observe(bs)
        prev = self.decisions[-1].bs_id if self.decisions else None
        self.decisions.append(Decision(self.task.task_id, self.k + 1, bs,
                                       prev is not None and bs != prev, self.epoch, obs))
        return self.cost_of(obs)


def _learn(task: TaskSpec, epochs: Sequence[Epoch], env: TaskEnv, v: float, q: float,
           stop_rule: StopRule, volatile: bool,
           cost_of: Callable[[SubtaskCost], float] | None = None) -> TaskRun:
    if cost_of is None:
        def cost_of(obs: SubtaskCost) -> float:
            return weighted_cost(v, q, obs.delay, obs.energy)
    rec = _Recorder(task, env, cost_of)
    state: LearnerState | None = None
    learned = None
    for b, (start, end) in enumerate(_epoch_bounds(task, epochs)):
        rec.epoch = b
        capacity = end - start + 1
        if volatile:
            if state is None:
                state = LearnerState()
            live = {key[0] for key, arm in state.arms.items() if arm.alive}
            fresh = [n for n in sorted(epochs[b].available) if n not in live][:capacity]
            available = [n for n in epochs[b].available if n in live] + fresh
            vucb1_epoch_start(state, available, start, lambda key: rec.pull(key[0]))
        else:
            keys = [(n, 0) for n in sorted(epochs[b].available)][:capacity]
            state = ucb1_init(keys, lambda key: rec.pull(key[0]))
        # restart learners index subtasks from the epoch start; volatile ones use the task index
        offset = 0 if volatile else start - 1
        if rec.k >= start:
            stop_check(state, stop_rule, rec.k - offset)
        while rec.k < end:
            k = rec.k + 1
            key = vucb1_select(state, k) if volatile else ucb1_select(state, k - offset)
            ucb1_update(state, key, rec.pull(key[0]))
            stop_check(state, stop_rule, k - offset)
        learned = state.stopped_on[0] if state.stopped_on is not None else None
    return _finish(task, rec.decisions, epochs, env.costs, v, q, learned)


def emm_lsi_run_task(task: TaskSpec, candidates: Sequence[int], env: TaskEnv, v: float, q: float,
                     stop_rule: StopRule) -> TaskRun:
    """UCB1 over the candidate BSs of one task, one decision per subtask."""
    return _learn(task, [Epoch(1, tuple(candidates))], env, v, q, stop_rule, volatile=False)


def restart_lsi_run_task(task: TaskSpec, epochs: Sequence[Epoch], env: TaskEnv, v: float, q: float,
                         stop_rule: StopRule) -> TaskRun:
    """EMM-LSI under a varying BS set: learning restarts from scratch every epoch."""
    return _learn(task, epochs, env, v, q, stop_rule, volatile=False)


def emm_lsi_v_run_task(task: TaskSpec, epochs: Sequence[Epoch], env: TaskEnv, v: float, q: float,
                       stop_rule: StopRule) -> TaskRun:
    """Volatile UCB1: statistics of surviving BSs carry over between epochs."""
    return _learn(task, epochs, env, v, q, stop_rule, volatile=True)


def radio_lsi_run_task(task: TaskSpec, epochs: Sequence[Epoch], env: TaskEnv, stop_rule: StopRule,
                       v: float = 1.0, q: float = 0.0) -> TaskRun:
    """Learn the best channel: the learner's cost is the observed energy alone.

    ``v`` and ``q`` only feed the regret ledger, which is measured against the
    drift-plus-penalty optimum like every other policy.
    """
    return _learn(task, epochs, env, v, q, stop_rule, volatile=False,
                  cost_of=lambda obs: obs.energy)
