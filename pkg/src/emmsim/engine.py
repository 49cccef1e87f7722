"""Simulation loop, oracle co-run, bound verification and replication."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from emmsim.config import RunConfig
from emmsim.errors import RealizationMismatch
from emmsim.lyapunov import (
    BoundInputs,
    EnergyDeficitQueue,
    constant_u,
    control_for_task,
    max_task_energy,
    queue_update,
    theorem_bounds,
    weighted_cost,
)
from emmsim.oracle import FramePlan, jstep_lookahead
from emmsim.policies import (
    Epoch,
    TaskEnv,
    TaskRun,
    delay_optimal_decide,
    emm_gsi_decide,
    emm_lsi_run_task,
    emm_lsi_v_run_task,
    energy_optimal_decide,
    radio_lsi_run_task,
    restart_lsi_run_task,
    run_fixed_choice,
)
from emmsim.scenario import (
    BsState,
    BsStateTable,
    Network,
    SubtaskCost,
    TaskSpec,
    candidate_set,
    generate_network,
    generate_task,
    step_mobility,
    subtask_cost,
)

log = logging.getLogger(__name__)

# fixed stream ids: adding a stream never shifts the draws of another
STREAMS = {"mobility": 1, "tasks": 2, "capability": 3, "noise": 4, "epochs": 5}
LSI_POLICIES = ("emm-lsi", "emm-lsi-v", "radio-lsi")
REL_TOL = 1e-9


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, STREAMS[name]])


@dataclass(frozen=True)
class TaskInstance:
    index: int
    task: TaskSpec
    candidates: tuple[int, ...]
    states: dict[int, BsState]
    costs: dict[int, SubtaskCost]
    epochs: tuple[Epoch, ...]


@dataclass(frozen=True)
class Realization:
    config_hash: str
    network: Network
    tasks: tuple[TaskInstance, ...]


@dataclass(frozen=True)
class TraceRecord:
    task_id: int
    subtask_index: int
    epoch_index: int
    bs_id: int
    comp_delay: float
    tx_delay: float
    energy: float
    obs_delay: float
    obs_energy: float
    handover: bool
    q_before: float
    v: float


@dataclass
class RunSummary:
    policy: str
    seed: int
    tasks: int
    frame_length: int
    handover_cost: float
    per_task_budget: float
    avg_delay: float = 0.0
    total_energy: float = 0.0
    handover_total: int = 0
    deadline_violations: int = 0
    subtasks: int = 0
    frame_delay: list[float] = field(default_factory=list)
    frame_energy: list[float] = field(default_factory=list)
    max_task_regret: float = 0.0
    learned_tasks: int = 0
    suboptimal_tasks: int = 0
    realization_hash: str = ""
    oracle_g: list[float] | None = None
    oracle_feasible: list[bool] | None = None
    bound_report: "BoundReport | None" = None

    @property
    def suboptimal_rate(self) -> float:
        return self.suboptimal_tasks / self.learned_tasks if self.learned_tasks else math.nan

    @property
    def feasible_avg_delay(self) -> float:
        """Average task delay over the frames where the lookahead oracle is feasible."""
        if self.oracle_feasible is None:
            return math.nan
        keep = [r for r, ok in enumerate(self.oracle_feasible) if ok]
        if not keep:
            return math.nan
        return sum(self.frame_delay[r] for r in keep) / (len(keep) * self.frame_length)


def _epochs_for(task: TaskSpec, candidates: tuple[int, ...], config: RunConfig,
                rng: np.random.Generator) -> tuple[Epoch, ...]:
    model = config.epochs
    if model.model == "none":
        return (Epoch(1, candidates),)
    epochs: list[Epoch] = []
    if model.model == "scripted":
        start = 1
        for length, ranks in model.script:
            avail = tuple(candidates[r] for r in ranks if r < len(candidates)) or candidates[:1]
            epochs.append(Epoch(start, avail))
            start += length
    else:
        for start in range(1, task.subtask_count + 1, model.length):
            on = rng.random(len(candidates)) >= model.off_prob
            if not on.any():
                on[rng.integers(len(candidates))] = True
            epochs.append(Epoch(start, tuple(c for c, keep in zip(candidates, on) if keep)))
    merged = [epochs[0]]
    for e in epochs[1:]:
        if e.start > task.subtask_count:
            break
        if e.available != merged[-1].available:
            merged.append(e)
    return tuple(merged)


def build_realization(config: RunConfig) -> Realization:
    """Draw the policy-independent sample path: trajectory, tasks, BS states, epochs."""
    network = generate_network(config.network)
    mobility, task_rng = stream(config.seed, "mobility"), stream(config.seed, "tasks")
    epoch_rng = stream(config.seed, "epochs")
    table = BsStateTable(network, stream(config.seed, "capability"))
    side = config.network.area_side
    location = (float(mobility.uniform(0, side)), float(mobility.uniform(0, side)))
    tasks = []
    for m in range(1, config.tasks + 1):
        if m > 1:
            location = step_mobility(location, mobility, side, config.step_length)
        task = generate_task(m, location, task_rng, config.workload)
        candidates = candidate_set(location, network)
        states = {n: table.get(task, n) for n in candidates}
        costs = {n: subtask_cost(task, s, config.network) for n, s in states.items()}
        tasks.append(TaskInstance(m, task, candidates, states, costs,
                                  _epochs_for(task, candidates, config, epoch_rng)))
    return Realization(config.realization_hash(), network, tuple(tasks))


@dataclass(frozen=True)
class OracleResult:
    realization_hash: str
    plans: tuple[FramePlan, ...]

    @property
    def g_star(self) -> list[float]:
        return [p.g_value for p in self.plans]

    @property
    def feasible(self) -> list[bool]:
        return [p.feasible for p in self.plans]


def solve_oracle(realization: Realization, config: RunConfig, verify: bool = False) -> OracleResult:
    j = config.frame_length
    budget = config.energy_budget / config.frames if config.frames else 0.0
    plans = []
    for r in range(config.frames):
        frame = realization.tasks[r * j:(r + 1) * j]
        plans.append(jstep_lookahead([t.task for t in frame], [t.candidates for t in frame],
                                     [t.costs for t in frame], budget,
                                     enforce_deadlines=config.oracle_deadlines, verify=verify))
    return OracleResult(realization.config_hash, tuple(plans))


def _run_task(inst: TaskInstance, config: RunConfig, v: float, q: float, env: TaskEnv,
              oracle_bs: int | None) -> TaskRun:
    task, costs, name = inst.task, inst.costs, config.policy
    single = len(inst.epochs) == 1
    if name == "emm-gsi":
        return run_fixed_choice(task, inst.epochs, costs, v, q,
                                lambda avail: emm_gsi_decide(task, avail, costs, v, q))
    if name == "delay-optimal":
        return run_fixed_choice(task, inst.epochs, costs, v, q,
                                lambda avail: delay_optimal_decide(task, avail, costs))
    if name == "energy-optimal":
        return run_fixed_choice(task, inst.epochs, costs, v, q,
                                lambda avail: energy_optimal_decide(task, avail, costs))
    if name == "jstep-oracle":
        return run_fixed_choice(task, inst.epochs, costs, v, q, lambda avail: oracle_bs)
    if name == "emm-lsi":
        if single:
            return emm_lsi_run_task(task, inst.candidates, env, v, q, config.stop)
        return restart_lsi_run_task(task, inst.epochs, env, v, q, config.stop)
    if name == "emm-lsi-v":
        return emm_lsi_v_run_task(task, inst.epochs, env, v, q, config.stop)
    if name == "radio-lsi":
        return radio_lsi_run_task(task, inst.epochs, env, config.stop, v, q)
    raise ValueError(f"unknown policy {name!r}")


def run_simulation(config: RunConfig, realization: Realization | None = None,
                   oracle: OracleResult | None = None) -> tuple[list[TraceRecord], RunSummary]:
    """Run ``config.policy`` over all tasks of one sample path."""
    if realization is None:
        realization = build_realization(config)
    elif realization.config_hash != config.realization_hash():
        raise RealizationMismatch("realization was drawn from a different configuration")
    if config.policy == "jstep-oracle" and oracle is None:
        oracle = solve_oracle(realization, config)

    schedule = config.schedule()
    noise = stream(config.seed, "noise")
    e_max = max_task_energy(config.network, config.workload)
    u_const = constant_u(e_max, config.per_task_budget)
    queue = EnergyDeficitQueue(0.0, config.per_task_budget)
    summary = RunSummary(config.policy, config.seed, config.tasks, config.frame_length,
                         config.workload.handover_cost, config.per_task_budget,
                         realization_hash=realization.config_hash)
    trace: list[TraceRecord] = []
    total_delay = 0.0
    j = config.frame_length

    for inst in realization.tasks:
        m = inst.index
        reset, v = control_for_task(m, schedule)
        if reset:
            queue = queue.reset()
            summary.frame_delay.append(0.0)
            summary.frame_energy.append(0.0)
        q = queue.length
        oracle_bs = None
        if config.policy == "jstep-oracle":
            r, pos = divmod(m - 1, j)
            oracle_bs = oracle.plans[r].assignments[pos]
        env = TaskEnv(inst.costs, config.observation, noise)
        run = _run_task(inst, config, v, q, env, oracle_bs)
        outcome = run.outcome

        for d in run.decisions:
            c = inst.costs[d.bs_id]
            obs = d.observed or c
            trace.append(TraceRecord(m, d.subtask_index, d.epoch_index, d.bs_id, c.comp_delay,
                                     c.tx_delay, c.energy, obs.delay, obs.energy, d.is_handover, q, v))

        # any realized deviation must stay within the constant U
        if 0.5 * (outcome.total_energy - config.per_task_budget) ** 2 > u_const * (1 + REL_TOL):
            raise AssertionError(f"task {m}: energy {outcome.total_energy} exceeds the U envelope")

        total_delay += outcome.total_delay
        summary.total_energy += outcome.total_energy
        summary.frame_delay[-1] += outcome.total_delay
        summary.frame_energy[-1] += outcome.total_energy
        summary.handover_total += outcome.handover_count
        summary.deadline_violations += outcome.violations
        summary.subtasks += len(run.decisions)
        summary.max_task_regret = max(summary.max_task_regret, run.regret.total)
        if config.policy in LSI_POLICIES and len(inst.epochs) == 1 and run.learned_bs is not None:
            summary.learned_tasks += 1
            # the learner cannot see deadlines, so its target is the plain argmin of z
            best = min(inst.candidates, key=lambda n: weighted_cost(v, q, inst.costs[n].delay,
                                                                     inst.costs[n].energy))
            summary.suboptimal_tasks += run.learned_bs != best
        queue = queue_update(queue, outcome.total_energy)

    summary.avg_delay = total_delay / config.tasks if config.tasks else 0.0
    if oracle is not None:
        summary.oracle_g = oracle.g_star
        summary.oracle_feasible = oracle.feasible
    return trace, summary


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.measured

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound + REL_TOL * max(abs(self.bound), 1.0)


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[BoundCheck, ...]
    excluded_frames: tuple[int, ...]
    learning_dev: float
    surrogate: bool
    inputs: BoundInputs

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def bound_inputs(config: RunConfig, oracle: OracleResult, learning_dev: float = 0.0) -> BoundInputs:
    e_max = max_task_energy(config.network, config.workload)
    return BoundInputs(
        u_const=constant_u(e_max, config.per_task_budget),
        j=config.frame_length,
        r=config.frames,
        v_values=config.schedule().v_values,
        g_star=tuple(oracle.g_star),
        energy_budget=config.energy_budget,
        learning_dev=learning_dev,
    )


def verify_bounds(summary: RunSummary, oracle: OracleResult, inputs: BoundInputs) -> BoundReport:
    """Check the average-delay and total-energy guarantees on one realization.

    Frames where the oracle has no feasible plan are excluded (the guarantee
    presumes feasibility). For learning policies ``inputs.learning_dev``
    should be the measured worst per-task regret, an empirical stand-in for
    the unknown deviation constant.
    """
    if summary.realization_hash != oracle.realization_hash:
        raise RealizationMismatch(
            f"summary realization {summary.realization_hash} != oracle {oracle.realization_hash}")
    keep = [r for r, ok in enumerate(oracle.feasible) if ok]
    excluded = tuple(r for r, ok in enumerate(oracle.feasible) if not ok)
    if excluded:
        log.warning("oracle infeasible in frames %s; excluded from the bound check", list(excluded))
    sub = replace(inputs, r=len(keep), v_values=tuple(inputs.v_values[r] for r in keep),
                  g_star=tuple(inputs.g_star[r] for r in keep),
                  energy_budget=inputs.energy_budget * len(keep) / inputs.r if inputs.r else 0.0)
    delay_bound, energy_bound = theorem_bounds(sub)
    j = inputs.j
    measured_delay = sum(summary.frame_delay[r] for r in keep) / (len(keep) * j) if keep else 0.0
    measured_energy = sum(summary.frame_energy[r] for r in keep)
    checks = [BoundCheck("average delay", measured_delay, delay_bound),
              BoundCheck("total energy", measured_energy, energy_bound)]
    return BoundReport(tuple(checks), excluded, inputs.learning_dev, summary.policy in LSI_POLICIES, sub)


def run_with_oracle(config: RunConfig, verify_oracle: bool = False):
    """Policy run plus oracle on the same sample path, with the bound report attached."""
    realization = build_realization(config)
    oracle = solve_oracle(realization, config, verify=verify_oracle)
    trace, summary = run_simulation(config, realization, oracle)
    dev = max(summary.max_task_regret, 0.0) if config.policy in LSI_POLICIES else 0.0
    summary.bound_report = verify_bounds(summary, oracle, bound_inputs(config, oracle, dev))
    return trace, summary, oracle


@dataclass
class Aggregate:
    summaries: list[RunSummary]
    stats: dict[str, dict[str, float]]


METRICS = ("avg_delay", "total_energy", "handover_total", "deadline_violations", "suboptimal_rate",
           "feasible_avg_delay")


def aggregate(summaries: Sequence[RunSummary]) -> Aggregate:
    stats = {}
    for metric in METRICS:
        values = np.array([getattr(s, metric) for s in summaries], dtype=float)
        finite = values[np.isfinite(values)]
        if finite.size == 0:
            stats[metric] = dict(mean=math.nan, std=math.nan, min=math.nan, max=math.nan)
            continue
        stats[metric] = dict(mean=float(finite.mean()), std=float(finite.std()),
                             min=float(finite.min()), max=float(finite.max()))
    return Aggregate(list(summaries), stats)


def _summary_only(config: RunConfig) -> RunSummary:
    return run_simulation(config)[1]


def replicate(config: RunConfig, seeds: Sequence[int], workers: int = 1) -> Aggregate:
    if len(set(seeds)) != len(seeds):
        raise ValueError("replication seeds must be distinct")
    configs = [replace(config, seed=s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            summaries = list(pool.map(_summary_only, configs))
    else:
        summaries = [_summary_only(c) for c in configs]
    return aggregate(summaries)

