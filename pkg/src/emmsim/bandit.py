"""UCB1 / volatile-UCB1 learners that minimize a weighted cost over candidate BSs.

Arms are keyed ``(bs_id, appearance_index)`` so a BS that leaves and comes
back is a fresh arm. Selection is an argmin of a lower confidence index
``mean - beta * sqrt(2 ln(k - birth) / pulls)``; ties go to the smallest key.
``beta`` is the running maximum of all observed costs.

All state transitions mutate the passed ``LearnerState`` and return it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

ArmKey = tuple[int, int]
ObserveFn = Callable[[ArmKey], float]


@dataclass
class ArmEstimate:
    arm_key: ArmKey
    mean_cost: float
    pulls: int
    birth: int = 0
    death: int | None = None

    @property
    def alive(self) -> bool:
        return self.death is None


@dataclass
class LearnerState:
    arms: dict[ArmKey, ArmEstimate] = field(default_factory=dict)
    subtask_index: int = 0
    beta: float = 0.0
    stopped_on: ArmKey | None = None
    epoch_start: int = 1

    def live_arms(self) -> list[ArmEstimate]:
        return [a for key, a in sorted(self.arms.items()) if a.alive]

    def total_pulls(self) -> int:
        return sum(a.pulls for a in self.arms.values())


@dataclass(frozen=True)
class StopRule:
    kind: str = "never"
    k_s: int = 20
    epsilon: float = 0.0
    k_0: int = 1

    def __post_init__(self):
        if self.kind not in ("never", "fixed_count", "gap"):
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.k_s < 1 or self.k_0 < 1 or self.epsilon < 0:
            raise ValueError("stop rule needs k_s >= 1, k_0 >= 1, epsilon >= 0")


@dataclass(frozen=True)
class RegretLedger:
    sampling_regret: float
    handover_regret: float
    handover_count: int

    @property
    def total(self) -> float:
        return self.sampling_regret + self.handover_regret


def _record(state: LearnerState, arm: ArmEstimate, cost: float) -> None:
    arm.mean_cost = (arm.pulls * arm.mean_cost + cost) / (arm.pulls + 1)
    arm.pulls += 1
    state.beta = max(state.beta, cost)
    state.subtask_index += 1


def ucb1_init(candidates: Iterable[ArmKey], observe_fn: ObserveFn) -> LearnerState:
    """Pull every candidate once, in ascending key order."""
    keys = sorted(candidates)
    if not keys:
        raise ValueError("ucb1_init needs at least one candidate")
    state = LearnerState()
    for key in keys:
        cost = observe_fn(key)
        state.arms[key] = ArmEstimate(arm_key=key, mean_cost=cost, pulls=1)
        state.beta = max(state.beta, cost)
        state.subtask_index += 1
    return state


def _argmin_index(arms: Sequence[ArmEstimate], beta: float, log_term: Callable[[ArmEstimate], float]) -> ArmKey:
    best_key, best_val = None, math.inf
    for arm in arms:  # arms arrive sorted, so strict < keeps the smallest key on ties
        if arm.pulls < 1:
            raise ValueError(f"arm {arm.arm_key} is not initialized")
        val = arm.mean_cost - beta * math.sqrt(2.0 * log_term(arm) / arm.pulls)
        if val < best_val:
            best_key, best_val = arm.arm_key, val
    if best_key is None:
        raise ValueError("no live arms to select from")
    return best_key


def ucb1_index(arm: ArmEstimate, beta: float, k: int) -> float:
    return arm.mean_cost - beta * math.sqrt(2.0 * math.log(k) / arm.pulls)


def ucb1_select(state: LearnerState, k: int) -> ArmKey:
    if state.stopped_on is not None:
        return state.stopped_on
    return _argmin_index(state.live_arms(), state.beta, lambda a: math.log(k))


def ucb1_update(state: LearnerState, arm_key: ArmKey, observed_cost: float) -> LearnerState:
    try:
        arm = state.arms[arm_key]
    except KeyError:
        raise KeyError(f"unknown arm {arm_key}") from None
    _record(state, arm, observed_cost)
    return state


def vucb1_epoch_start(state: LearnerState, available: Iterable[int], k: int,
                      observe_fn: ObserveFn) -> LearnerState:
    """Open a new epoch starting at subtask ``k`` with BS set ``available``.

    Survivors keep their statistics, departed BSs are marked dead, new BSs
    (including returning ones, under a new appearance index) get one pull
    each. Arms born here have ``birth = k - 1``: the number of subtasks
    completed before they appeared.
    """
    available = sorted(set(available))
    if not available:
        raise ValueError("epoch has no available BS")
    live_by_bs = {key[0]: arm for key, arm in state.arms.items() if arm.alive}
    for bs, arm in live_by_bs.items():
        if bs not in available:
            arm.death = k - 1
    appearances: dict[int, int] = {}
    for bs, idx in state.arms:
        appearances[bs] = max(appearances.get(bs, -1), idx)
    state.epoch_start = k
    state.stopped_on = None
    for bs in available:
        if bs in live_by_bs:
            continue
        key = (bs, appearances.get(bs, -1) + 1)
        cost = observe_fn(key)
        state.arms[key] = ArmEstimate(arm_key=key, mean_cost=cost, pulls=1, birth=k - 1)
        state.beta = max(state.beta, cost)
        state.subtask_index += 1
    return state


def vucb1_index(arm: ArmEstimate, beta: float, k: int) -> float:
    return arm.mean_cost - beta * math.sqrt(2.0 * math.log(k - arm.birth) / arm.pulls)


def vucb1_select(state: LearnerState, k: int) -> ArmKey:
    if state.stopped_on is not None:
        return state.stopped_on
    arms = state.live_arms()
    for arm in arms:
        if k - arm.birth < 1:
            raise ValueError(f"arm {arm.arm_key} born at {arm.birth} cannot be indexed at k={k}")
    return _argmin_index(arms, state.beta, lambda a: math.log(k - a.birth))


def stop_check(state: LearnerState, rule: StopRule, k: int) -> tuple[bool, ArmKey | None]:
    """Decide whether learning ends after subtask ``k``; latches ``stopped_on``.

    ``fixed_count`` counts subtasks from the start of the current epoch, which
    for a single-epoch task is simply ``k >= K_s``.
    """
    if state.stopped_on is not None:
        return True, state.stopped_on
    if rule.kind == "never":
        return False, None
    ranked = sorted(state.live_arms(), key=lambda a: (a.mean_cost, a.arm_key))
    if not ranked:
        return False, None
    best = ranked[0]
    if rule.kind == "fixed_count":
        stop = k - state.epoch_start + 1 >= rule.k_s
    elif len(ranked) == 1:
        stop = True
    else:
        second = ranked[1]
        stop = (second.mean_cost - best.mean_cost <= rule.epsilon
                and best.pulls >= rule.k_0 and second.pulls >= rule.k_0)
    if stop:
        state.stopped_on = best.arm_key
        return True, best.arm_key
    return False, None


def count_handovers(arms: Sequence[Hashable]) -> int:
    return sum(1 for prev, cur in zip(arms, arms[1:]) if cur != prev)


def regret_decompose(trace: Sequence[tuple[Hashable, float]], optimal_z: Sequence[float],
                     v: float, c_m: float) -> RegretLedger:
    """Split realized learning regret into sampling and handover parts.

    ``trace`` holds (arm, true weighted cost) per subtask and ``optimal_z``
    the cost of the best arm available at that subtask.
    """
    if not trace:
        raise ValueError("empty trace")
    if len(trace) != len(optimal_z):
        raise ValueError(f"trace has {len(trace)} entries but optimal_z has {len(optimal_z)}")
    sampling = sum(z for _, z in trace) - sum(optimal_z)
    handovers = count_handovers([arm for arm, _ in trace])
    return RegretLedger(sampling_regret=sampling, handover_regret=v * c_m * handovers,
                        handover_count=handovers)


def normalized_gaps(costs: Sequence[float], beta: float) -> list[float]:
    """Per-subtask gaps to the best arm divided by beta, suboptimal arms only."""
    best = min(costs)
    i_best = list(costs).index(best)
    return [(c - best) / beta for i, c in enumerate(costs) if i != i_best]


def prop1_bound(k_m: int, deltas: Sequence[float], beta: float, v: float, c_m: float) -> float:
    """Upper bound on the learning regret of one task of ``k_m`` subtasks."""
    if k_m < 2:
        raise ValueError("k_m must be at least 2")
    if any(d <= 0 for d in deltas):
        raise ValueError("all normalized gaps must be positive")
    log_k = math.log(k_m)
    const = 1.0 + math.pi**2 / 3.0
    sampling = beta * (8.0 * sum(log_k / d for d in deltas) + const * sum(deltas))
    handover = v * c_m * (2.0 * sum(8.0 * log_k / d**2 + const for d in deltas) + 1.0)
    return sampling + handover
