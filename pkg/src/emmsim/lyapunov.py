"""Virtual energy-deficit queue, control schedule and the delay/energy bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from emmsim.errors import ConfigError
from emmsim.scenario import NetworkConfig, WorkloadConfig, path_loss_gain, BsState, uplink_rate


@dataclass(frozen=True)
class EnergyDeficitQueue:
    length: float
    per_task_budget: float

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("queue length must be nonnegative")

    def reset(self) -> "EnergyDeficitQueue":
        return replace(self, length=0.0)


def queue_update(q: EnergyDeficitQueue, task_energy: float) -> EnergyDeficitQueue:
    if task_energy < 0:
        raise ValueError(f"task energy must be nonnegative, got {task_energy}")
    return replace(q, length=max(q.length + task_energy - q.per_task_budget, 0.0))


def weighted_cost(v: float, q: float, delay: float, energy: float) -> float:
    return v * delay + q * energy


@dataclass(frozen=True)
class ControlSchedule:
    frame_length: int
    frame_count: int
    v_values: tuple[float, ...]

    def __post_init__(self):
        if self.frame_length < 1 or self.frame_count < 0:
            raise ConfigError("frame_length must be >= 1 and frame_count >= 0")
        if len(self.v_values) != self.frame_count:
            raise ConfigError(f"need {self.frame_count} V values, got {len(self.v_values)}")
        if any(v <= 0 for v in self.v_values):
            raise ConfigError("all V values must be positive")

    @classmethod
    def constant(cls, v: float, frame_length: int, tasks: int) -> "ControlSchedule":
        if tasks % frame_length:
            raise ConfigError(f"M={tasks} is not a multiple of J={frame_length}")
        frames = tasks // frame_length
        return cls(frame_length, frames, (float(v),) * frames)

    @property
    def tasks(self) -> int:
        return self.frame_length * self.frame_count


def control_for_task(m: int, schedule: ControlSchedule) -> tuple[bool, float]:
    """(reset queue?, V in effect) for 1-based task index ``m``."""
    if not 1 <= m <= schedule.tasks:
        raise IndexError(f"task index {m} outside 1..{schedule.tasks}")
    frame = (m - 1) // schedule.frame_length
    return (m - 1) % schedule.frame_length == 0, schedule.v_values[frame]


def constant_u(energy_max: float, per_task_budget: float) -> float:
    """Half the largest squared per-task deviation over energies in [0, energy_max]."""
    if energy_max < 0:
        raise ValueError("energy_max must be nonnegative")
    b = per_task_budget
    return 0.5 * max((energy_max - b) ** 2, b**2)


def max_task_energy(network: NetworkConfig, workload: WorkloadConfig) -> float:
    """Largest energy any single task can consume inside coverage.

    Worst case is the longest task at the cell edge with maximal interference.
    """
    gain = path_loss_gain(network.coverage_radius, network)
    interference = network.interference_max if network.interference_model != "off" else 0.0
    worst = BsState(bs_id=-1, cpu_alloc=1.0, channel_gain=gain, interference=interference)
    r_min = uplink_rate(worst, network)
    return workload.k_max * network.tx_power * workload.subtask_bits / r_min


@dataclass(frozen=True)
class BoundInputs:
    u_const: float
    j: int
    r: int
    v_values: tuple[float, ...]
    g_star: tuple[float, ...]
    energy_budget: float
    learning_dev: float = 0.0

    def __post_init__(self):
        if len(self.v_values) != self.r or len(self.g_star) != self.r:
            raise ValueError("v_values and g_star must have length r")
        if self.u_const < 0 or self.learning_dev < 0 or self.energy_budget < 0:
            raise ValueError("bound inputs must be nonnegative")


def theorem_bounds(inputs: BoundInputs) -> tuple[float, float]:
    """(average-delay bound, total-energy bound); learning_dev=0 gives the GSI case."""
    u, j, r, w = inputs.u_const, inputs.j, inputs.r, inputs.learning_dev
    if r == 0:
        return 0.0, inputs.energy_budget
    delay = sum(inputs.g_star) / r + (u * j + w) / r * sum(1.0 / v for v in inputs.v_values)
    energy = inputs.energy_budget + sum(
        math.sqrt(2.0 * (u * j * j + v * j * g + w * j))
        for v, g in zip(inputs.v_values, inputs.g_star)
    )
    return delay, energy


def deficit_increments(task_energies: Sequence[float], per_task_budget: float) -> list[float]:
    """y(m) = E(m) - budget per task."""
    return [e - per_task_budget for e in task_energies]


def frame_telescoping_holds(task_energies: Sequence[float], per_task_budget: float,
                            tol: float = 1e-12) -> bool:
    """Check that the summed deficit of one frame never exceeds the final queue length."""
    q = EnergyDeficitQueue(0.0, per_task_budget)
    for e in task_energies:
        q = queue_update(q, e)
    return sum(deficit_increments(task_energies, per_task_budget)) <= q.length + tol
