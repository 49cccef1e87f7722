"""Network layout, user mobility, task generation and the physical cost models.

Everything here is a pure function of its inputs plus an explicit
``numpy.random.Generator``. True BS-side state and the noisy observations a
learner sees are kept apart: :func:`subtask_cost` gives the truth,
:func:`observe` perturbs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from emmsim.errors import ConfigError, CoverageError

Location = tuple[float, float]


@dataclass(frozen=True)
class NetworkConfig:
    area_side: float = 1000.0
    bs_count: int = 49
    coverage_radius: float = 150.0
    bandwidth: float = 20e6
    noise_power: float = 2e-13
    tx_power: float = 0.5
    pathloss_intercept: float = 127.0
    pathloss_slope: float = 30.0
    max_cpu: float = 25e9
    interference_model: str = "uniform"
    interference_max: float = 2.5e-10
    min_distance: float = 1.0

    def __post_init__(self):
        if self.coverage_radius <= 0 or self.area_side <= 0:
            raise ConfigError("area_side and coverage_radius must be positive")
        if self.bs_count < 1:
            raise ConfigError("bs_count must be a positive integer")
        for name in ("bandwidth", "noise_power", "tx_power", "max_cpu", "min_distance"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.interference_model not in ("off", "uniform"):
            raise ConfigError(f"unknown interference model {self.interference_model!r}")
        if self.interference_max < 0:
            raise ConfigError("interference_max must be nonnegative")
        if self.interference_model == "uniform" and self.interference_max <= 0:
            raise ConfigError("uniform interference needs interference_max > 0")


@dataclass(frozen=True)
class WorkloadConfig:
    subtask_bits: float = 0.62e6
    k_min: int = 60
    k_max: int = 120
    gamma_min: float = 500.0
    gamma_max: float = 1000.0
    subtask_deadline: float = 0.150
    handover_cost: float = 0.005

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError("need 1 <= k_min <= k_max")
        if not 0 <= self.gamma_min <= self.gamma_max:
            raise ConfigError("need 0 <= gamma_min <= gamma_max")
        if self.subtask_bits <= 0 or self.subtask_deadline <= 0 or self.handover_cost < 0:
            raise ConfigError("subtask_bits and subtask_deadline must be positive, handover_cost >= 0")


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    location: Location
    subtask_count: int
    subtask_bits: float
    intensity: float
    subtask_deadline: float
    handover_cost: float

    @property
    def input_bits(self) -> float:
        return self.subtask_count * self.subtask_bits

    @property
    def task_deadline(self) -> float:
        # reported only; the simulator enforces the per-subtask deadline
        return self.subtask_count * self.subtask_deadline


@dataclass(frozen=True)
class BsState:
    bs_id: int
    cpu_alloc: float
    channel_gain: float
    interference: float

    def __post_init__(self):
        if self.cpu_alloc <= 0:
            raise ValueError(f"BS {self.bs_id}: cpu_alloc must be positive, got {self.cpu_alloc}")
        if self.channel_gain <= 0 or self.interference < 0:
            raise ValueError(f"BS {self.bs_id}: invalid channel state")


@dataclass(frozen=True)
class SubtaskCost:
    comp_delay: float
    tx_delay: float
    energy: float

    @property
    def delay(self) -> float:
        return self.comp_delay + self.tx_delay


@dataclass(frozen=True)
class ObservationModel:
    relative_half_width: float = 0.3

    def __post_init__(self):
        if not 0 <= self.relative_half_width < 1:
            raise ConfigError("relative_half_width must lie in [0, 1)")


@dataclass(frozen=True)
class Network:
    config: NetworkConfig
    positions: np.ndarray = field(repr=False)

    def distance(self, location: Location, bs_id: int) -> float:
        dx = self.positions[bs_id, 0] - location[0]
        dy = self.positions[bs_id, 1] - location[1]
        return math.hypot(dx, dy)

    def candidate_set(self, location: Location) -> tuple[int, ...]:
        return candidate_set(location, self)


def generate_network(config: NetworkConfig, rng: np.random.Generator | None = None) -> Network:
    """Place ``bs_count`` BSs on a centered square grid.

    ``rng`` is accepted for interface symmetry with random layouts; the grid
    itself is deterministic.
    """
    side = math.isqrt(config.bs_count)
    if side * side != config.bs_count:
        raise ConfigError(f"bs_count={config.bs_count} is not a perfect square")
    pitch = config.area_side / side
    coords = pitch / 2 + pitch * np.arange(side)
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    positions = np.column_stack([xs.ravel(), ys.ravel()])
    return Network(config=config, positions=positions)


def check_coverage(network: Network, resolution: int = 101) -> None:
    """Raise CoverageError if a sampled point of the area has no covering BS."""
    side = network.config.area_side
    pts = np.linspace(0.0, side, resolution)
    xs, ys = np.meshgrid(pts, pts)
    grid = np.column_stack([xs.ravel(), ys.ravel()])
    d2 = ((grid[:, None, :] - network.positions[None, :, :]) ** 2).sum(axis=2)
    covered = (d2.min(axis=1) <= network.config.coverage_radius**2 + 1e-9)
    if not covered.all():
        x, y = grid[np.argmin(covered)]
        raise CoverageError(f"coverage hole at ({x:.1f}, {y:.1f})")


def candidate_set(location: Location, network: Network) -> tuple[int, ...]:
    """BS ids within coverage radius (closed ball), ascending."""
    diff = network.positions - np.asarray(location, dtype=float)
    dist = np.hypot(diff[:, 0], diff[:, 1])
    ids = np.flatnonzero(dist <= network.config.coverage_radius)
    if ids.size == 0:
        raise CoverageError(f"no BS covers location {location}")
    return tuple(int(i) for i in ids)


def _reflect(value: float, side: float) -> float:
    period = 2.0 * side
    value = math.fmod(value, period)
    if value < 0:
        value += period
    return period - value if value > side else value


def step_mobility(location: Location, rng: np.random.Generator, area_side: float,
                  step_length: float = 20.0) -> Location:
    """One random-walk step with reflection at the area boundary."""
    angle = rng.uniform(0.0, 2.0 * math.pi)
    x = location[0] + step_length * math.cos(angle)
    y = location[1] + step_length * math.sin(angle)
    return (_reflect(x, area_side), _reflect(y, area_side))


def path_loss_gain(distance: float, config: NetworkConfig | None = None) -> float:
    """Linear power gain for path loss ``intercept + slope*log10(d_km)`` in dB."""
    config = config or NetworkConfig()
    d_km = max(distance, config.min_distance) / 1000.0
    loss_db = config.pathloss_intercept + config.pathloss_slope * math.log10(d_km)
    return 10.0 ** (-loss_db / 10.0)


def uplink_rate(state: BsState, config: NetworkConfig) -> float:
    sinr = config.tx_power * state.channel_gain / (config.noise_power + state.interference)
    return config.bandwidth * math.log2(1.0 + sinr)


def subtask_cost(task: TaskSpec, state: BsState, config: NetworkConfig) -> SubtaskCost:
    if state.cpu_alloc <= 0:
        raise ValueError("cpu_alloc must be positive")
    rate = uplink_rate(state, config)
    tx_delay = task.subtask_bits / rate
    return SubtaskCost(
        comp_delay=task.subtask_bits * task.intensity / state.cpu_alloc,
        tx_delay=tx_delay,
        energy=config.tx_power * tx_delay,
    )


def generate_task(task_id: int, location: Location, rng: np.random.Generator,
                  workload: WorkloadConfig) -> TaskSpec:
    return TaskSpec(
        task_id=task_id,
        location=location,
        subtask_count=int(rng.integers(workload.k_min, workload.k_max + 1)),
        subtask_bits=workload.subtask_bits,
        intensity=float(rng.uniform(workload.gamma_min, workload.gamma_max)),
        subtask_deadline=workload.subtask_deadline,
        handover_cost=workload.handover_cost,
    )


def draw_bs_state(task: TaskSpec, bs_id: int, distance: float, rng: np.random.Generator,
                  config: NetworkConfig) -> BsState:
    """Draw the hidden per-(task, BS) state.

    CPU allocation is uniform on (0, F_n]: ``1 - random()`` never returns 0.
    """
    cpu = config.max_cpu * (1.0 - rng.random())
    if config.interference_model == "uniform":
        interference = float(rng.uniform(0.0, config.interference_max))
    else:
        interference = 0.0
    return BsState(bs_id=bs_id, cpu_alloc=cpu, channel_gain=path_loss_gain(distance, config),
                   interference=interference)


class BsStateTable:
    """Memoizes BS states per task so a (task, BS) pair is drawn exactly once."""

    def __init__(self, network: Network, rng: np.random.Generator):
        self.network = network
        self.rng = rng
        self._states: dict[tuple[int, int], BsState] = {}

    def get(self, task: TaskSpec, bs_id: int) -> BsState:
        key = (task.task_id, bs_id)
        if key not in self._states:
            distance = self.network.distance(task.location, bs_id)
            self._states[key] = draw_bs_state(task, bs_id, distance, self.rng, self.network.config)
        return self._states[key]


def observe(true_cost: SubtaskCost, model: ObservationModel, rng: np.random.Generator) -> SubtaskCost:
    """Multiplicative uniform noise, independent per field."""
    v = model.relative_half_width
    if v == 0:
        return true_cost
    u = rng.uniform(-v, v, size=3)
    return SubtaskCost(
        comp_delay=max(true_cost.comp_delay * (1.0 + u[0]), 0.0),
        tx_delay=max(true_cost.tx_delay * (1.0 + u[1]), 0.0),
        energy=max(true_cost.energy * (1.0 + u[2]), 0.0),
    )
