"""Run configuration and its flat ``key = value`` file format.

One assignment per line, ``#`` starts a comment, unknown keys are rejected and
missing keys take the defaults below (1 km^2 area, 49 BSs, 150 m radius,
20 MHz, 0.62 Mbit subtasks, 60-120 subtasks per task, 500 tasks, J = 5).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from emmsim.bandit import StopRule
from emmsim.errors import ConfigError
from emmsim.lyapunov import ControlSchedule
from emmsim.scenario import NetworkConfig, ObservationModel, WorkloadConfig

POLICIES = ("emm-gsi", "emm-lsi", "emm-lsi-v", "delay-optimal", "energy-optimal", "radio-lsi",
            "jstep-oracle")


@dataclass(frozen=True)
class EpochModel:
    """How the available BS set changes within a task.

    ``none`` keeps every candidate for the whole task. ``random`` cuts the task
    into blocks of ``length`` subtasks and switches each candidate off with
    probability ``off_prob`` per block. ``scripted`` gives (length, candidate
    ranks) per epoch, ranks indexing the task's ascending candidate list.
    """
    model: str = "none"
    length: int = 40
    off_prob: float = 0.3
    script: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        if self.model not in ("none", "random", "scripted"):
            raise ConfigError(f"unknown epoch model {self.model!r}")
        if self.length < 1 or not 0 <= self.off_prob < 1:
            raise ConfigError("epochs.length must be >= 1 and epochs.off_prob in [0, 1)")
        if self.model == "scripted" and not self.script:
            raise ConfigError("scripted epoch model needs epochs.script")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    network: NetworkConfig = field(default_factory=NetworkConfig)
    observation: ObservationModel = field(default_factory=ObservationModel)
    step_length: float = 20.0
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    tasks: int = 500
    battery: float = 1000.0
    alpha: float = 0.41
    frame_length: int = 5
    v: tuple[float, ...] = (0.01,)
    policy: str = "emm-gsi"
    stop: StopRule = field(default_factory=lambda: StopRule("fixed_count", 20))
    oracle_deadlines: bool = True
    epochs: EpochModel = field(default_factory=EpochModel)

    def __post_init__(self):
        if self.tasks < 0:
            raise ConfigError("tasks must be nonnegative")
        if self.frame_length < 1 or self.tasks % self.frame_length:
            raise ConfigError(f"tasks={self.tasks} must be a multiple of frame_length={self.frame_length}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha={self.alpha} outside (0, 1]")
        if self.battery <= 0:
            raise ConfigError("battery must be positive")
        if self.step_length < 0:
            raise ConfigError("step_length must be nonnegative")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; choose from {', '.join(POLICIES)}")
        if not self.v or any(x <= 0 for x in self.v):
            raise ConfigError("v must hold positive values")
        if len(self.v) not in (1, self.frames):
            raise ConfigError(f"v needs 1 or {self.frames} values, got {len(self.v)}")
        if self.policy == "jstep-oracle" and self.epochs.model != "none":
            raise ConfigError("the lookahead oracle assumes a fixed BS set per task (epochs.model = none)")

    @property
    def frames(self) -> int:
        return self.tasks // self.frame_length

    @property
    def energy_budget(self) -> float:
        return self.alpha * self.battery

    @property
    def per_task_budget(self) -> float:
        return self.energy_budget / self.tasks if self.tasks else 0.0

    def schedule(self) -> ControlSchedule:
        values = self.v * self.frames if len(self.v) == 1 else self.v
        return ControlSchedule(self.frame_length, self.frames, tuple(values))

    def realization_hash(self) -> str:
        """Digest of everything that shapes the sample path, excluding the policy knobs."""
        lines = [line for line in dump_config(self).splitlines()
                 if line.split("=")[0].strip() not in _POLICY_KEYS]
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _parse_script(text: str) -> tuple[tuple[int, tuple[int, ...]], ...]:
    """``40:0,1 | 40:0,1,2,3`` -> ((40, (0, 1)), (40, (0, 1, 2, 3)))"""
    epochs = []
    if not text.strip():
        return ()
    for part in text.split("|"):
        length, _, ranks = part.partition(":")
        epochs.append((int(length), tuple(int(r) for r in ranks.split(",") if r.strip())))
    return tuple(epochs)


def _fmt_script(script) -> str:
    return " | ".join(f"{n}:{','.join(map(str, ranks))}" for n, ranks in script)


# key -> (section, attribute, parser, formatter)
_KEYS: dict[str, tuple[str | None, str, Callable[[str], Any], Callable[[Any], str]]] = {
    "seed": (None, "seed", int, str),
    "area_side": ("network", "area_side", float, repr),
    "bs_count": ("network", "bs_count", int, str),
    "coverage_radius": ("network", "coverage_radius", float, repr),
    "bandwidth": ("network", "bandwidth", float, repr),
    "noise_power": ("network", "noise_power", float, repr),
    "tx_power": ("network", "tx_power", float, repr),
    "pathloss_intercept": ("network", "pathloss_intercept", float, repr),
    "pathloss_slope": ("network", "pathloss_slope", float, repr),
    "max_cpu": ("network", "max_cpu", float, repr),
    "interference_model": ("network", "interference_model", str, str),
    "interference_max": ("network", "interference_max", float, repr),
    "min_distance": ("network", "min_distance", float, repr),
    "observation_noise": ("observation", "relative_half_width", float, repr),
    "step_length": (None, "step_length", float, repr),
    "tasks": (None, "tasks", int, str),
    "subtask_bits": ("workload", "subtask_bits", float, repr),
    "k_min": ("workload", "k_min", int, str),
    "k_max": ("workload", "k_max", int, str),
    "gamma_min": ("workload", "gamma_min", float, repr),
    "gamma_max": ("workload", "gamma_max", float, repr),
    "subtask_deadline": ("workload", "subtask_deadline", float, repr),
    "handover_cost": ("workload", "handover_cost", float, repr),
    "battery": (None, "battery", float, repr),
    "alpha": (None, "alpha", float, repr),
    "frame_length": (None, "frame_length", int, str),
    "v": (None, "v", _parse_floats, lambda v: ", ".join(map(repr, v))),
    "policy": (None, "policy", str, str),
    "stop.kind": ("stop", "kind", str, str),
    "stop.ks": ("stop", "k_s", int, str),
    "stop.epsilon": ("stop", "epsilon", float, repr),
    "stop.k0": ("stop", "k_0", int, str),
    "oracle.deadlines": (None, "oracle_deadlines", _parse_bool, lambda b: str(b).lower()),
    "epochs.model": ("epochs", "model", str, str),
    "epochs.length": ("epochs", "length", int, str),
    "epochs.off_prob": ("epochs", "off_prob", float, repr),
    "epochs.script": ("epochs", "script", _parse_script, _fmt_script),
}

_POLICY_KEYS = {"v", "policy", "stop.kind", "stop.ks", "stop.epsilon", "stop.k0", "observation_noise"}

CONFIG_KEYS = tuple(_KEYS)


def build_config(values: dict[str, Any], base: RunConfig | None = None) -> RunConfig:
    """Apply already-typed ``{key: value}`` overrides to ``base`` (defaults if None)."""
    base = base or RunConfig()
    sections: dict[str, dict[str, Any]] = {}
    top: dict[str, Any] = {}
    for key, value in values.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}")
        section, attr, _, _ = _KEYS[key]
        if section is None:
            top[attr] = value
        else:
            sections.setdefault(section, {})[attr] = value
    try:
        for section, attrs in sections.items():
            top[section] = replace(getattr(base, section), **attrs)
        return replace(base, **top)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        try:
            values[key] = _KEYS[key][2](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", line=lineno) from exc
    return build_config(values, base)


def parse_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(), base)


def dump_config(config: RunConfig) -> str:
    """Every key with its effective value; parses back to an equal RunConfig."""
    lines = []
    for key, (section, attr, _, fmt) in _KEYS.items():
        owner = config if section is None else getattr(config, section)
        lines.append(f"{key} = {fmt(getattr(owner, attr))}")
    return "\n".join(lines) + "\n"
