"""Parameter sweeps, figure presets and the normalized-utility epoch scenario.

A sweep runs every (value, series, seed) combination, where a series is a
policy name. All policies of one seed share one sample path and one lookahead
oracle, so their metrics are paired. Output per sweep:

* ``trace_<point>_<seed>.csv`` for each run,
* ``summary.csv`` with per-seed rows and mean/std/min/max rows per point,
* ``plotdata_<figure>.csv`` (x = sweep value, one row per series and metric),
* ``<figure>.png`` rendered from the plot data.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from emmsim.bandit import StopRule
from emmsim.config import POLICIES, EpochModel, RunConfig
from emmsim.engine import (
    Aggregate,
    RunSummary,
    TraceRecord,
    aggregate,
    build_realization,
    run_simulation,
    solve_oracle,
    stream,
)
from emmsim.io import aggregate_rows, summary_row, write_plotdata, write_summary, write_trace
from emmsim.policies import Epoch, TaskEnv, emm_lsi_v_run_task, restart_lsi_run_task
from emmsim.scenario import ObservationModel, SubtaskCost, TaskSpec

SWEEP_VARIABLES = ("v", "alpha", "ks", "policy", "epochs")

COMPARISON_POLICIES = ("jstep-oracle", "emm-gsi", "emm-lsi", "delay-optimal", "energy-optimal",
                       "radio-lsi")

PLOT_METRICS = ("avg_delay", "total_energy", "handover_total", "suboptimal_rate",
                "feasible_avg_delay")

# normalized-utility scenario: per-BS utility and (first subtask, available BSs) per epoch
TABLE1_UTILITY = {1: 0.5, 2: 0.8, 3: 0.4, 4: 0.9, 5: 0.7}
TABLE1_EPOCHS = ((1, (1, 2)), (41, (1, 2, 3, 4)), (81, (1, 2, 4, 5)))
TABLE1_SUBTASKS = 120
TABLE1_POLICIES = ("emm-lsi", "emm-lsi-v")


@dataclass(frozen=True)
class ExperimentSpec:
    base: RunConfig
    variable: str
    values: tuple
    seeds: tuple[int, ...]
    out_dir: Path
    series: tuple[str, ...] = ()
    figure: str = "custom"
    workers: int = 1
    render: bool = True

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if not self.seeds or len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be nonempty and distinct")
        unknown = [p for p in self.series if p not in POLICIES]
        if unknown:
            raise ValueError(f"unknown policies in series: {unknown}")

    @property
    def policies(self) -> tuple[str, ...]:
        if self.variable == "policy":
            return ("",)
        return self.series or (self.base.policy,)


@dataclass
class ExperimentResult:
    files: list[Path] = field(default_factory=list)
    aggregates: dict[tuple[str, str], Aggregate] = field(default_factory=dict)
    plot_rows: list[list] = field(default_factory=list)


def apply_point(base: RunConfig, variable: str, value: Any) -> RunConfig:
    """Config for one sweep point."""
    if variable == "v":
        return replace(base, v=(float(value),))
    if variable == "alpha":
        return replace(base, alpha=float(value))
    if variable == "ks":
        return replace(base, stop=replace(base.stop, kind="fixed_count", k_s=int(value)))
    if variable == "policy":
        return replace(base, policy=str(value))
    if variable == "epochs":
        return replace(base, epochs=EpochModel(model=str(value)))
    raise ValueError(f"unknown sweep variable {variable!r}")


def point_label(variable: str, value: Any, policy: str = "") -> str:
    text = repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)
    label = f"{variable}-{text}"
    return f"{label}_{policy}" if policy else label


def _seed_runs(config: RunConfig, policies: Sequence[str]) -> list[tuple[str, list[TraceRecord], RunSummary]]:
    """Run all policies of one seed on a shared sample path (and shared oracle)."""
    realization = build_realization(config)
    oracle = solve_oracle(realization, config) if config.epochs.model == "none" else None
    out = []
    for policy in policies:
        cfg = replace(config, policy=policy) if policy else config
        trace, summary = run_simulation(cfg, realization, oracle)
        out.append((policy or cfg.policy, trace, summary))
    return out


def _job(args):
    config, policies = args
    return _seed_runs(config, policies)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if spec.variable == "epochs" and tuple(spec.values) == ("table1",):
        return run_table1_experiment(spec)

    result = ExperimentResult()
    summary_rows: list[list] = []
    for value in spec.values:
        point_cfg = apply_point(spec.base, spec.variable, value)
        jobs = [(replace(point_cfg, seed=s), spec.policies) for s in spec.seeds]
        if spec.workers > 1:
            with ProcessPoolExecutor(spec.workers) as pool:
                per_seed = list(pool.map(_job, jobs))
        else:
            per_seed = [_job(j) for j in jobs]

        by_policy: dict[str, list[RunSummary]] = {}
        for seed, runs in zip(spec.seeds, per_seed):
            for policy, trace, summary in runs:
                series = "" if spec.variable == "policy" else policy
                label = point_label(spec.variable, value, series if len(spec.policies) > 1 else "")
                result.files.append(write_trace(out_dir / f"trace_{label}_{seed}.csv", trace))
                summary_rows.append(summary_row(label, summary))
                by_policy.setdefault(policy, []).append(summary)

        for policy, summaries in by_policy.items():
            series = "" if spec.variable == "policy" else policy
            label = point_label(spec.variable, value, series if len(spec.policies) > 1 else "")
            agg = aggregate(summaries)
            result.aggregates[(label, policy)] = agg
            summary_rows.extend(aggregate_rows(label, policy, agg))
            x = value if spec.variable != "policy" else policy
            for metric in PLOT_METRICS:
                st = agg.stats[metric]
                if not math.isnan(st["mean"]):
                    result.plot_rows.append([spec.figure, policy, x, metric, st["mean"], st["std"],
                                             len(summaries)])

    result.files.append(write_summary(out_dir / "summary.csv", summary_rows))
    plot_path = write_plotdata(out_dir / f"plotdata_{spec.figure}.csv", result.plot_rows)
    result.files.append(plot_path)
    if spec.render:
        result.files.append(render_plot(result.plot_rows, out_dir / f"{spec.figure}.png",
                                        categorical=spec.variable == "policy",
                                        log_x=spec.variable == "v"))
    return result


# --- normalized-utility epoch scenario -------------------------------------------------------

@dataclass(frozen=True)
class UtilityRun:
    policy: str
    seed: int
    utilities: np.ndarray
    handovers: np.ndarray
    trace: list[TraceRecord]

    @property
    def running_average(self) -> np.ndarray:
        return np.cumsum(self.utilities) / np.arange(1, len(self.utilities) + 1)

    @property
    def cumulative_handovers(self) -> np.ndarray:
        return np.cumsum(self.handovers)


def table1_run(seed: int, policy: str, k_s: int = 20, noise: float = 0.3,
               utility: dict[int, float] | None = None,
               epochs: Sequence[tuple[int, tuple[int, ...]]] = TABLE1_EPOCHS,
               subtasks: int = TABLE1_SUBTASKS) -> UtilityRun:
    """One task whose arms emit their normalized utility (lower is better) plus noise.

    ``emm-lsi`` restarts learning at every epoch, ``emm-lsi-v`` keeps the
    statistics of surviving BSs.
    """
    utility = utility or TABLE1_UTILITY
    costs = {n: SubtaskCost(u, 0.0, 0.0) for n, u in utility.items()}
    task = TaskSpec(1, (0.0, 0.0), subtasks, 1.0, 0.0, math.inf, 0.0)
    schedule = [Epoch(start, avail) for start, avail in epochs]
    env = TaskEnv(costs, ObservationModel(noise), stream(seed, "noise"))
    stop = StopRule("fixed_count", k_s)
    if policy == "emm-lsi":
        run = restart_lsi_run_task(task, schedule, env, 1.0, 0.0, stop)
    elif policy == "emm-lsi-v":
        run = emm_lsi_v_run_task(task, schedule, env, 1.0, 0.0, stop)
    else:
        raise ValueError(f"utility scenario supports {TABLE1_POLICIES}, got {policy!r}")
    trace = []
    for d in run.decisions:
        c, obs = costs[d.bs_id], d.observed
        trace.append(TraceRecord(1, d.subtask_index, d.epoch_index, d.bs_id, c.comp_delay, 0.0, 0.0,
                                 obs.delay, obs.energy, d.is_handover, 0.0, 1.0))
    return UtilityRun(policy, seed,
                      np.array([utility[d.bs_id] for d in run.decisions]),
                      np.array([d.is_handover for d in run.decisions], dtype=int), trace)


def run_table1_experiment(spec: ExperimentSpec) -> ExperimentResult:
    out_dir = Path(spec.out_dir)
    policies = spec.series or TABLE1_POLICIES
    k_s = spec.base.stop.k_s
    noise = spec.base.observation.relative_half_width
    result = ExperimentResult()
    summary_rows = []
    for policy in policies:
        runs = [table1_run(seed, policy, k_s, noise) for seed in spec.seeds]
        label = point_label("epochs", "table1", policy)
        for run in runs:
            result.files.append(write_trace(out_dir / f"trace_{label}_{run.seed}.csv", run.trace))
            summary_rows.append([label, policy, run.seed, 1, float(run.utilities.mean()), 0.0,
                                 int(run.handovers.sum()), 0, len(run.utilities), math.nan, math.nan,
                                 math.nan, ""])
        avg = np.array([r.running_average for r in runs])
        hos = np.array([r.cumulative_handovers for r in runs], dtype=float)
        for k in range(avg.shape[1]):
            result.plot_rows.append([spec.figure, policy, k + 1, "running_avg_utility",
                                     float(avg[:, k].mean()), float(avg[:, k].std()), len(runs)])
            result.plot_rows.append([spec.figure, policy, k + 1, "cumulative_handovers",
                                     float(hos[:, k].mean()), float(hos[:, k].std()), len(runs)])
    result.files.append(write_summary(out_dir / "summary.csv", summary_rows))
    result.files.append(write_plotdata(out_dir / f"plotdata_{spec.figure}.csv", result.plot_rows))
    if spec.render:
        result.files.append(render_plot(result.plot_rows, out_dir / f"{spec.figure}.png",
                                        errorbars=False))
    return result


# --- presets --------------------------------------------------------------------------------

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


def scaled_base(tasks: int = 100, base: RunConfig | None = None) -> RunConfig:
    """Defaults with the battery scaled so the per-task budget matches 500 tasks at 1000 J."""
    base = base or RunConfig()
    return replace(base, tasks=tasks, battery=1000.0 * tasks / 500)


def figure_spec(figure: str, seeds: Sequence[int], out_dir: str | Path, tasks: int = 100,
                base: RunConfig | None = None, workers: int = 1, render: bool = True) -> ExperimentSpec:
    cfg = scaled_base(tasks, base)
    common = dict(seeds=tuple(seeds), out_dir=Path(out_dir), figure=figure, workers=workers,
                  render=render)
    if figure == "fig2":
        return ExperimentSpec(cfg, "policy", COMPARISON_POLICIES, **common)
    if figure == "fig3":
        return ExperimentSpec(cfg, "v", tuple(float(v) for v in np.logspace(-4, 1, 9)),
                              series=("emm-gsi",), **common)
    if figure == "fig4":
        return ExperimentSpec(cfg, "alpha", tuple(round(0.1 * i, 1) for i in range(1, 11)),
                              series=("emm-gsi", "delay-optimal", "emm-lsi"), **common)
    if figure == "fig5":
        return ExperimentSpec(cfg, "ks", (8, 12, 16, 20, 30, 40, 60, 80), series=("emm-lsi",),
                              **common)
    if figure == "fig6":
        return ExperimentSpec(cfg, "epochs", ("table1",), series=TABLE1_POLICIES, **common)
    raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")


# --- rendering ------------------------------------------------------------------------------

def render_plot(rows: Sequence[Sequence], path: str | Path, categorical: bool = False,
                log_x: bool = False, errorbars: bool = True) -> Path:
    """Draw one panel per metric from plot rows (figure, series, x, metric, mean, std, n)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    metrics = list(dict.fromkeys(r[3] for r in rows))
    fig, axes = plt.subplots(1, max(len(metrics), 1), figsize=(4.2 * max(len(metrics), 1), 3.6),
                             squeeze=False)
    for ax, metric in zip(axes[0], metrics):
        sel = [r for r in rows if r[3] == metric]
        if categorical:
            ax.bar([str(r[1]) for r in sel], [r[4] for r in sel], yerr=[r[5] for r in sel], capsize=3)
            ax.tick_params(axis="x", labelrotation=45)
        else:
            for series in dict.fromkeys(r[1] for r in sel):
                pts = sorted((float(r[2]), r[4], r[5]) for r in sel if r[1] == series)
                xs, ys, es = zip(*pts)
                if errorbars:
                    ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=series)
                else:
                    ax.plot(xs, ys, label=series)
            if log_x:
                ax.set_xscale("log")
            ax.legend(fontsize="small")
        ax.set_title(metric)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
