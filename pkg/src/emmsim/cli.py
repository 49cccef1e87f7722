"""Command line entry point: ``emmsim {run,sweep,verify,dump-config}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from emmsim.config import CONFIG_KEYS, POLICIES, RunConfig, dump_config, parse_config
from emmsim.engine import RunSummary, run_simulation, run_with_oracle
from emmsim.errors import EmmError
from emmsim.experiments import FIGURES, SWEEP_VARIABLES, ExperimentSpec, figure_spec, run_experiment
from emmsim.io import summary_row, write_summary, write_trace


class MissingOracleData(EmmError):
    pass


def parse_seeds(text: str) -> list[int]:
    """``7`` -> [7]; ``1..10`` -> [1, ..., 10]; ``1,4,9`` -> [1, 4, 9]."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo_i, hi_i = int(lo), int(hi)
        if hi_i < lo_i:
            raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
        return list(range(lo_i, hi_i + 1))
    return [int(s) for s in text.split(",") if s.strip()]


def report_bounds(summary: RunSummary) -> tuple[str, bool]:
    """Tabulate the delay and energy guarantees of one run; returns (text, all passed)."""
    report = summary.bound_report
    if report is None:
        raise MissingOracleData("no oracle co-run attached to this run; use run_with_oracle")
    lines = [f"policy {summary.policy}  seed {summary.seed}  realization {summary.realization_hash}",
             f"{'inequality':<16}{'measured':>16}{'bound':>16}{'slack':>16}  verdict"]
    for c in report.checks:
        verdict = "PASS" if c.passed else "FAIL"
        lines.append(f"{c.name:<16}{c.measured:>16.6g}{c.bound:>16.6g}{c.slack:>16.6g}  {verdict}")
    if report.excluded_frames:
        lines.append(f"warning: oracle infeasible in frames {list(report.excluded_frames)}, excluded")
    if report.surrogate:
        lines.append(f"note: learning deviation W = {report.learning_dev:.6g} is an empirical surrogate "
                     "(max measured per-task regret), not a proven constant")
    return "\n".join(lines), report.passed


def _load_config(args) -> RunConfig:
    config = parse_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None):
        overrides["policy"] = args.policy
    return replace(config, **overrides) if overrides else config


def cmd_run(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = parse_seeds(args.seeds) if args.seeds else [config.seed]
    rows = []
    for seed in seeds:
        cfg = replace(config, seed=seed)
        trace, summary = run_simulation(cfg)
        write_trace(out / f"trace_{cfg.policy}_{seed}.csv", trace)
        rows.append(summary_row(cfg.policy, summary))
        print(f"seed {seed}: avg_delay {summary.avg_delay:.6g} s  total_energy "
              f"{summary.total_energy:.6g} J  handovers {summary.handover_total}  "
              f"deadline violations {summary.deadline_violations}")
    write_summary(out / "summary.csv", rows)
    (out / "config.txt").write_text(dump_config(config))
    return 0


def cmd_sweep(args) -> int:
    seeds = parse_seeds(args.seeds)
    base = parse_config(args.config) if args.config else None
    if args.figure:
        spec = figure_spec(args.figure, seeds, args.out, tasks=args.tasks, base=base,
                           workers=args.workers, render=not args.no_render)
    else:
        if not args.var or not args.values:
            raise SystemExit("sweep needs --figure or both --var and --values")
        cfg = base or RunConfig()
        if args.policy:
            cfg = replace(cfg, policy=args.policy)
        values = tuple(v.strip() for v in args.values.split(",") if v.strip())
        if args.var in ("v", "alpha"):
            values = tuple(float(v) for v in values)
        elif args.var == "ks":
            values = tuple(int(v) for v in values)
        series = tuple(s for s in (args.series or "").split(",") if s)
        spec = ExperimentSpec(cfg, args.var, values, tuple(seeds), Path(args.out), series=series,
                              figure=args.name, workers=args.workers, render=not args.no_render)
    result = run_experiment(spec)
    print(f"wrote {len(result.files)} files to {spec.out_dir}")
    return 0


def cmd_verify(args) -> int:
    config = _load_config(args)
    seeds = parse_seeds(args.seeds) if args.seeds else [config.seed]
    ok = True
    for seed in seeds:
        cfg = replace(config, seed=seed)
        if cfg.epochs.model != "none":
            raise MissingOracleData("the lookahead oracle needs epochs.model = none")
        _, summary, _ = run_with_oracle(cfg)
        text, passed = report_bounds(summary)
        print(text)
        print()
        ok &= passed
    print("all guarantees hold" if ok else "GUARANTEE VIOLATED")
    return 0 if ok else 1


def cmd_dump_config(args) -> int:
    sys.stdout.write(dump_config(_load_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emmsim", description="Energy-aware mobility management "
                                     "simulator for edge computing in dense cellular networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seeds=True):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--policy", choices=POLICIES, help="override the configured policy")
        if seeds:
            p.add_argument("--seeds", help="seed list: n, n..m or a,b,c")

    p = sub.add_parser("run", help="simulate one configuration and write traces")
    common(p)
    p.add_argument("--out", default="out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep or a figure preset")
    p.add_argument("--config", help="base configuration file")
    p.add_argument("--policy", choices=POLICIES, help="policy for custom sweeps")
    p.add_argument("--seeds", default="1..10", help="seed list: n, n..m or a,b,c")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--figure", choices=FIGURES, help="preset sweep")
    p.add_argument("--tasks", type=int, default=100, help="tasks per run for presets (battery scales)")
    p.add_argument("--var", choices=SWEEP_VARIABLES, help="custom sweep variable")
    p.add_argument("--values", help="comma-separated sweep values")
    p.add_argument("--series", help="comma-separated policies run at every point")
    p.add_argument("--name", default="custom", help="figure name used in output file names")
    p.add_argument("--workers", type=int, default=1, help="parallel seed workers")
    p.add_argument("--no-render", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="co-run the lookahead oracle and check the delay/energy bounds")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dump-config", help=f"print all {len(CONFIG_KEYS)} effective settings")
    common(p, seeds=False)
    p.set_defaults(func=cmd_dump_config)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
