"""CSV emission for traces, summaries and plot data.

Column order is fixed by the tuples below. Floats are written with ``repr``
so files round-trip exactly and two identical runs give identical bytes.
Booleans are written as 0/1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from emmsim.engine import Aggregate, RunSummary, TraceRecord

TRACE_COLUMNS = tuple(f.name for f in fields(TraceRecord))

SUMMARY_COLUMNS = ("point", "policy", "seed", "tasks", "avg_delay", "total_energy", "handover_total",
                   "deadline_violations", "subtasks", "suboptimal_rate", "max_task_regret",
                   "feasible_avg_delay", "realization_hash")

AGGREGATE_ROWS = ("mean", "std", "min", "max")

PLOT_COLUMNS = ("figure", "series", "x", "metric", "mean", "std", "n")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, np.integer):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_trace(path: str | Path, records: Sequence[TraceRecord]) -> Path:
    return _write(Path(path), TRACE_COLUMNS, (astuple(r) for r in records))


def read_trace(path: str | Path) -> list[TraceRecord]:
    """Parse a trace file back into records (types follow the dataclass fields)."""
    types = {f.name: f.type for f in fields(TraceRecord)}
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for name in TRACE_COLUMNS:
                text, kind = row[name], types[name]
                if kind in ("int", int):
                    values[name] = int(text)
                elif kind in ("bool", bool):
                    values[name] = text == "1"
                else:
                    values[name] = float(text)
            out.append(TraceRecord(**values))
    return out


def summary_row(point: str, s: RunSummary) -> list:
    return [point, s.policy, s.seed, s.tasks, s.avg_delay, s.total_energy, s.handover_total,
            s.deadline_violations, s.subtasks, s.suboptimal_rate, s.max_task_regret,
            s.feasible_avg_delay, s.realization_hash]


def aggregate_rows(point: str, policy: str, agg: Aggregate) -> list[list]:
    """One row per statistic; columns without a statistic are left empty."""
    rows = []
    for stat in AGGREGATE_ROWS:
        by_metric = {m: agg.stats[m][stat] for m in agg.stats}
        rows.append([point, policy, stat, len(agg.summaries), by_metric["avg_delay"],
                     by_metric["total_energy"], by_metric["handover_total"],
                     by_metric["deadline_violations"], "", by_metric["suboptimal_rate"], "",
                     by_metric["feasible_avg_delay"], ""])
    return rows


def write_summary(path: str | Path, rows: Sequence[Sequence]) -> Path:
    return _write(Path(path), SUMMARY_COLUMNS, rows)


def write_plotdata(path: str | Path, rows: Sequence[Sequence]) -> Path:
    return _write(Path(path), PLOT_COLUMNS, rows)


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))
