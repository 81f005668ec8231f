"""Writing reports: one CSV per table, one JSON verdict file, and a
delimited plain-text summary for the terminal."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from arratia_lab.experiments import Report


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def table_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_report(rep: Report, out_dir, figures: bool = True) -> list[Path]:
    """Write ``<out>/<experiment>/`` and return the files written."""
    base = Path(out_dir) / rep.experiment
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for name, tab in rep.tables.items():
        path = base / f"{name}.csv"
        path.write_text(table_csv(tab.header, tab.rows))
        written.append(path)
    path = base / "verdict.json"
    path.write_text(json.dumps(_jsonable(rep.verdict_json()), indent=2) + "\n")
    written.append(path)
    if figures:
        from arratia_lab.plots import render

        written.extend(render(rep, base))
    return written


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def summary(rep: Report) -> str:
    lines = [f"=== {rep.experiment} ===",
             f"seed={rep.config.seed} replicas={rep.config.replicas} elapsed={rep.elapsed:.1f}s",
             "check|verdict|detail"]
    for c in rep.checks:
        lines.append(f"{c.name}|{c.verdict}|{c.detail}")
    lines.append(f"=== {rep.experiment}: {rep.verdict} ===")
    return "\n".join(lines)
