"""Trace and report files.

A trace is CSV: an optional ``#`` metadata line (problem, settings and a
creation timestamp), one header row, one row per outer iteration, and a
closing ``# status=...`` summary line. Floats are written with 17
significant digits so that they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .driver import IterateRecord, RunOutcome

TRACE_COLUMNS = ("k", "objective", "mu_k", "step_norm", "backtracks",
                 "inner_iterations", "criticality", "cumulative_step")
REPORT_COLUMNS = ("check", "max_violation", "tolerance", "samples", "skipped", "passed", "note")
_INT_COLUMNS = {"k", "backtracks", "inner_iterations", "samples", "skipped"}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _meta_line(meta: Dict[str, object], timestamp: bool) -> str:
    items = dict(meta)
    if timestamp:
        items["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return "# " + " ".join(f"{k}={_meta_value(v)}" for k, v in items.items())


def _meta_value(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ",".join(fmt(u) for u in np.asarray(v, dtype=np.float64).ravel()) + "]"
    if isinstance(v, (float, np.floating, bool, np.bool_, int, np.integer)):
        return fmt(v)
    return str(v).replace(" ", "_")


def trace_rows(trace: Iterable[IterateRecord]) -> List[List[str]]:
    return [[fmt(getattr(r, c)) for c in TRACE_COLUMNS] for r in trace]


def format_trace(outcome: RunOutcome, meta: Optional[Dict[str, object]] = None,
                 timestamp: bool = True) -> str:
    buf = io.StringIO()
    buf.write(_meta_line(meta or {}, timestamp) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    writer.writerows(trace_rows(outcome.trace))
    summary = {
        "status": outcome.status,
        "iterations": outcome.iterations,
        "final_objective": outcome.final_objective,
        "final_criticality": outcome.final_criticality,
        "mu_final": outcome.mu_final,
        "x0_projected": outcome.x0_projected,
        "final_x": outcome.final_x,
    }
    buf.write("# " + " ".join(f"{k}={_meta_value(v)}" for k, v in summary.items()) + "\n")
    return buf.getvalue()


def write_trace(path: str, outcome: RunOutcome, meta: Optional[Dict[str, object]] = None,
                timestamp: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_trace(outcome, meta, timestamp))


def _parse_comment(line: str) -> Dict[str, str]:
    out = {}
    for tok in line.lstrip("#").split():
        key, _, value = tok.partition("=")
        out[key] = value
    return out


def parse_trace(text: str) -> Tuple[Dict[str, str], List[Dict[str, float]], Dict[str, str]]:
    """Split a trace into ``(metadata, rows, summary)``.

    Row values are ints for the count columns and floats otherwise.
    """
    meta, summary, body = {}, {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            fields = _parse_comment(line)
            if "status" in fields:
                summary = fields
            else:
                meta = fields
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(body)
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace header {reader.fieldnames}")
    rows = [{k: (int(v) if k in _INT_COLUMNS else float(v)) for k, v in r.items()} for r in reader]
    return meta, rows, summary


def read_trace(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read())


def format_reports(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        writer.writerow([r.name, fmt(r.max_violation), fmt(r.tolerance), fmt(r.samples),
                         fmt(r.skipped), fmt(r.passed), r.note])
    return buf.getvalue()


def write_reports(path: str, reports) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_reports(reports))


def read_reports(path: str) -> List[Dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
