"""Estimate reports: the one record type every inequality check returns.

A report carries the left-hand side, the named right-hand-side factors, an
optional fitted (C, beta), a pass flag, and a parameter echo.  Serialization
is deterministic (sorted keys, repr floats) so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


def _plain(obj):
    """Convert numpy scalars/arrays to plain JSON-serializable Python."""
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


@dataclass
class EstimateReport:
    """One inequality check: lhs vs named rhs factors, pass flag, metadata."""

    kind: str
    lhs: float
    rhs_factors: dict
    passed: bool
    fitted: dict | None = None  # {"C": ..., "beta": ...} when a fit is attached
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "lhs": _plain(self.lhs),
            "rhs_factors": _plain(self.rhs_factors),
            "pass": bool(self.passed),
            "meta": _plain(self.meta),
        }
        if self.fitted is not None:
            out["fitted"] = _plain(self.fitted)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def write_reports(reports, path) -> None:
    """Write a list of reports as one JSON document (deterministic bytes)."""
    payload = [r.to_dict() for r in reports]
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_reports(path) -> list[dict]:
    with open(path) as fh:
        data = json.load(fh)
    return data if isinstance(data, list) else [data]


def write_table(rows: list[dict], columns: list[str], path) -> None:
    """Write an ensemble table as CSV; floats use repr for exact round-trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def _format_cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
