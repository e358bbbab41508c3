"""Structured experiment reports."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from functools import wraps

import numpy as np

REPORT_SCHEMA = 1
SIGNIFICANT = 12  # digits kept in report.json; hides last-bit BLAS noise


def clean(x):
    """JSON-safe, deterministic copy of nested report data."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{SIGNIFICANT}g}")
    if x is None or isinstance(x, str):
        return x
    return str(x)


@dataclass
class EstimateReport:
    """Outcome of one named experiment.

    ``checks`` holds the named pass/fail assertions; the report passes when
    all of them do.  ``measured`` holds the headline numbers (constants,
    errors, rates), ``series`` one row per refinement level or sample.
    ``mesh_hashes`` and ``tolerance`` are always present, empty for mesh-free
    experiments.
    """

    name: str
    measured: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    mesh_hashes: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def check(self, name: str, ok) -> bool:
        self.checks[name] = bool(ok)
        return bool(ok)

    def add_mesh(self, mesh) -> None:
        h = mesh.digest
        if h not in self.mesh_hashes:
            self.mesh_hashes.append(h)

    def failed_checks(self) -> list:
        return [k for k, v in self.checks.items() if not v]

    def to_dict(self, runtime: bool = False) -> dict:
        doc = {
            "schema": REPORT_SCHEMA, "experiment": self.name, "passed": self.passed,
            "checks": self.checks, "measured": self.measured, "inputs": self.inputs,
            "series": self.series, "tolerance": self.tolerance, "mesh_hashes": self.mesh_hashes,
            "notes": self.notes, "tables": sorted(self.tables),
        }
        if runtime:
            doc["runtime"] = self.runtime
        return clean(doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bad = self.failed_checks()
        tail = f" (failed: {', '.join(bad)})" if bad else ""
        return f"{status} {self.name}{tail}"


def timed(fn):
    """Record wall time of a report-returning function in ``report.runtime``."""

    @wraps(fn)
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        rep = fn(*args, **kw)
        rep.runtime = time.perf_counter() - t0
        return rep

    return wrapper


def slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def table_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
