"""Structured verification results shared by all checking routines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


def _clean(v: Any) -> Any:
    """JSON-safe, deterministic representation."""
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        return float(f"{v:.12g}")
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "numerator") and hasattr(v, "denominator") and not isinstance(v, (int, bool)):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else v.numerator
    return v


@dataclass
class Report:
    """Outcome of one verification.

    ``passed`` implies ``max_residual <= tolerance`` for numeric checks;
    exact checks report a residual of 0.
    """

    label: str
    passed: bool
    max_residual: float = 0.0
    tolerance: float | None = None
    rows: list = field(default_factory=list)
    seed: int | None = None
    settings: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed

    def add_row(self, **row) -> None:
        self.rows.append(row)

    def to_dict(self) -> dict:
        return _clean(
            {
                "label": self.label,
                "passed": self.passed,
                "max_residual": self.max_residual,
                "tolerance": self.tolerance,
                "seed": self.seed,
                "settings": self.settings,
                "rows": self.rows,
                "notes": self.notes,
            }
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kwargs)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        tol = "" if self.tolerance is None else f" (tol {self.tolerance:g})"
        return f"{verdict} {self.label}: max residual {self.max_residual:.3g}{tol}"


def combine(label: str, reports: list, **settings) -> Report:
    out = Report(label, all(r.passed for r in reports), settings=settings)
    out.max_residual = max((r.max_residual for r in reports), default=0.0)
    for r in reports:
        out.add_row(label=r.label, passed=r.passed, max_residual=r.max_residual)
    return out


json_clean = _clean
