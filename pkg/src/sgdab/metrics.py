"""Metric rows shared by the solvers' benchmark traces and the CSV writer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Iterable, Optional

__all__ = ["MetricRow", "MetricTrace", "COLUMNS"]

COLUMNS = (
    "method",
    "seed",
    "oracle_calls",
    "iter",
    "grad_norm_sq",
    "map_norm",
    "primal_value",
    "train_error",
    "wall_ms",
)


@dataclass(frozen=True)
class MetricRow:
    method: str
    seed: int
    oracle_calls: int
    iter: int
    grad_norm_sq: Optional[float] = None
    map_norm: Optional[float] = None
    primal_value: Optional[float] = None
    train_error: Optional[float] = None
    wall_ms: Optional[float] = None
    epoch: Optional[float] = None

    @classmethod
    def from_metrics(cls, method, seed, calls, it, metrics: dict, wall_ms=None, **extra):
        keys = ("grad_norm_sq", "map_norm", "primal_value", "train_error", "epoch")
        kw = {k: metrics[k] for k in keys if k in metrics}
        kw.update(extra)
        return cls(method, int(seed), int(calls), int(it), wall_ms=wall_ms, **kw)


@dataclass
class MetricTrace:
    """Ordered rows of per-iteration metrics for one or more (method, seed) cells."""

    rows: list = field(default_factory=list)
    diverged: set = field(default_factory=set)

    def append(self, row: MetricRow) -> None:
        self.rows.append(row)

    def extend(self, other: "MetricTrace") -> None:
        self.rows.extend(other.rows)
        self.diverged |= other.diverged

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def cells(self) -> list:
        """Distinct ``(method, seed)`` pairs in first-appearance order."""
        seen = {}
        for r in self.rows:
            seen.setdefault((r.method, r.seed), None)
        return list(seen)

    def select(self, method: Optional[str] = None, seed: Optional[int] = None) -> "MetricTrace":
        rows = [r for r in self.rows
                if (method is None or r.method == method) and (seed is None or r.seed == seed)]
        div = {c for c in self.diverged
               if (method is None or c[0] == method) and (seed is None or c[1] == seed)}
        return MetricTrace(rows, div)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def has_epochs(self) -> bool:
        return any(r.epoch is not None for r in self.rows)

    def check(self) -> None:
        """Oracle calls nondecreasing per cell; metrics finite."""
        last = {}
        for r in self.rows:
            key = (r.method, r.seed)
            if r.oracle_calls < last.get(key, -1):
                raise ValueError(f"oracle calls decrease in cell {key}")
            last[key] = r.oracle_calls
            for f in fields(r):
                v = getattr(r, f.name)
                if isinstance(v, float) and not math.isfinite(v):
                    raise ValueError(f"non-finite {f.name} in cell {key}")


def first_crossing(rows: Iterable[MetricRow], threshold: float, metric: str = "grad_norm_sq"):
    """Oracle calls of the first row whose metric is at or below ``threshold``; ``None`` if never."""
    for r in rows:
        v = getattr(r, metric)
        if v is not None and v <= threshold:
            return r.oracle_calls
    return None
