"""CSV traces, median curves, gnuplot scripts and matplotlib figures."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .metrics import COLUMNS, MetricRow, MetricTrace

__all__ = [
    "write_csv",
    "read_csv",
    "median_trace",
    "emit_plot_script",
    "render_figures",
    "write_table",
    "PLOT_METRICS",
]

PLOT_METRICS = ("grad_norm_sq", "map_norm", "primal_value", "train_error")
_INT_COLS = ("seed", "oracle_calls", "iter")
MEDIAN_SEED = -1


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        # shortest repr round-trips and never needs more than 17 digits
        return repr(float(v))
    return str(v)


def write_csv(trace: MetricTrace, path) -> None:
    """Write ``trace`` with the fixed header (plus ``epoch`` when any row has one)."""
    path = Path(path)
    cols = COLUMNS + (("epoch",) if trace.has_epochs() else ())
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in trace.rows:
                w.writerow([_fmt(getattr(r, c)) for c in cols])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def read_csv(path) -> MetricTrace:
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            if header is None or tuple(header[: len(COLUMNS)]) != COLUMNS:
                raise ValueError(f"{path}: unexpected header {header}")
            out = MetricTrace()
            for lineno, row in enumerate(rd, start=2):
                kw = {}
                for name, cell in zip(header, row):
                    if name == "method":
                        kw[name] = cell
                    elif cell == "":
                        kw[name] = None
                    elif name in _INT_COLS:
                        kw[name] = int(cell)
                    else:
                        kw[name] = float(cell)
                try:
                    out.append(MetricRow(**kw))
                except TypeError as e:
                    raise ValueError(f"{path}:{lineno}: {e}") from e
            return out
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e


def _step_values(calls: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # last recorded value at or before each grid point; NaN before the first row
    idx = np.searchsorted(calls, grid, side="right") - 1
    out = np.full(grid.shape, np.nan)
    ok = idx >= 0
    out[ok] = values[idx[ok]]
    return out


def median_trace(trace: MetricTrace, metrics: Sequence[str] = PLOT_METRICS + ("epoch",)) -> MetricTrace:
    """Per-method median over seeds on the union of oracle-call grid points.

    Each seed contributes its most recent row at or before a grid point
    (rows are discrete, nothing is interpolated). Median rows carry
    ``seed = -1``.
    """
    out = MetricTrace()
    methods = []
    for m, _ in trace.cells():
        if m not in methods:
            methods.append(m)
    for m in methods:
        sub = trace.select(method=m)
        seeds = sorted({r.seed for r in sub.rows})
        grid = np.unique(np.array([r.oracle_calls for r in sub.rows], dtype=np.int64))
        per_metric = {}
        for name in metrics:
            cols = []
            for s in seeds:
                rows = sub.select(seed=s).rows
                vals = np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows])
                calls = np.array([r.oracle_calls for r in rows])
                cols.append(_step_values(calls, vals, grid))
            stack = np.vstack(cols)
            med = np.full(grid.shape, np.nan)
            have = ~np.all(np.isnan(stack), axis=0)
            if have.any():
                med[have] = np.nanmedian(stack[:, have], axis=0)
            per_metric[name] = med
        for j, c in enumerate(grid):
            kw = {name: (None if np.isnan(per_metric[name][j]) else float(per_metric[name][j]))
                  for name in metrics}
            out.append(MetricRow(m, MEDIAN_SEED, int(c), j, **kw))
    return out


def _methods_in(path: Path) -> list:
    with open(path, encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        next(rd, None)
        seen = {}
        for row in rd:
            if row:
                seen.setdefault(row[0], None)
    return list(seen)


def _gp_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_plot_script(csv_paths: Iterable, out_path, metrics: Sequence[str] = PLOT_METRICS,
                     title: Optional[str] = None) -> None:
    """Write a gnuplot script with one log-y panel per metric vs oracle calls.

    Every method found in every CSV becomes one curve, titled by the
    method name. The script refers to the CSVs by basename, so it is meant
    to sit next to them; it is never executed here.
    """
    csv_paths = [Path(p) for p in csv_paths]
    out_path = Path(out_path)
    curves = [(p.name, m) for p in csv_paths for m in _methods_in(p)]
    stem = out_path.stem
    lines = [
        "# gnuplot script; run with: gnuplot " + out_path.name,
        "set datafile separator \",\"",
        "set terminal pngcairo size 800,600",
        "set logscale y",
        "set format y \"%.0e\"",
        "set xlabel \"oracle calls\"",
        "set key outside right",
        "set grid",
    ]
    if title:
        lines.append(f"set title {_gp_quote(title)}")
    for metric in metrics:
        lines.append("")
        lines.append(f"set output {_gp_quote(f'{stem}_{metric}.png')}")
        lines.append(f"set ylabel {_gp_quote(metric)}")
        if not curves:
            lines.append("# no data")
            continue
        parts = []
        for fname, method in curves:
            using = f"3:(strcol(1) eq {_gp_quote(method)} ? column({_gp_quote(metric)}) : NaN)"
            parts.append(f"{_gp_quote(fname)} using {using} with lines title {_gp_quote(method)}")
        lines.append("plot " + ", \\\n     ".join(parts))
    try:
        out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write {out_path}: {e}") from e


def render_figures(trace: MetricTrace, out_prefix, metrics: Sequence[str] = PLOT_METRICS,
                   title: Optional[str] = None) -> list:
    """Render median curves to ``<out_prefix>_<metric>.png``; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    med = median_trace(trace, tuple(metrics))
    written = []
    methods = []
    for m, _ in med.cells():
        if m not in methods:
            methods.append(m)
    for metric in metrics:
        if all(getattr(r, metric) is None for r in med.rows):
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        for m in methods:
            rows = [r for r in med.select(method=m).rows if getattr(r, metric) is not None]
            x = [r.oracle_calls for r in rows]
            y = [getattr(r, metric) for r in rows]
            if any(v <= 0 for v in y):
                y = [v if v > 0 else np.nan for v in y]
            ax.plot(x, y, label=m)
        ax.set_yscale("log")
        ax.set_xlabel("oracle calls")
        ax.set_ylabel(metric)
        if title:
            ax.set_title(title)
        ax.legend()
        ax.grid(True, alpha=0.3)
        path = Path(f"{out_prefix}_{metric}.png")
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)
        written.append(path)
    return written


def write_table(rows: Sequence[dict], path, columns: Sequence[str]) -> None:
    """Plain CSV table of dicts (summary tables)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def finite_or_none(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v
