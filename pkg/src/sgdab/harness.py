"""Benchmark drivers and the command-line entry point.

``bench`` runs every configured method on every seed from a shared start
``(x0, y0)`` and writes, per problem instance family, a full trace CSV,
per-method median curves, summary tables, a gnuplot script and PNG
figures. ``solve`` runs one backtracking solve and prints a summary.
``selftest`` runs the built-in numerical checks.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .baselines import BaselineConfig, run_baseline
from .config import ConfigError, ExperimentConfig, load_config
from .core import BudgetExceededError, DivergenceError, MinimaxProblem, RngStream, SgdabError
from .inner import point_metrics
from .metrics import MetricRow, MetricTrace, first_crossing
from .oracle import OracleHandle, OracleSpec, deterministic_gradient_map
from .outer import Budget, RunResult, SgdabConfig, init_y0, sgdab, sgdab_budgeted, wcmc_solve, wcmc_wrap
from .problems import (
    LinearModel,
    TinyMLP,
    dro_train_error,
    load_libsvm,
    make_bilinear,
    make_bilinear_wcmc,
    make_dro,
    make_synthetic_classification,
    normalize_minmax,
)
from .report import emit_plot_script, median_trace, render_figures, write_csv, write_table

__all__ = [
    "BenchReport",
    "spectral_norm",
    "mixed_partial_matrix",
    "estimate_sigmas",
    "reproduce_bilinear",
    "reproduce_dro",
    "run_bench",
    "solve_once",
    "cli_main",
    "THRESHOLDS",
]

THRESHOLDS = (1e-1, 1e-2)
CELL_COLUMNS = ("method", "seed", "status", "total_calls", "init_calls", "backtracks", "tolerance",
                "G_tilde_norm", "calls_to_1e-1", "calls_to_1e-2", "final_grad_norm_sq",
                "final_primal_value", "final_train_error")
SUMMARY_COLUMNS = ("method", "cells", "median_calls_to_1e-1", "reached_1e-1",
                   "median_calls_to_1e-2", "reached_1e-2", "median_total_calls")
GRID_COLUMNS = ("tau0", "sigma0", "median_final", "diverged", "selected")

# stream ids under each root seed
_INIT_STREAM, _SGDAB_STREAM, _BASELINE_STREAM = 10, 11, 12


@dataclass
class BenchReport:
    label: str
    trace: MetricTrace
    cells: list
    summary: list
    tiada_grid: list = field(default_factory=list)
    files: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Estimators used to parameterize the baselines
# --------------------------------------------------------------------------

def spectral_norm(B: np.ndarray, iters: int = 200, tol: float = 1e-9) -> float:
    """Largest singular value by power iteration on ``B'B`` from the all-ones vector."""
    B = np.asarray(B, dtype=np.float64)
    v = np.ones(B.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = B.T @ (B @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - est) <= tol * max(new, 1e-300):
            return new
        est = new
    return est


def mixed_partial_matrix(problem: MinimaxProblem, x, y) -> np.ndarray:
    """The mixed second derivative of ``f`` at ``(x, y)`` as a ``dim_y x n`` matrix.

    Built column by column from primal gradients along dual unit vectors,
    exact whenever the primal gradient is affine in ``y`` (true for the
    bilinear and DRO problems).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g0 = problem.grad_x(x, y)
    cols = np.empty((problem.n, problem.dim_y))
    e = y.copy()
    for j in range(problem.dim_y):
        e[j] += 1.0
        cols[:, j] = problem.grad_x(x, e) - g0
        e[j] = y[j]
    return cols.T


def estimate_sigmas(problem: MinimaxProblem, x, y, samples: int, rng: RngStream) -> tuple:
    """Monte Carlo estimate of ``E||s - grad||^2`` for single-sample estimates."""
    gen = rng.gen
    gx, gy = problem.grad_x(x, y), problem.grad_y(x, y)
    vx = vy = 0.0
    for _ in range(samples):
        sx = problem.sample_grad_x(x, y, gen, 1)
        sy = problem.sample_grad_y(x, y, gen, 1)
        vx += float((sx - gx) @ (sx - gx))
        vy += float((sy - gy) @ (sy - gy))
    return vx / samples, vy / samples


# --------------------------------------------------------------------------
# Problem and start construction
# --------------------------------------------------------------------------

def _dataset(cfg: ExperimentConfig):
    pr = cfg.problem
    if cfg.experiment == "dro-libsvm":
        X, b = load_libsvm(pr.path)
        return normalize_minmax(X), b
    return make_synthetic_classification(pr.n_data, pr.d, pr.data_seed, pr.separation)


def _model(cfg: ExperimentConfig):
    return LinearModel() if cfg.problem.model == "linear" else TinyMLP(cfg.problem.hidden)


def build_problem(cfg: ExperimentConfig, seed: int, L_target: Optional[float] = None, data=None):
    pr = cfg.problem
    L = pr.L_target if L_target is None else L_target
    if isinstance(L, list):
        L = L[0]
    if cfg.experiment == "bilinear":
        return make_bilinear(pr.m, pr.n, L, pr.mu_y, seed)
    if cfg.experiment == "bilinear-wcmc":
        return make_bilinear_wcmc(pr.m, pr.n, L, pr.D_y, seed, pr.x_radius)
    X, b = data if data is not None else _dataset(cfg)
    return make_dro(X, b, pr.mu_reg, _model(cfg), seed=pr.data_seed)


def make_x0(cfg: ExperimentConfig, problem: MinimaxProblem) -> np.ndarray:
    spec, n = cfg.x0, problem.n
    if spec == "auto":
        if cfg.experiment.startswith("dro"):
            model = problem.extras["model"]
            return model.init(problem.extras["features"].shape[1], RngStream(cfg.problem.data_seed, 3).gen)
        if cfg.experiment == "bilinear-wcmc":
            return np.ones(n) * (0.5 * cfg.problem.x_radius / math.sqrt(n))
        spec = "ones"
    if spec == "ones":
        return np.ones(n)
    if spec == "zeros":
        return np.zeros(n)
    if isinstance(spec, list):
        x = np.asarray(spec, dtype=np.float64)
        if x.shape != (n,):
            raise ConfigError(f"x0 has length {x.size}, expected {n}")
        return x
    if isinstance(spec, dict) and set(spec) <= {"norm", "seed"} and "norm" in spec:
        v = RngStream(int(spec.get("seed", 0)), 4).gen.standard_normal(n)
        return v * (float(spec["norm"]) / np.linalg.norm(v))
    raise ConfigError(f"x0 must be 'auto', 'ones', 'zeros', a list or {{'norm': r, 'seed': s}}, got {spec!r}")


def make_spec(cfg: ExperimentConfig, sigmas=None) -> OracleSpec:
    n = cfg.noise
    if n.noise == "deterministic" or (n.noise == "gaussian" and n.sigma == 0):
        return OracleSpec.deterministic()
    if n.noise == "minibatch":
        sx2, sy2 = sigmas
        return OracleSpec(math.sqrt(sx2), math.sqrt(sy2), "minibatch")
    return OracleSpec(n.sigma, n.sigma, "gaussian", n.scaling)


# --------------------------------------------------------------------------
# Cells
# --------------------------------------------------------------------------

def _finish_rows(rows: list, cfg: ExperimentConfig, n_data: Optional[int]) -> list:
    out = []
    for r in rows:
        kw = {}
        if not cfg.wall_clock:
            kw["wall_ms"] = None
        if n_data:
            kw["epoch"] = r.oracle_calls / n_data
        out.append(dataclasses.replace(r, **kw) if kw else r)
    return out


def _sgdab_config(cfg: ExperimentConfig, method: str, x0, y0, sigmas, extra) -> SgdabConfig:
    s = cfg.solver
    sx2 = s.sigma_x2 if s.sigma_x2 is not None else (sigmas[0] if sigmas else None)
    sy2 = s.sigma_y2 if s.sigma_y2 is not None else (sigmas[1] if sigmas else None)
    return SgdabConfig(
        epsilon=s.epsilon, epsilon_tilde=s.epsilon_tilde, p=s.p, gamma=s.gamma, x0=x0,
        max_backtracks=s.max_backtracks, inner=s.inner,
        budget=Budget(s.K, s.M) if method == "sgdab-budgeted" else None,
        y0=y0, init_batch=s.init_batch, sigma_x2=sx2, sigma_y2=sy2,
        max_oracle_calls=s.max_oracle_calls, record_trace=True, trace_stride=s.trace_stride,
        extra_metrics=extra, workers=s.workers,
    )


def _run_sgdab_cell(cfg, problem, spec, method, seed, x0, y0, sigmas, extra):
    sc = _sgdab_config(cfg, method, x0, y0, sigmas, extra)
    rng = RngStream(seed, _SGDAB_STREAM)
    res, status = None, "ok"
    try:
        if cfg.experiment == "bilinear-wcmc":
            res = wcmc_solve(problem, cfg.problem.D_y, np.zeros(problem.dim_y), sc, spec, rng)
        elif method == "sgdab-budgeted":
            res = sgdab_budgeted(problem, spec, sc, rng)
        else:
            res = sgdab(problem, spec, sc, rng)
        trace = res.trace
    except BudgetExceededError as e:
        status, trace = "budget", e.trace
    rows, offset = [], 0
    if trace is not None:
        for rec in trace.records:
            for k, c, m in rec.trajectory:
                rows.append(MetricRow.from_metrics(method, seed, c, offset + k, m))
            offset += rec.K
    if res is not None:
        metric_problem = res.extras.get("regularized_problem", problem)
        r = res.trace.records[-1]
        m = point_metrics(metric_problem, res.x_eps.data, res.y_eps, r.eta_x, r.eta_y, extra)
        rows.append(MetricRow.from_metrics(method, seed, res.calls, offset, m))
    info = {"status": status, "result": res,
            "total_calls": res.calls if res is not None else (rows[-1].oracle_calls if rows else 0),
            "backtracks": res.backtracks if res is not None else (trace.depth if trace else None),
            "tolerance": res.tolerance if res is not None else None,
            "G_tilde_norm": res.G_tilde_norm if res is not None else None}
    return rows, info


def _run_baseline_cell(cfg, problem, spec, bcfg: BaselineConfig, seed, x0, y0, extra):
    handle = OracleHandle(problem, spec, RngStream(seed, _BASELINE_STREAM))
    try:
        tr = run_baseline(problem, handle, bcfg, x0, y0, seed=seed, extra_metrics=extra)
        status = "ok"
    except DivergenceError as e:
        tr, status = e.trace, "diverged"
    return list(tr.rows), {"status": status, "total_calls": handle.calls, "backtracks": None,
                           "tolerance": None, "G_tilde_norm": None}


def _cell_row(method, seed, rows, info, init_calls):
    last = rows[-1] if rows else None
    out = {"method": method, "seed": seed, "status": info["status"], "total_calls": info["total_calls"],
           "init_calls": init_calls, "backtracks": info["backtracks"], "tolerance": info["tolerance"],
           "G_tilde_norm": info["G_tilde_norm"]}
    for thr in THRESHOLDS:
        out[f"calls_to_{thr:.0e}".replace("e-0", "e-")] = first_crossing(rows, thr)
    if last is not None:
        out["final_grad_norm_sq"] = last.grad_norm_sq
        out["final_primal_value"] = last.primal_value
        out["final_train_error"] = last.train_error
    return out


def _median_or_none(vals):
    arr = np.array([math.inf if v is None else v for v in vals], dtype=np.float64)
    med = float(np.median(arr)) if arr.size else math.inf
    return None if not math.isfinite(med) else med


def _summarize(cells: list, methods: Sequence[str]) -> list:
    out = []
    for m in methods:
        cs = [c for c in cells if c["method"] == m]
        if not cs:
            continue
        row = {"method": m, "cells": len(cs)}
        for key, thr in (("1e-1", 1e-1), ("1e-2", 1e-2)):
            vals = [c[f"calls_to_{key}"] for c in cs]
            row[f"median_calls_to_{key}"] = _median_or_none(vals)
            row[f"reached_{key}"] = sum(v is not None for v in vals)
        row["median_total_calls"] = _median_or_none([c["total_calls"] for c in cs])
        out.append(row)
    return out


# --------------------------------------------------------------------------
# Bench driver
# --------------------------------------------------------------------------

def _bench(cfg: ExperimentConfig, label: str, instance: Callable, out_dir: Optional[Path],
           L_estimate: Optional[Callable] = None, select_metric: str = "grad_norm_sq",
           n_data: Optional[int] = None, log: Callable = print) -> BenchReport:
    """Shared loop: one problem instance per seed, all methods from ``(x0, y0)``."""
    trace = MetricTrace()
    cells, results = [], {}
    grid_rows = []
    s, b = cfg.solver, cfg.baselines
    setups = {}
    for seed in cfg.seeds:
        setups[seed] = instance(seed)

    for method in cfg.methods:
        if method == "tiada":
            continue
        for seed in cfg.seeds:
            st = setups[seed]
            t0 = time.perf_counter()
            if method.startswith("sgdab"):
                rows, info = _run_sgdab_cell(cfg, st["problem"], st["spec"], method, seed, st["x0"],
                                             st["y0"], st.get("sigmas"), st.get("extra"))
                results[(method, seed)] = info.pop("result")
            else:
                L_in = b.L_input if b.L_input is not None else st["L"]
                k_in = b.kappa_input if b.kappa_input is not None else st["kappa"]
                bcfg = BaselineConfig(method, b.iterations, M=s.M, L_input=L_in, kappa_input=k_in,
                                      record_every=b.record_every)
                rows, info = _run_baseline_cell(cfg, st["problem"], st["spec"], bcfg, seed, st["x0"],
                                                st["y0"], st.get("extra"))
            rows = _finish_rows(rows, cfg, n_data)
            trace.rows.extend(rows)
            if info["status"] == "diverged":
                trace.diverged.add((method, seed))
            cells.append(_cell_row(method, seed, rows, info, st["init_calls"]))
            log(f"[{label}] {method} seed={seed} status={info['status']} calls={info['total_calls']} "
                f"({time.perf_counter() - t0:.1f}s)")

    if "tiada" in cfg.methods:
        best = None
        for tau0 in b.tiada_grid:
            for sigma0 in b.tiada_grid:
                bcfg = BaselineConfig("tiada", b.iterations, M=s.M, tau0=tau0, sigma0=sigma0,
                                      record_every=b.record_every)
                runs, finals, ndiv = [], [], 0
                for seed in cfg.seeds:
                    st = setups[seed]
                    rows, info = _run_baseline_cell(cfg, st["problem"], st["spec"], bcfg, seed,
                                                    st["x0"], st["y0"], st.get("extra"))
                    rows = _finish_rows(rows, cfg, n_data)
                    runs.append((seed, rows, info))
                    ndiv += info["status"] == "diverged"
                    v = getattr(rows[-1], select_metric) if rows and info["status"] == "ok" else None
                    finals.append(math.inf if v is None else v)
                med = float(np.median(finals))
                grid_rows.append({"tau0": tau0, "sigma0": sigma0, "median_final": med if math.isfinite(med) else None,
                                  "diverged": ndiv, "selected": 0})
                if best is None or med < best[0]:
                    best = (med, len(grid_rows) - 1, runs)
                log(f"[{label}] tiada tau0={tau0:g} sigma0={sigma0:g} median final {select_metric}={med:.3g}")
        grid_rows[best[1]]["selected"] = 1
        for seed, rows, info in best[2]:
            trace.rows.extend(rows)
            if info["status"] == "diverged":
                trace.diverged.add(("tiada", seed))
            cells.append(_cell_row("tiada", seed, rows, info, setups[seed]["init_calls"]))

    summary = _summarize(cells, cfg.methods)
    report = BenchReport(label, trace, cells, summary, grid_rows, results=results,
                         info={k: v for k, v in setups[cfg.seeds[0]].items()
                               if k in ("L", "kappa", "sigmas", "init_calls")})
    if out_dir is not None:
        _write_outputs(report, Path(out_dir) / label, n_data is not None)
    return report


def _write_outputs(report: BenchReport, d: Path, dro: bool) -> None:
    d.mkdir(parents=True, exist_ok=True)
    metrics = ("grad_norm_sq", "map_norm", "primal_value") + (("train_error",) if dro else ())
    files = []
    write_csv(report.trace, d / "trace.csv")
    med = median_trace(report.trace, metrics + (("epoch",) if dro else ()))
    write_csv(med, d / "median.csv")
    write_table(report.cells, d / "summary_cells.csv", CELL_COLUMNS)
    write_table(report.summary, d / "summary.csv", SUMMARY_COLUMNS)
    files += [d / "trace.csv", d / "median.csv", d / "summary_cells.csv", d / "summary.csv"]
    if report.tiada_grid:
        write_table(report.tiada_grid, d / "tiada_grid.csv", GRID_COLUMNS)
        files.append(d / "tiada_grid.csv")
    emit_plot_script([d / "median.csv"], d / "plot.gp", metrics, title=report.label)
    files.append(d / "plot.gp")
    files += render_figures(report.trace, d / "figure", metrics, title=report.label)
    report.files = files


def _bilinear_instance(cfg: ExperimentConfig, L: float):
    s = cfg.solver

    def instance(seed):
        problem = build_problem(cfg, seed, L)
        spec = make_spec(cfg)
        x0 = make_x0(cfg, problem)
        init_problem = problem
        if cfg.experiment == "bilinear-wcmc":
            init_problem = wcmc_wrap(problem, s.epsilon / (2.0 * cfg.problem.D_y), np.zeros(problem.dim_y))
        h = OracleHandle(init_problem, spec, RngStream(seed, _INIT_STREAM))
        y0 = init_y0(init_problem, h, x0, s.epsilon_tilde, RngStream(seed, _INIT_STREAM + 100),
                     batch=s.init_batch)
        d = problem.diagnostics
        L_true = d.L
        kappa = d.kappa if d.kappa is not None else L_true / init_problem.mu
        return {"problem": problem, "spec": spec, "x0": x0, "y0": y0, "init_calls": h.calls,
                "L": L_true, "kappa": kappa}

    return instance


def reproduce_bilinear(L_target: float, seeds: Sequence[int], config: Optional[ExperimentConfig] = None,
                       out_dir=None, log: Callable = print) -> BenchReport:
    """Method comparison on the regularized bilinear problem.

    One matrix pair per seed, shared start ``(x0, y0)`` per seed. ``y0`` comes
    from the stochastic dual initializer; its calls are reported in
    ``init_calls`` and kept out of the curves. GDA and AGDA receive the true
    ``L`` and ``kappa`` from the instance diagnostics.
    """
    if config is None:
        from .config import config_from_dict
        config = config_from_dict({"experiment": "bilinear",
                                   "methods": ["sgdab-budgeted", "gda", "agda", "tiada"],
                                   "seeds": list(seeds)})
    cfg = dataclasses.replace(config, seeds=list(seeds))
    label = f"{cfg.experiment}_L{L_target:g}"
    return _bench(cfg, label, _bilinear_instance(cfg, L_target), out_dir, log=log)


def reproduce_dro(config: ExperimentConfig, out_dir=None, log: Callable = print) -> BenchReport:
    """DRO logistic-regression comparison.

    The dataset and the model initialization are shared by all seeds; the
    seeds drive the minibatch draws. ``y0`` is the uniform distribution
    (the anchor of the dual regularizer), so no initializer calls are
    spent. GDA and AGDA use the
    spectral norm of the mixed partial at ``(x0, y0)`` as ``L`` and
    ``L / mu`` as ``kappa``; the noise levels fed to the backtracking
    solver are Monte Carlo estimates at ``(x0, y0)``.
    """
    cfg = config
    data = _dataset(cfg)
    problem = build_problem(cfg, cfg.problem.data_seed, data=data)
    x0 = make_x0(cfg, problem)
    y0 = problem.prox_h.minimizer(problem.dim_y)
    n_data = problem.dim_y
    L_est = spectral_norm(mixed_partial_matrix(problem, x0, y0))
    sigmas = estimate_sigmas(problem, x0, y0, cfg.noise.estimate_samples, RngStream(cfg.problem.data_seed, 5))
    spec = make_spec(cfg, sigmas)

    def extra(x, y):
        return {"train_error": dro_train_error(problem, x)}

    def instance(seed):
        return {"problem": problem, "spec": spec, "x0": x0, "y0": y0, "init_calls": 0,
                "L": L_est, "kappa": max(1.0, L_est / problem.mu), "sigmas": sigmas, "extra": extra}

    log(f"[dro] L estimate {L_est:.6g}, sigma_x^2 {sigmas[0]:.6g}, sigma_y^2 {sigmas[1]:.6g}")
    return _bench(cfg, cfg.experiment, instance, out_dir, select_metric="primal_value",
                  n_data=n_data, log=log)


def run_bench(cfg: ExperimentConfig, out_dir=None, log: Callable = print) -> list:
    if cfg.experiment.startswith("dro"):
        return [reproduce_dro(cfg, out_dir, log)]
    Ls = cfg.problem.L_target if isinstance(cfg.problem.L_target, list) else [cfg.problem.L_target]
    return [reproduce_bilinear(L, cfg.seeds, cfg, out_dir, log) for L in Ls]


# --------------------------------------------------------------------------
# Single solve
# --------------------------------------------------------------------------

def solve_once(cfg: ExperimentConfig, seed: int, method: str = "sgdab") -> tuple:
    """One backtracking solve from the configured start; returns ``(result, problem)``."""
    if method not in ("sgdab", "sgdab-budgeted"):
        raise ConfigError(f"solve runs sgdab or sgdab-budgeted, not {method!r}")
    sigmas, y_init = None, None
    if cfg.experiment.startswith("dro"):
        data = _dataset(cfg)
        problem = build_problem(cfg, seed, data=data)
        x0 = make_x0(cfg, problem)
        y_init = problem.prox_h.minimizer(problem.dim_y)
        sigmas = estimate_sigmas(problem, x0, y_init, cfg.noise.estimate_samples, RngStream(seed, 5))
    else:
        problem = build_problem(cfg, seed)
        x0 = make_x0(cfg, problem)
    spec = make_spec(cfg, sigmas)
    sc = _sgdab_config(cfg, method, x0, y_init, sigmas, None)
    sc.record_trace = False
    rng = RngStream(seed, _SGDAB_STREAM)
    if cfg.experiment == "bilinear-wcmc":
        res = wcmc_solve(problem, cfg.problem.D_y, np.zeros(problem.dim_y), sc, spec, rng)
    elif method == "sgdab-budgeted":
        res = sgdab_budgeted(problem, spec, sc, rng)
    else:
        res = sgdab(problem, spec, sc, rng)
    return res, problem


def format_result(res: RunResult, problem: MinimaxProblem, method: str, seed: int) -> str:
    r = res.trace.records[-1]
    metric_problem = res.extras.get("regularized_problem", problem)
    exact = deterministic_gradient_map(metric_problem, res.x_eps, res.y_eps, r.eta_x, r.eta_y)
    lines = [
        f"problem: {problem.name}",
        f"method: {method}",
        f"seed: {seed}",
        f"certified: {str(res.certified).lower()}",
        f"G_tilde_norm: {res.G_tilde_norm!r}",
        f"tolerance: {res.tolerance!r}",
        f"exact_map_norm: {exact.norm!r}",
        f"backtracks: {res.backtracks}",
        f"L_tilde: {r.L_tilde!r}",
        f"eta_x: {r.eta_x!r}",
        f"eta_y: {r.eta_y!r}",
        f"K: {r.K}",
        f"M_x: {r.M_x}",
        f"M_y: {r.M_y}",
        f"T: {r.T}",
        f"init_calls: {sum(res.trace.init_calls)}",
        f"calls_x: {res.calls_x}",
        f"calls_y: {res.calls_y}",
        f"calls_total: {res.calls}",
        f"wall_time_s: {res.wall_time:.3f}",
    ]
    if "mu_hat" in res.extras:
        lines.append(f"mu_hat: {res.extras['mu_hat']!r}")
        lines.append(f"G_tilde_unregularized_norm: {res.extras['G_tilde_true'].norm!r}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sgdab", description="Backtracking stochastic GDA for minimax problems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, helptext in (("bench", "run an experiment config and write CSVs, plot scripts and figures"),
                           ("solve", "run one backtracking solve and print a summary"),
                           ("selftest", "run the built-in numerical checks")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=int, help="root seed (overrides the config's seed list)")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--method", help="restrict to one method")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    log = (lambda *a, **k: None) if args.quiet else (lambda *a, **k: print(*a, **k, file=sys.stderr))
    try:
        if args.command == "selftest":
            from .selftest import run_selftest

            return 0 if run_selftest(verbose=not args.quiet) else 2
        if not args.config:
            raise ConfigError(f"{args.command} needs --config")
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seeds = [args.seed]
        if args.out:
            cfg.out = args.out
        if args.command == "bench":
            if args.method:
                if args.method not in cfg.methods:
                    raise ConfigError(f"method {args.method!r} is not in the config's methods {cfg.methods}")
                cfg.methods = [args.method]
            reports = run_bench(cfg, cfg.out, log)
            for rep in reports:
                for row in rep.summary:
                    log(f"[{rep.label}] " + ", ".join(f"{k}={v}" for k, v in row.items()))
                log(f"[{rep.label}] wrote {len(rep.files)} files under {Path(cfg.out) / rep.label}")
            return 0
        method = args.method or next((m for m in cfg.methods if m.startswith("sgdab")), "sgdab")
        res, problem = solve_once(cfg, cfg.seeds[0], method)
        print(format_result(res, problem, method, cfg.seeds[0]))
        return 0
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (DivergenceError, BudgetExceededError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return 2
    except (ValueError, SgdabError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())
