"""Comparison solvers: two-time-scale GDA, alternating GDA and TiAda.

All three take full (non-block) primal steps and draw batches of ``M``
samples from the same counting oracle as the block solvers, so their
oracle-call columns are directly comparable.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import BlockVector, DivergenceError, MinimaxProblem, RngStream
from .inner import DIVERGENCE_RADIUS, point_metrics
from .metrics import MetricRow, MetricTrace
from .oracle import OracleHandle

__all__ = ["BaselineConfig", "TiAdaState", "run_gda", "run_agda", "run_tiada", "run_baseline",
           "TIADA_GRID"]

METHODS = ("gda", "agda", "tiada")
TIADA_GRID = (100.0, 10.0, 1.0, 0.1, 0.01)


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    iterations: int
    M: int = 1
    L_input: Optional[float] = None
    kappa_input: Optional[float] = None
    alpha: float = 0.6
    beta: float = 0.4
    tau0: float = 1.0
    sigma0: float = 1.0
    v0x: float = 1.0
    v0y: float = 1.0
    record_every: int = 1
    label: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline {self.method!r}")
        if self.iterations < 1 or self.M < 1 or self.record_every < 1:
            raise ValueError("iterations, M and record_every must be >= 1")
        if self.method in ("gda", "agda"):
            if self.L_input is None or self.kappa_input is None:
                raise ValueError(f"{self.method} needs L_input and kappa_input")
            if not self.L_input > 0 or not self.kappa_input >= 1:
                raise ValueError("need L_input > 0 and kappa_input >= 1")
        else:
            if not self.alpha > self.beta:
                raise ValueError("TiAda needs alpha > beta")
            if not (self.tau0 > 0 and self.sigma0 > 0 and self.v0x > 0 and self.v0y > 0):
                raise ValueError("TiAda step scales and accumulators must be positive")

    @property
    def name(self) -> str:
        return self.label or self.method

    def steps(self) -> tuple:
        """Constant ``(tau, sigma) = (1 / (kappa^2 L), 1 / L)`` of GDA and AGDA."""
        L, k = self.L_input, self.kappa_input
        return 1.0 / (k * k * L), 1.0 / L


@dataclass
class TiAdaState:
    vx: float
    vy: float

    def steps(self, cfg: BaselineConfig) -> tuple:
        sigma = cfg.sigma0 / self.vy ** cfg.beta
        tau = cfg.tau0 / max(self.vx, self.vy) ** cfg.alpha
        return tau, sigma


def _flat(x):
    return np.array(x.data if isinstance(x, BlockVector) else x, dtype=np.float64)


def _prox_x(problem: MinimaxProblem, u, eta):
    if problem.N == 1:
        return problem.prox_g[0].prox(u, eta)
    out = np.empty_like(u)
    for p, s in zip(problem.prox_g, problem.slices):
        out[s] = p.prox(u[s], eta)
    return out


class _Recorder:
    def __init__(self, problem, oracle, cfg, seed, extra):
        self.problem, self.oracle, self.cfg = problem, oracle, cfg
        self.seed, self.extra = seed, extra
        self.trace = MetricTrace()
        self.t0 = time.perf_counter()

    def __call__(self, k, x, y, eta_x, eta_y):
        m = point_metrics(self.problem, x, y, eta_x, eta_y)
        if self.extra is not None:
            m.update(self.extra(x, y))
        wall = (time.perf_counter() - self.t0) * 1e3
        self.trace.append(MetricRow.from_metrics(self.cfg.name, self.seed, self.oracle.calls, k, m, wall))


def _guard(x, y, k, rec):
    if not (x @ x < DIVERGENCE_RADIUS ** 2 and y @ y < DIVERGENCE_RADIUS ** 2):
        rec.trace.diverged.add((rec.cfg.name, rec.seed))
        err = DivergenceError(f"{rec.cfg.name} left the safety ball at iteration {k + 1}", k + 1)
        err.trace = rec.trace
        raise err


def _run_gda(problem, oracle, cfg, x0, y0, seed, extra, alternating):
    x, y = _flat(x0), np.array(y0, dtype=np.float64)
    tau, sigma = cfg.steps()
    rec = _Recorder(problem, oracle, cfg, seed, extra)
    M = cfg.M
    for k in range(cfg.iterations):
        if k % cfg.record_every == 0:
            rec(k, x, y, tau, sigma)
        sx = oracle.sample_grad_x(x, y, M)
        x_new = _prox_x(problem, x - tau * sx, tau)
        sy = oracle.sample_grad_y(x_new if alternating else x, y, M)
        y = problem.prox_h.prox(y + sigma * sy, sigma)
        x = x_new
        _guard(x, y, k, rec)
    rec(cfg.iterations, x, y, tau, sigma)
    return rec.trace


def run_gda(problem: MinimaxProblem, oracle: OracleHandle, cfg: BaselineConfig, x0, y0,
            rng: Optional[RngStream] = None, seed: int = 0,
            extra_metrics: Optional[Callable] = None) -> MetricTrace:
    """Simultaneous prox-gradient descent-ascent with steps ``1/(kappa^2 L)`` and ``1/L``.

    ``extra_metrics(x, y)`` may add columns such as train error.
    All randomness comes from the oracle's stream; ``rng`` is accepted for
    interface symmetry.
    """
    return _run_gda(problem, oracle, cfg, x0, y0, seed, extra_metrics, False)


def run_agda(problem: MinimaxProblem, oracle: OracleHandle, cfg: BaselineConfig, x0, y0,
             rng: Optional[RngStream] = None, seed: int = 0,
             extra_metrics: Optional[Callable] = None) -> MetricTrace:
    """Alternating variant of :func:`run_gda`: the dual step sees ``x^{k+1}``."""
    return _run_gda(problem, oracle, cfg, x0, y0, seed, extra_metrics, True)


def run_tiada(problem: MinimaxProblem, oracle: OracleHandle, cfg: BaselineConfig, x0, y0,
              rng: Optional[RngStream] = None, seed: int = 0,
              extra_metrics: Optional[Callable] = None,
              on_step: Optional[Callable] = None) -> MetricTrace:
    """TiAda with the projected dual accumulator.

    Per iteration: ``v^x += ||s_x||^2`` and ``v^y += ||G_y||^2`` where the
    dual map uses the step from the accumulator state before the update;
    then ``sigma_t = sigma0 / (v^y)^beta`` and
    ``tau_t = tau0 / max(v^x, v^y)^alpha`` drive simultaneous prox steps.
    ``on_step(k, state, tau, sigma)`` observes every iteration.
    """
    x, y = _flat(x0), np.array(y0, dtype=np.float64)
    state = TiAdaState(cfg.v0x, cfg.v0y)
    tau, sigma = state.steps(cfg)
    rec = _Recorder(problem, oracle, cfg, seed, extra_metrics)
    M = cfg.M
    h = problem.prox_h
    for k in range(cfg.iterations):
        if k % cfg.record_every == 0:
            rec(k, x, y, tau, sigma)
        sx = oracle.sample_grad_x(x, y, M)
        sy = oracle.sample_grad_y(x, y, M)
        gy = (h.prox(y + sigma * sy, sigma) - y) / sigma
        vx_old, vy_old = state.vx, state.vy
        state.vx += float(sx @ sx)
        state.vy += float(gy @ gy)
        assert state.vx >= vx_old and state.vy >= vy_old
        tau, sigma = state.steps(cfg)
        x = _prox_x(problem, x - tau * sx, tau)
        y = h.prox(y + sigma * sy, sigma)
        if on_step is not None:
            on_step(k, state, tau, sigma)
        _guard(x, y, k, rec)
    rec(cfg.iterations, x, y, tau, sigma)
    return rec.trace


_RUNNERS = {"gda": run_gda, "agda": run_agda, "tiada": run_tiada}


def run_baseline(problem, oracle, cfg: BaselineConfig, x0, y0, rng=None, seed=0, extra_metrics=None):
    """Dispatch on ``cfg.method``."""
    return _RUNNERS[cfg.method](problem, oracle, cfg, x0, y0, rng, seed=seed, extra_metrics=extra_metrics)


def tiada_final_metric(trace: MetricTrace, metric: str = "grad_norm_sq") -> float:
    """Final value of ``metric``; ``inf`` for a diverged or empty trace."""
    if trace.diverged or not trace.rows:
        return math.inf
    v = getattr(trace.rows[-1], metric)
    return math.inf if v is None else v
