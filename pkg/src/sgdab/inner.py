"""Randomized block stochastic GDA inner solvers (Jacobi and Gauss-Seidel)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    BlockVector,
    DivergenceError,
    GradientMapEval,
    MinimaxProblem,
    RngStream,
)
from .oracle import OracleHandle, gradient_map_parts

__all__ = ["InnerParams", "InnerResult", "rb_sgda", "rb_sagda", "point_metrics", "DIVERGENCE_RADIUS"]

DIVERGENCE_RADIUS = 1e12


@dataclass(frozen=True)
class InnerParams:
    """Step sizes, batch sizes and iteration budget for one inner run."""

    eta_x: float
    eta_y: float
    M_x: int
    M_y: int
    K: int
    record_trace: bool = False
    n1_argmin_variant: bool = False
    trace_stride: Optional[int] = None
    debug: bool = False
    # extra_metrics(x, y) -> dict, merged into every recorded trajectory point
    extra_metrics: Optional[Callable] = None

    def __post_init__(self):
        if not (self.eta_x > 0 and self.eta_y > 0):
            raise ValueError("step sizes must be positive")
        if self.K < 1 or self.M_x < 1 or self.M_y < 1:
            raise ValueError("K, M_x and M_y must be >= 1")

    @property
    def stride(self) -> int:
        if self.trace_stride is not None:
            return max(1, int(self.trace_stride))
        return max(1, self.K // 1000)


@dataclass
class InnerResult:
    x_tilde: BlockVector
    y_tilde: np.ndarray
    G_tilde: GradientMapEval
    S_tilde: float
    k_selected: int
    calls_x: int
    calls_y: int
    trajectory: list = field(default_factory=list)
    # oracle estimates behind G_tilde, kept so callers can rebuild related maps
    sx: Optional[np.ndarray] = None
    sy: Optional[np.ndarray] = None


def point_metrics(problem: MinimaxProblem, x, y, eta_x: float, eta_y: float, extra=None) -> dict:
    """Exact diagnostics at a point: squared gradient and map norms, primal value."""
    gx = problem.grad_x(x, y)
    gy = problem.grad_y(x, y)
    mx, my = gradient_map_parts(problem, x, y, gx, gy, eta_x, eta_y)
    out = {
        "grad_norm_sq": float(gx @ gx + gy @ gy),
        "map_norm": float(np.sqrt(mx @ mx + my @ my)),
    }
    d = problem.diagnostics
    if d is not None and d.primal_value is not None:
        out["primal_value"] = float(d.primal_value(x))
    if extra is not None:
        out.update(extra(x, y))
    return out


def _check_start(problem: MinimaxProblem, x0, y0):
    x = np.array(x0.data if isinstance(x0, BlockVector) else x0, dtype=np.float64)
    y = np.array(y0, dtype=np.float64)
    if x.size != problem.n or y.size != problem.dim_y:
        raise ValueError("starting point has the wrong dimensions")
    if not problem.x_feasible(x):
        raise ValueError("x0 is outside dom g")
    if not problem.prox_h.contains(y):
        raise ValueError("y0 is outside dom h")
    return x, y


def _run(problem, oracle: OracleHandle, params: InnerParams, x0, y0, rng: RngStream,
         gauss_seidel: bool, observer: Optional[Callable]) -> InnerResult:
    x, y = _check_start(problem, x0, y0)
    N, K = problem.N, params.K
    eta_x, eta_y, Mx, My = params.eta_x, params.eta_y, params.M_x, params.M_y
    argmin_variant = params.n1_argmin_variant
    if argmin_variant and N != 1:
        raise ValueError("the argmin selection variant needs N = 1")
    gen = rng.gen
    k_sel = int(gen.integers(0, K))
    blocks = gen.integers(0, N, size=K) if N > 1 else None
    slices = problem.slices
    prox_g, prox_h = problem.prox_g, problem.prox_h
    cx0, cy0 = oracle.calls_x, oracle.calls_y
    limit = DIVERGENCE_RADIUS ** 2
    stride = params.stride if params.record_trace else 0
    trajectory = []

    aux = oracle.auxiliary()
    snap = None
    best = (np.inf, None)
    sum_sq = 0.0

    for k in range(K):
        i = 0 if blocks is None else int(blocks[k])
        s = slices[i]
        if stride and k % stride == 0:
            trajectory.append((k, oracle.calls, point_metrics(problem, x, y, eta_x, eta_y, params.extra_metrics)))
        sxi = oracle.sample_grad_x_block(x, y, i, Mx)
        xi_new = prox_g[i].prox(x[s] - eta_x * sxi, eta_x)
        if N == 1:
            x_new = xi_new
        else:
            x_new = x.copy()
            x_new[s] = xi_new
        if gauss_seidel:
            sy = oracle.sample_grad_y(x_new, y, My)
        else:
            sy = oracle.sample_grad_y(x, y, My)

        if argmin_variant:
            sy_map = aux.sample_grad_y(x, y, My) if gauss_seidel else sy
            gx, gy = gradient_map_parts(problem, x, y, sxi, sy_map, eta_x, eta_y)
            val = float(gx @ gx + gy @ gy)
            sum_sq += val
            if val < best[0]:
                best = (val, (k, x, y, gx, gy, sxi, sy_map))
        elif k == k_sel:
            if N == 1:
                sx_full = sxi
            else:
                # complete the remaining blocks of the primal sample at this iterate
                sx_full = aux.sample_grad_x(x, y, Mx)
                sx_full[s] = sxi
            sy_map = aux.sample_grad_y(x, y, My) if gauss_seidel else sy
            gx, gy = gradient_map_parts(problem, x, y, sx_full, sy_map, eta_x, eta_y)
            snap = (k, x, y, gx, gy, sx_full, sy_map)

        y = prox_h.prox(y + eta_y * sy, eta_y)
        x = x_new
        if not (x @ x < limit and y @ y < limit):
            raise DivergenceError(f"iterate left the safety ball at iteration {k + 1}", k + 1)
        if params.debug:
            assert problem.x_feasible(x) and prox_h.contains(y), f"infeasible iterate at {k + 1}"
        if observer is not None:
            observer(k, i, x, y)

    if stride:
        trajectory.append((K, oracle.calls, point_metrics(problem, x, y, eta_x, eta_y, params.extra_metrics)))

    if argmin_variant:
        k_sel, xs, ys, gx, gy, sx_used, sy_used = best[1]
        S = sum_sq / K
    else:
        k_sel, xs, ys, gx, gy, sx_used, sy_used = snap
        S = None
    G = GradientMapEval(BlockVector(gx, problem.dims_x), gy,
                        stochastic=not oracle.spec.is_deterministic)
    return InnerResult(
        x_tilde=BlockVector(xs, problem.dims_x),
        y_tilde=np.array(ys),
        G_tilde=G,
        S_tilde=G.norm_sq if S is None else S,
        k_selected=k_sel,
        calls_x=oracle.calls_x - cx0,
        calls_y=oracle.calls_y - cy0,
        trajectory=trajectory,
        sx=np.array(sx_used),
        sy=np.array(sy_used),
    )


def rb_sgda(problem: MinimaxProblem, oracle: OracleHandle, params: InnerParams, x0, y0,
            rng: RngStream, observer: Optional[Callable] = None) -> InnerResult:
    """Random-block stochastic GDA with Jacobi updates.

    Each iteration updates one uniformly drawn primal block and the dual
    variable, both from gradients at ``(x^k, y^k)``. The output iterate is
    drawn uniformly from ``0..K-1`` before the loop and captured when
    reached, together with the gradient map built from that iteration's
    own oracle draws.

    ``observer(k, i_k, x_next, y_next)`` is called after every step.
    """
    return _run(problem, oracle, params, x0, y0, rng, False, observer)


def rb_sagda(problem: MinimaxProblem, oracle: OracleHandle, params: InnerParams, x0, y0,
             rng: RngStream, observer: Optional[Callable] = None) -> InnerResult:
    """Gauss-Seidel variant: the dual step uses the freshly updated primal.

    The dual part of the reported map at the selected iterate comes from an
    independent batch drawn at ``(x^k, y^k)``, which costs ``M_y`` calls.
    """
    return _run(problem, oracle, params, x0, y0, rng, True, observer)
