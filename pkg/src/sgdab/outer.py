"""Backtracking SGDA driver, its fixed-budget variant and helpers.

The driver only needs a lower bound ``F_bar`` on the primal function and
the concavity modulus ``mu``; the Lipschitz constant is searched for by
shrinking the dual step ``eta_y = gamma^l / mu`` until the sampled
gradient-map test passes.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .core import (
    BlockVector,
    BudgetExceededError,
    Diagnostics,
    DivergenceError,
    GradientMapEval,
    MinimaxProblem,
    PreconditionError,
    RngStream,
)
from .inner import InnerParams, InnerResult, rb_sagda, rb_sgda
from .oracle import OracleHandle, OracleSpec, gradient_map_parts

__all__ = [
    "rho_of",
    "num_parallel_runs",
    "step_sizes",
    "iteration_budget",
    "batch_sizes",
    "budgeted_tolerance",
    "Budget",
    "SgdabConfig",
    "BacktrackRecord",
    "BacktrackTrace",
    "RunResult",
    "init_y0",
    "sgdab",
    "sgdab_budgeted",
    "wcmc_solve",
    "wcmc_wrap",
    "m4_certificate",
    "expected_oracle_calls",
]

INNER_KINDS = ("jacobi", "gauss-seidel")


# --------------------------------------------------------------------------
# Parameter formulas
# --------------------------------------------------------------------------

def rho_of(N: int) -> float:
    """Time-scale constant ``(sqrt(1 + 12/N) - 1) / 24``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return (math.sqrt(1.0 + 12.0 / N) - 1.0) / 24.0


def num_parallel_runs(p: float, deterministic: bool = False) -> int:
    """``ceil(log2(1/p))`` independent inner runs; 1 for ``p = 0`` or exact oracles."""
    if p == 0 or deterministic:
        return 1
    if not 0 < p < 1:
        raise ValueError(f"failure probability must be in [0, 1), got {p}")
    return math.ceil(math.log2(1.0 / p))


def step_sizes(mu: float, gamma: float, ell: int, N: int) -> tuple:
    """``(eta_y, eta_x)`` at backtracking iteration ``ell``."""
    eta_y = gamma ** ell / mu
    eta_x = N * rho_of(N) * mu ** 2 * eta_y ** 3
    return eta_y, eta_x


def _F(v) -> Fraction:
    return Fraction(v) if not isinstance(v, Fraction) else v


def iteration_budget(N, epsilon, eta_x, L0, F_bar, eps_tilde) -> int:
    """``K = ceil(64 N / (eps^2 eta_x) * (L0 - F_bar + (12 rho + 1) eps_tilde))``.

    Evaluated in exact rational arithmetic on the float inputs.
    """
    rho = _F(rho_of(N))
    c = _F(L0) - _F(F_bar) + (12 * rho + 1) * _F(eps_tilde)
    K = math.ceil(Fraction(64 * N) / (_F(epsilon) ** 2 * _F(eta_x)) * c)
    return max(1, K)


def batch_sizes(epsilon, sigma_x2, sigma_y2, mu, eta_y, inner: str = "jacobi") -> tuple:
    """Batch sizes ``(M_x, M_y)``; the dual factor depends on the inner kind."""
    base = Fraction(128) / _F(epsilon) ** 2
    M_x = math.ceil(base * _F(sigma_x2) + 1)
    t = _F(mu) * _F(eta_y)
    if inner == "jacobi":
        if not 0 < t < 1:
            raise PreconditionError(f"mu * eta_y must lie in (0, 1), got {float(t)}")
        factor = 1 + 6 / t * (2 - t) / (1 - t)
    elif inner == "gauss-seidel":
        factor = 1 + 12 / t
    else:
        raise ValueError(f"unknown inner kind {inner!r}")
    M_y = math.ceil(factor * base * _F(sigma_y2) + 1)
    return M_x, M_y


def budgeted_tolerance(N, eta_x, eta_y, mu, K, M, L0, F_bar, eps_tilde,
                       sigma_x2, sigma_y2, inner: str = "jacobi") -> float:
    """Tolerance certified by a fixed ``(K, M)`` budget at the current steps."""
    rho = rho_of(N)
    t = mu * eta_y
    if inner == "jacobi":
        factor = 1.0 + 6.0 / t * (2.0 - t) / (1.0 - t)
    else:
        factor = 1.0 + 12.0 / t
    inside = (N / (eta_x * K) * (L0 - F_bar + (12.0 * rho + 1.0) * eps_tilde)
              + sigma_x2 / M + factor * sigma_y2 / M)
    return 4.0 * math.sqrt(2.0) * math.sqrt(inside)


# --------------------------------------------------------------------------
# Configuration and results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Budget:
    """Fixed inner iteration count ``K`` and batch size ``M`` for every backtrack."""

    K: int
    M: int

    def __post_init__(self):
        if self.K < 1 or self.M < 1:
            raise ValueError("budget K and M must be >= 1")


@dataclass
class SgdabConfig:
    epsilon: float
    epsilon_tilde: float
    p: float
    gamma: float
    x0: Any
    max_backtracks: int = 200
    inner: str = "jacobi"
    budget: Optional[Budget] = None
    y0: Optional[Any] = None
    init_batch: int = 1
    sigma_x2: Optional[float] = None
    sigma_y2: Optional[float] = None
    L0_upper: Optional[float] = None
    n1_argmin_variant: bool = False
    max_oracle_calls: Optional[int] = None
    record_trace: bool = False
    trace_stride: Optional[int] = None
    stream_ids: Optional[Sequence[int]] = None
    debug: bool = False
    extra_metrics: Optional[Callable] = None
    workers: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.epsilon_tilde > 0:
            raise ValueError(f"epsilon_tilde must be positive, got {self.epsilon_tilde}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0 <= self.p < 1:
            raise ValueError(f"p must lie in [0, 1), got {self.p}")
        if self.inner not in INNER_KINDS:
            raise ValueError(f"inner must be one of {INNER_KINDS}, got {self.inner!r}")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class BacktrackRecord:
    ell: int
    L_tilde: float
    eta_y: float
    eta_x: float
    K: int
    M_x: int
    M_y: int
    T: int
    S_values: tuple
    S_min: float
    t_star: int
    accepted: bool
    calls_cumulative: int
    tolerance: float
    diverged: tuple
    trajectory: list = field(default_factory=list, repr=False)


@dataclass
class BacktrackTrace:
    rho: float
    T: int
    L0: float
    init_calls: tuple
    records: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.records)


@dataclass
class RunResult:
    x_eps: BlockVector
    y_eps: np.ndarray
    G_tilde: GradientMapEval
    G_tilde_norm: float
    certified: bool
    tolerance: float
    trace: BacktrackTrace
    calls_x: int
    calls_y: int
    wall_time: float
    inner: Optional[InnerResult] = None
    extras: dict = field(default_factory=dict)

    @property
    def calls(self) -> int:
        return self.calls_x + self.calls_y

    @property
    def backtracks(self) -> int:
        return self.trace.depth

    @property
    def eta(self) -> tuple:
        """``(eta_x, eta_y)`` of the accepted backtracking iteration."""
        r = self.trace.records[-1]
        return r.eta_x, r.eta_y


# --------------------------------------------------------------------------
# Dual initialization
# --------------------------------------------------------------------------

def _default_y_start(problem: MinimaxProblem) -> np.ndarray:
    zero = np.zeros(problem.dim_y)
    if problem.prox_h.contains(zero):
        return zero
    return problem.prox_h.minimizer(problem.dim_y)


def init_y0(problem: MinimaxProblem, oracle: OracleHandle, x0, epsilon_tilde: float,
            rng: Optional[RngStream] = None, batch: int = 1, y_start=None,
            sigma_y2: Optional[float] = None, max_iter: int = 1_000_000, C: float = 8.0) -> np.ndarray:
    """Approximately maximize ``y -> L(x0, y)`` to accuracy ``epsilon_tilde``.

    Exact oracle: proximal gradient ascent with Armijo backtracking on the
    dual step, stopped once ``||G_y||^2 <= 2 mu epsilon_tilde``.
    Stochastic oracle: ``ceil(C sigma_y^2 / (mu epsilon_tilde batch))`` proximal
    stochastic ascent steps with step ``1 / (mu (k + 2))``.
    """
    if not problem.mu > 0:
        raise PreconditionError("init_y0 needs mu > 0; regularize merely concave problems first")
    mu = problem.mu
    x = np.asarray(x0.data if isinstance(x0, BlockVector) else x0, dtype=np.float64)
    y = _default_y_start(problem) if y_start is None else np.array(y_start, dtype=np.float64)
    h = problem.prox_h

    if oracle.spec.is_deterministic:
        if problem.f_value is None:
            raise PreconditionError("deterministic y0 search needs function values")
        L_loc = mu
        for _ in range(max_iter):
            g = oracle.sample_grad_y(x, y, 1)
            eta = 1.0 / L_loc
            y_new = h.prox(y + eta * g, eta)
            gmap = (y_new - y) / eta
            if gmap @ gmap <= 2.0 * mu * epsilon_tilde:
                return y
            fy = problem.f_value(x, y)
            while True:
                d = y_new - y
                if problem.f_value(x, y_new) >= fy + g @ d - 0.5 * L_loc * (d @ d) - 1e-15 * abs(fy):
                    break
                L_loc *= 2.0
                eta = 1.0 / L_loc
                y_new = h.prox(y + eta * g, eta)
            y = y_new
        raise BudgetExceededError(f"y0 search did not reach {epsilon_tilde} in {max_iter} steps")

    if sigma_y2 is None:
        sigma_y2 = oracle.spec.variance_bounds(problem)[1]
    iters = max(1, math.ceil(C * sigma_y2 / (mu * epsilon_tilde * batch)))
    for k in range(iters):
        step = 1.0 / (mu * (k + 2))
        y = h.prox(y + step * oracle.sample_grad_y(x, y, batch), step)
    return y


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------

def _as_spec(oracle) -> tuple:
    if isinstance(oracle, OracleHandle):
        return oracle.spec, oracle
    if isinstance(oracle, OracleSpec):
        return oracle, None
    raise TypeError("oracle must be an OracleSpec or OracleHandle")


def _solve(problem: MinimaxProblem, oracle, config: SgdabConfig, rng: RngStream) -> RunResult:
    t_start = time.perf_counter()
    spec, outer_handle = _as_spec(oracle)
    if not problem.mu > 0:
        raise PreconditionError("SGDA-B needs mu > 0; use wcmc_solve for merely concave problems")
    x0 = np.array(config.x0.data if isinstance(config.x0, BlockVector) else config.x0, dtype=np.float64)
    if x0.size != problem.n or not problem.x_feasible(x0):
        raise ValueError("x0 must be a feasible primal point of the right size")
    N, mu, gamma = problem.N, problem.mu, config.gamma
    rho = rho_of(N)
    T = num_parallel_runs(config.p, spec.is_deterministic)
    sx2, sy2 = spec.variance_bounds(problem)
    if config.sigma_x2 is not None:
        sx2 = config.sigma_x2
    if config.sigma_y2 is not None:
        sy2 = config.sigma_y2
    inner_fn = rb_sgda if config.inner == "jacobi" else rb_sagda
    stream_ids = tuple(config.stream_ids) if config.stream_ids is not None else tuple(range(T))
    if len(stream_ids) != T or len(set(stream_ids)) != T:
        raise ValueError(f"need {T} distinct stream ids")

    init_handle = OracleHandle(problem, spec, rng.spawn(0, 0))
    if config.y0 is not None:
        y0 = np.array(config.y0, dtype=np.float64)
    else:
        y0 = init_y0(problem, init_handle, x0, config.epsilon_tilde, rng.spawn(0, 1),
                     batch=config.init_batch, sigma_y2=sy2)
    if problem.f_value is not None:
        L0 = problem.eval_L(x0, y0)
    elif config.L0_upper is not None:
        L0 = float(config.L0_upper)
    else:
        raise PreconditionError("problem has no function values; set L0_upper")

    trace = BacktrackTrace(rho=rho, T=T, L0=L0, init_calls=(init_handle.calls_x, init_handle.calls_y))
    trace.extras["y0"] = y0
    calls_x, calls_y = init_handle.calls_x, init_handle.calls_y
    budget = config.budget

    for ell in range(1, config.max_backtracks + 1):
        eta_y, eta_x = step_sizes(mu, gamma, ell, N)
        if budget is None:
            K = iteration_budget(N, config.epsilon, eta_x, L0, problem.F_bar, config.epsilon_tilde)
            M_x, M_y = batch_sizes(config.epsilon, sx2, sy2, mu, eta_y, config.inner)
            tol = config.epsilon
        else:
            K, M_x, M_y = budget.K, budget.M, budget.M
            tol = budgeted_tolerance(N, eta_x, eta_y, mu, K, budget.M, L0, problem.F_bar,
                                     config.epsilon_tilde, sx2, sy2, config.inner)
        planned = T * K * (M_x + M_y)
        if config.max_oracle_calls is not None and calls_x + calls_y + planned > config.max_oracle_calls:
            raise BudgetExceededError(
                f"backtracking iteration {ell} needs {planned} oracle calls, "
                f"over the budget of {config.max_oracle_calls}", trace)
        params = InnerParams(eta_x=eta_x, eta_y=eta_y, M_x=M_x, M_y=M_y, K=K,
                             record_trace=config.record_trace,
                             n1_argmin_variant=config.n1_argmin_variant,
                             trace_stride=config.trace_stride, debug=config.debug,
                             extra_metrics=config.extra_metrics)
        def run_one(sid):
            handle = OracleHandle(problem, spec, rng.spawn(ell, sid, 0))
            try:
                return inner_fn(problem, handle, params, x0, y0, rng.spawn(ell, sid, 1)), handle
            except DivergenceError:
                # an exploding trajectory fails the test; shrink the dual step
                return None, handle

        if config.workers > 1 and T > 1:
            # runs own their streams and handles, so scheduling cannot change results
            with ThreadPoolExecutor(max_workers=min(config.workers, T)) as pool:
                outcomes = list(pool.map(run_one, stream_ids))
        else:
            outcomes = [run_one(sid) for sid in stream_ids]
        results, S_vals, diverged = [], [], []
        traj = []
        for t, (res, handle) in enumerate(outcomes):
            S_vals.append(math.inf if res is None else res.S_tilde)
            diverged.append(res is None)
            if t == 0 and res is not None:
                traj = [(k, calls_x + calls_y + T * c, m) for k, c, m in res.trajectory]
            calls_x += handle.calls_x
            calls_y += handle.calls_y
            results.append(res)
        t_star = int(np.argmin(S_vals))
        S_min = S_vals[t_star]
        accepted = bool(S_min <= tol ** 2 / 4.0)
        trace.records.append(BacktrackRecord(
            ell=ell, L_tilde=1.0 / eta_y, eta_y=eta_y, eta_x=eta_x, K=K, M_x=M_x, M_y=M_y, T=T,
            S_values=tuple(S_vals), S_min=S_min, t_star=t_star, accepted=accepted,
            calls_cumulative=calls_x + calls_y, tolerance=tol, diverged=tuple(diverged),
            trajectory=traj,
        ))
        if accepted:
            best = results[t_star]
            if outer_handle is not None:
                outer_handle._bill(calls_x, calls_y)
            return RunResult(
                x_eps=best.x_tilde, y_eps=best.y_tilde, G_tilde=best.G_tilde,
                G_tilde_norm=best.G_tilde.norm, certified=True, tolerance=tol, trace=trace,
                calls_x=calls_x, calls_y=calls_y, wall_time=time.perf_counter() - t_start,
                inner=best,
            )
    if outer_handle is not None:
        outer_handle._bill(calls_x, calls_y)
    raise BudgetExceededError(
        f"no certificate after {config.max_backtracks} backtracking iterations", trace)


def sgdab(problem: MinimaxProblem, oracle, config: SgdabConfig, rng: RngStream) -> RunResult:
    """Stochastic GDA with backtracking on the dual step.

    ``oracle`` is an :class:`OracleSpec` (each inner run gets its own handle
    on a stream keyed by backtracking iteration and run index) or an
    :class:`OracleHandle` whose counters receive the run's total.
    Inner-run divergence counts as a failed test rather than an error.
    """
    if config.budget is not None:
        raise ValueError("config carries a fixed budget; call sgdab_budgeted")
    return _solve(problem, oracle, config, rng)


def sgdab_budgeted(problem: MinimaxProblem, oracle, config: SgdabConfig, rng: RngStream) -> RunResult:
    """Fixed ``(K, M)`` variant: the tolerance grows with each backtrack instead."""
    if config.budget is None:
        raise ValueError("sgdab_budgeted needs config.budget")
    return _solve(problem, oracle, config, rng)


def expected_oracle_calls(result_or_trace, N: int = 1, inner: str = "jacobi") -> int:
    """Closed-form oracle-call total implied by a backtracking trace."""
    trace = result_or_trace.trace if isinstance(result_or_trace, RunResult) else result_or_trace
    total = sum(trace.init_calls)
    for r in trace.records:
        if any(r.diverged):
            raise ValueError("closed form does not cover diverged inner runs")
        per_run = r.K * (r.M_x + r.M_y)
        if N > 1:
            per_run += r.M_x
        if inner == "gauss-seidel":
            per_run += r.M_y
        total += r.T * per_run
    return total


# --------------------------------------------------------------------------
# Merely concave reduction
# --------------------------------------------------------------------------

def wcmc_wrap(problem: MinimaxProblem, mu_hat: float, y_hat) -> MinimaxProblem:
    """Subtract ``(mu_hat / 2)||y - y_hat||^2`` from the coupling function."""
    y_hat = np.array(y_hat, dtype=np.float64)
    base_gy, base_f, base_sy = problem.grad_y, problem.f_value, problem.sample_grad_y

    def grad_y(x, y):
        return base_gy(x, y) - mu_hat * (y - y_hat)

    f_value = None
    if base_f is not None:
        def f_value(x, y):
            d = y - y_hat
            return base_f(x, y) - 0.5 * mu_hat * (d @ d)

    sample_grad_y = None
    if base_sy is not None:
        def sample_grad_y(x, y, gen, M):
            return base_sy(x, y, gen, M) - mu_hat * (y - y_hat)

    diag = None
    if problem.diagnostics is not None and problem.diagnostics.L is not None:
        L_hat = problem.diagnostics.L + mu_hat
        diag = Diagnostics(L=L_hat, kappa=L_hat / mu_hat)
    return problem.with_changes(
        grad_y=grad_y, f_value=f_value, sample_grad_y=sample_grad_y, mu=float(mu_hat),
        diagnostics=diag, name=f"{problem.name} + (mu_hat={mu_hat:g})",
    )


def wcmc_solve(problem: MinimaxProblem, D_y: float, y_hat, config: SgdabConfig, oracle,
               rng: RngStream, F_bar_hat: Optional[float] = None) -> RunResult:
    """Solve a merely concave problem through its ``mu_hat = eps / (2 D_y)`` regularization.

    The driver keeps the problem's lower bound ``F_bar`` unless ``F_bar_hat``
    is given. The regularized primal function can dip below ``F_bar`` by at
    most ``mu_hat D_y^2 / 2``; pass ``F_bar - mu_hat * D_y**2 / 2`` for the
    fully conservative choice.
    The result's ``extras`` hold ``mu_hat``, the map-gap bound
    ``mu_hat * D_y = eps / 2`` and the unregularized stochastic map
    rebuilt from the same oracle draws.
    """
    if problem.mu != 0:
        raise PreconditionError("wcmc_solve expects a merely concave problem (mu = 0)")
    if not D_y > 0:
        raise ValueError("D_y must be positive")
    y_hat = np.array(y_hat, dtype=np.float64)
    if not problem.prox_h.contains(y_hat):
        raise ValueError("anchor y_hat must lie in dom h")
    mu_hat = config.epsilon / (2.0 * D_y)
    wrapped = wcmc_wrap(problem, mu_hat, y_hat)
    if F_bar_hat is not None:
        wrapped = wrapped.with_changes(F_bar=float(F_bar_hat))
    res = _solve(wrapped, oracle, config, rng)
    r = res.trace.records[-1]
    x, y = res.x_eps.data, res.y_eps
    sy_true = res.inner.sy + mu_hat * (y - y_hat)
    gx, gy = gradient_map_parts(problem, x, y, res.inner.sx, sy_true, r.eta_x, r.eta_y)
    G_true = GradientMapEval(BlockVector(gx, problem.dims_x), gy, stochastic=res.G_tilde.stochastic)
    res.trace.extras.update(mu_hat=mu_hat, map_gap_bound=mu_hat * D_y)
    res.extras.update(mu_hat=mu_hat, map_gap_bound=mu_hat * D_y, G_tilde_true=G_true,
                      regularized_problem=wrapped)
    return res


# --------------------------------------------------------------------------
# Subgradient-residual certificate
# --------------------------------------------------------------------------

def m4_certificate(problem: MinimaxProblem, x, y, eta_x: float, eta_y: float):
    """Residuals of the first-order optimality inclusions at the prox-gradient point.

    Returns ``(u_norm, v_norm, x_hat, y_hat)`` where
    ``u in grad_x f(x_hat, y_hat) + dg(x_hat)`` and
    ``v in -grad_y f(x_hat, y_hat) + dh(y_hat)``.
    """
    if not (eta_x > 0 and eta_y > 0):
        raise ValueError("step sizes must be positive")
    x = np.asarray(x.data if isinstance(x, BlockVector) else x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gx, gy = problem.grad_x(x, y), problem.grad_y(x, y)
    Gx, Gy = gradient_map_parts(problem, x, y, gx, gy, eta_x, eta_y)
    x_hat = x - eta_x * Gx
    y_hat = y + eta_y * Gy
    u = Gx + problem.grad_x(x_hat, y_hat) - gx
    v = -Gy + gy - problem.grad_y(x_hat, y_hat)
    return float(np.linalg.norm(u)), float(np.linalg.norm(v)), x_hat, y_hat
