"""Fast built-in numerical checks behind ``sgdab selftest``.

Each check compares library output against an independent computation
(brute-force enumeration, finite differences, closed forms, Monte Carlo).
The full suites live in the package's pytest tests.
"""
from __future__ import annotations

import itertools
import math
import time

import numpy as np

from .core import RngStream
from .oracle import OracleHandle, OracleSpec, deterministic_gradient_map
from .outer import SgdabConfig, expected_oracle_calls, m4_certificate, rho_of, sgdab
from .problems import make_bilinear, make_dro, make_synthetic_classification
from .prox import L1, L2BallIndicator, SimplexWithQuadratic, project_simplex

__all__ = ["run_selftest", "brute_force_simplex"]


def brute_force_simplex(u) -> np.ndarray:
    """Projection onto the simplex by enumerating every support set."""
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    best, best_d = None, math.inf
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            S = list(S)
            z = np.zeros(n)
            z[S] = u[S] - (u[S].sum() - 1.0) / r
            if np.all(z[S] >= -1e-15):
                d = float((z - u) @ (z - u))
                if d < best_d:
                    best, best_d = z, d
    return best


def _check_rho():
    worst = max(abs(N * rho_of(N) + 12 * N * rho_of(N) ** 2 - 0.25) for N in range(1, 65))
    return worst <= 1e-12, f"max identity residual {worst:.2e}"


def _check_simplex():
    gen = RngStream(1, 0).gen
    worst = 0.0
    for _ in range(300):
        n = int(gen.integers(1, 6))
        u = gen.normal(0, 2, n)
        worst = max(worst, float(np.max(np.abs(project_simplex(u) - brute_force_simplex(u)))))
        w, eta = gen.uniform(0, 3), gen.uniform(0.01, 3)
        c = gen.normal(0, 1, n)
        got = SimplexWithQuadratic(w, c).prox(u, eta)
        ref = brute_force_simplex((u / eta + w * c) / (1 / eta + w))
        worst = max(worst, float(np.max(np.abs(got - ref))))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def _check_nonexpansive():
    gen = RngStream(2, 0).gen
    maps = [L1(0.7), L2BallIndicator(1.5), SimplexWithQuadratic(0.3, 0.2)]
    bad = 0
    for pm in maps:
        for _ in range(500):
            u, v = gen.normal(0, 3, 5), gen.normal(0, 3, 5)
            eta = gen.uniform(0.01, 5)
            if np.linalg.norm(pm.prox(u, eta) - pm.prox(v, eta)) > np.linalg.norm(u - v) + 1e-12:
                bad += 1
    return bad == 0, f"{bad} violations"


def _fd_rel_error(fun, grad, z, h=1e-6):
    g = grad(z)
    fd = np.array([(fun(z + h * e) - fun(z - h * e)) / (2 * h) for e in np.eye(z.size)])
    return float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-12))


def _check_gradients():
    p = make_bilinear(8, 8, 5.0, 1.0, seed=3)
    X, b = make_synthetic_classification(40, 4, seed=3)
    q = make_dro(X, b, 0.01)
    gen = RngStream(3, 0).gen
    worst = 0.0
    for prob in (p, q):
        for _ in range(3):
            x = gen.normal(0, 0.5, prob.n)
            y = project_simplex(gen.uniform(0, 1, prob.dim_y)) if prob is q else gen.normal(0, 1, prob.dim_y)
            worst = max(worst, _fd_rel_error(lambda z: prob.f_value(z, y), lambda z: prob.grad_x(z, y), x))
            worst = max(worst, _fd_rel_error(lambda z: prob.f_value(x, z), lambda z: prob.grad_y(x, z), y))
    return worst <= 1e-5, f"max relative error {worst:.2e}"


def _check_oracle():
    p = make_bilinear(6, 6, 5.0, 1.0, seed=4)
    h = OracleHandle(p, OracleSpec(1.0, 1.0), RngStream(4, 1))
    x, y = np.ones(6), np.zeros(6)
    g = p.grad_x(x, y)
    M, n = 10, 4000
    s = np.array([h.sample_grad_x(x, y, M) for _ in range(n)])
    z = np.abs(s.mean(axis=0) - g) / (s.std(axis=0, ddof=1) / math.sqrt(n))
    var = float(np.mean(np.sum((s - g) ** 2, axis=1)))
    ok = np.all(z <= 4.5) and var <= 1.05 / M * 1.1 and h.calls_x == M * n
    return bool(ok), f"max z {z.max():.2f}, variance {var:.4f} (bound {1 / M:.4f})"


def _check_m4():
    p = make_bilinear(10, 10, 5.0, 1.0, seed=5)
    gen = RngStream(5, 0).gen
    L = p.diagnostics.L
    bad = 0
    for _ in range(200):
        x, y = gen.normal(0, 1, 10), gen.normal(0, 1, 10)
        ex, ey = gen.uniform(1e-3, 0.2), gen.uniform(1e-3, 0.2)
        u, v, _, _ = m4_certificate(p, x, y, ex, ey)
        G = deterministic_gradient_map(p, x, y, ex, ey).norm
        bound = (1 + (ex + ey) * L) * G + 1e-12
        bad += (u > bound) + (v > bound)
    return bad == 0, f"{bad} violations"


def _check_solver():
    p = make_bilinear(10, 10, 5.0, 1.0, seed=6)
    x0 = np.full(10, 0.01)
    cfg = SgdabConfig(epsilon=1e-2, epsilon_tilde=1e-8, p=0.0, gamma=0.9, x0=x0)
    res = sgdab(p, OracleSpec.deterministic(), cfg, RngStream(6))
    r = res.trace.records[-1]
    G = deterministic_gradient_map(p, res.x_eps, res.y_eps, r.eta_x, r.eta_y).norm
    depth_bound = math.ceil(math.log(p.diagnostics.kappa) / math.log(1 / 0.9))
    ok = (res.certified and G <= 1e-2 and res.backtracks <= depth_bound
          and res.calls == expected_oracle_calls(res))
    return ok, f"depth {res.backtracks} (bound {depth_bound}), exact map norm {G:.2e}, calls {res.calls}"


CHECKS = (
    ("rho identity", _check_rho),
    ("simplex projection vs enumeration", _check_simplex),
    ("prox nonexpansiveness", _check_nonexpansive),
    ("gradients vs central differences", _check_gradients),
    ("oracle mean, variance and counters", _check_oracle),
    ("subgradient-residual bound", _check_m4),
    ("deterministic backtracking solve", _check_solver),
)


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as e:  # report and keep going
            ok, detail = False, f"{type(e).__name__}: {e}"
        all_ok &= bool(ok)
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} ({time.perf_counter() - t0:.2f}s)")
    return all_ok
