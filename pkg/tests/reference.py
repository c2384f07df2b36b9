"""Independent reference computations used as test oracles.

Nothing here imports the library's numerical code, so agreement with the
library is evidence rather than tautology.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def simplex_by_enumeration(u):
    """Euclidean projection onto the unit simplex via KKT over all supports.

    For support S the minimizer of ||z - u||^2 with sum(z) = 1 and z = 0
    off S is ``z_S = u_S - (sum(u_S) - 1) / |S|``; it is the projection iff
    ``z_S >= 0`` and the multiplier condition ``u_j <= tau`` holds off S.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            S = list(S)
            tau = (u[S].sum() - 1.0) / r
            z = np.zeros(n)
            z[S] = u[S] - tau
            off = [j for j in range(n) if j not in S]
            if np.all(z[S] >= -1e-14) and all(u[j] - tau <= 1e-12 for j in off):
                return np.maximum(z, 0.0)
    raise AssertionError("no KKT support found")


def simplex_quadratic_by_enumeration(u, eta, weight, anchor):
    """argmin over the simplex of weight/2 ||y - c||^2 + ||y - u||^2 / (2 eta), by KKT.

    Stationarity on support S: (1/eta + w) y_i = u_i/eta + w c_i + lam.
    """
    u = np.asarray(u, dtype=np.float64)
    c = np.broadcast_to(np.asarray(anchor, dtype=np.float64), u.shape)
    a = 1.0 / eta + weight
    b = u / eta + weight * c
    n = u.size
    for r in range(1, n + 1):
        for S in itertools.combinations(range(n), r):
            S = list(S)
            lam = (a - b[S].sum()) / r
            y = np.zeros(n)
            y[S] = (b[S] + lam) / a
            off = [j for j in range(n) if j not in S]
            if np.all(y[S] >= -1e-14) and all(b[j] + lam <= 1e-12 for j in off):
                return np.maximum(y, 0.0)
    raise AssertionError("no KKT support found")


def central_difference(fun, z, h=1e-5):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        out[j] = (fun(z + e) - fun(z - e)) / (2 * h)
    return out


# Solver parameter formulas, written out longhand in exact rationals.

def rho(N):
    return (math.sqrt(1 + 12 / N) - 1) / 24


def parallel_runs(p):
    if p == 0:
        return 1
    T = 0
    while Fraction(1, 2 ** T) > Fraction(p):
        T += 1
    return T


def Mx_formula(eps, sx2):
    q = Fraction(128) * Fraction(sx2) / (Fraction(eps) * Fraction(eps)) + 1
    return -((-q.numerator) // q.denominator)


def My_formula(eps, sy2, mu, eta_y, gauss_seidel=False):
    t = Fraction(mu) * Fraction(eta_y)
    if gauss_seidel:
        factor = 1 + Fraction(12) / t
    else:
        factor = 1 + (Fraction(6) / t) * (2 - t) / (1 - t)
    q = factor * Fraction(128) * Fraction(sy2) / (Fraction(eps) * Fraction(eps)) + 1
    return -((-q.numerator) // q.denominator)


def K_formula(N, eps, eta_x, L0, F_bar, eps_tilde):
    r = Fraction(rho(N))
    q = (Fraction(64 * N) / (Fraction(eps) ** 2 * Fraction(eta_x))
         * (Fraction(L0) - Fraction(F_bar) + (12 * r + 1) * Fraction(eps_tilde)))
    return max(1, -((-q.numerator) // q.denominator))


def eps_budgeted_spreadsheet(N, eta_x, eta_y, mu, K, M, L0, F_bar, eps_tilde, sx2, sy2):
    """Fixed-budget tolerance, term by term."""
    r = rho(N)
    t = mu * eta_y
    term_opt = N / (eta_x * K) * (L0 - F_bar + (12 * r + 1) * eps_tilde)
    term_x = sx2 / M
    term_y = (1 + (6 / t) * (2 - t) / (1 - t)) * sy2 / M
    return 4 * math.sqrt(2) * math.sqrt(term_opt + term_x + term_y)


def straight_line_gda(Q2, A, mu, x0, y0, eta_x, eta_y, iters):
    """Plain proximal GDA on the bilinear problem with g = h = 0."""
    x, y = np.array(x0, dtype=float), np.array(y0, dtype=float)
    xs, ys = [x.copy()], [y.copy()]
    for _ in range(iters):
        gx = Q2 @ x + A @ y
        gy = A.T @ x - mu * y
        x, y = x - eta_x * gx, y + eta_y * gy
        xs.append(x.copy())
        ys.append(y.copy())
    return xs, ys
