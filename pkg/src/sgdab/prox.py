"""Proximal maps of the closed convex pieces ``g_i`` and ``h``.

Every map evaluates ``argmin_z  phi(z) + ||z - u||^2 / (2 eta)`` exactly.
Solvers call :meth:`ProxMap.prox` directly; :func:`prox_eval` is the
checked public entry point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProxMap",
    "Zero",
    "L2BallIndicator",
    "L1",
    "QuadraticToAnchor",
    "SimplexWithQuadratic",
    "prox_eval",
    "project_simplex",
]


def project_simplex(u) -> np.ndarray:
    """Euclidean projection onto the unit simplex ``{y >= 0, sum(y) = 1}``.

    Sort-and-threshold; ties are ordered by index so the result does not
    depend on the platform's sort.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.size == 0:
        raise ValueError("project_simplex needs a non-empty 1-d vector")
    if not np.all(np.isfinite(u)):
        raise ValueError("project_simplex input must be finite")
    order = np.argsort(-u, kind="stable")
    srt = u[order]
    css = np.cumsum(srt) - 1.0
    j = np.arange(1, u.size + 1)
    active = srt - css / j > 0
    r = int(np.nonzero(active)[0][-1])
    theta = css[r] / (r + 1)
    return np.maximum(u - theta, 0.0)


class ProxMap:
    """Base class. Subclasses implement ``prox``, ``value`` and ``contains``."""

    def prox(self, u: np.ndarray, eta: float) -> np.ndarray:
        raise NotImplementedError

    def value(self, z: np.ndarray) -> float:
        raise NotImplementedError

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.isfinite(self.value_tol(z, tol)))

    def value_tol(self, z, tol):
        return self.value(z)

    def minimizer(self, dim: int) -> np.ndarray:
        """A minimizer of the function itself (used by fixed-point checks)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(ProxMap):
    def prox(self, u, eta):
        return np.array(u, dtype=np.float64, copy=True)

    def value(self, z):
        return 0.0

    def minimizer(self, dim):
        return np.zeros(dim)


@dataclass(frozen=True)
class L2BallIndicator(ProxMap):
    radius: float
    center: object = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def prox(self, u, eta):
        c = np.asarray(self.center, dtype=np.float64)
        d = u - c
        nd = float(np.sqrt(d @ d))
        if nd <= self.radius:
            return np.array(u, dtype=np.float64, copy=True)
        return c + d * (self.radius / nd)

    def value_tol(self, z, tol):
        d = np.asarray(z) - np.asarray(self.center)
        return 0.0 if np.sqrt(d @ d) <= self.radius + tol else np.inf

    def value(self, z):
        return self.value_tol(z, 1e-12)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def minimizer(self, dim):
        return np.broadcast_to(np.asarray(self.center, dtype=np.float64), (dim,)).copy()


@dataclass(frozen=True)
class L1(ProxMap):
    weight: float

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("L1 weight must be >= 0")

    def prox(self, u, eta):
        t = eta * self.weight
        return np.sign(u) * np.maximum(np.abs(u) - t, 0.0)

    def value(self, z):
        return float(self.weight * np.abs(z).sum())

    def minimizer(self, dim):
        return np.zeros(dim)


@dataclass(frozen=True)
class QuadraticToAnchor(ProxMap):
    """``(weight / 2) ||z - anchor||^2``."""

    weight: float
    anchor: object = 0.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("quadratic weight must be >= 0")

    def prox(self, u, eta):
        w = eta * self.weight
        return (u + w * np.asarray(self.anchor)) / (1.0 + w)

    def value(self, z):
        d = np.asarray(z) - np.asarray(self.anchor)
        return float(0.5 * self.weight * (d @ d))

    def minimizer(self, dim):
        return np.broadcast_to(np.asarray(self.anchor, dtype=np.float64), (dim,)).copy()


@dataclass(frozen=True)
class SimplexWithQuadratic(ProxMap):
    """Unit-simplex indicator plus ``(weight / 2) ||z - anchor||^2``.

    The prox at step ``eta`` is the simplex projection of the weighted
    point ``(u / eta + weight * anchor) / (1 / eta + weight)``.
    """

    weight: float
    anchor: object = 0.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("quadratic weight must be >= 0")

    def prox(self, u, eta):
        w = eta * self.weight
        return project_simplex((u + w * np.asarray(self.anchor)) / (1.0 + w))

    def value_tol(self, z, tol):
        z = np.asarray(z)
        if np.any(z < -tol) or abs(z.sum() - 1.0) > tol:
            return np.inf
        d = z - np.asarray(self.anchor)
        return float(0.5 * self.weight * (d @ d))

    def value(self, z):
        return self.value_tol(z, 1e-10)

    def minimizer(self, dim):
        return project_simplex(np.broadcast_to(np.asarray(self.anchor, dtype=np.float64), (dim,)))


def prox_eval(pmap: ProxMap, eta: float, u) -> np.ndarray:
    """Checked evaluation of ``prox_{eta * phi}(u)``."""
    if not eta > 0:
        raise ValueError(f"prox step must be positive, got {eta}")
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise ValueError("prox input must be finite")
    return pmap.prox(u, float(eta))
