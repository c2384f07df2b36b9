"""Stochastic first-order oracles with batch averaging and call accounting."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import BlockVector, GradientMapEval, MinimaxProblem, RngStream

__all__ = [
    "OracleSpec",
    "OracleHandle",
    "gradient_map_parts",
    "stochastic_gradient_map",
    "deterministic_gradient_map",
]

NOISE_MODELS = ("deterministic", "gaussian", "minibatch")
SCALINGS = ("assumption", "coordinate")


@dataclass(frozen=True)
class OracleSpec:
    """Noise model of the first-order oracle.

    ``gaussian`` adds isotropic normal noise. With ``scaling="assumption"``
    the per-block x-noise has ``E||n_i||^2 = sigma_x^2 / N`` and the
    y-noise ``E||n||^2 = sigma_y^2``. With ``scaling="coordinate"`` each
    coordinate gets variance ``sigma^2`` (``n ~ N(0, sigma^2 I)``).
    ``minibatch`` defers to the problem's own data sampler; the sigmas are
    then the declared (usually estimated) variance bounds.
    """

    sigma_x: float = 0.0
    sigma_y: float = 0.0
    noise: str = "gaussian"
    scaling: str = "assumption"

    def __post_init__(self):
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown noise scaling {self.scaling!r}")
        if self.sigma_x < 0 or self.sigma_y < 0:
            raise ValueError("noise levels must be >= 0")
        if self.noise == "deterministic" and (self.sigma_x or self.sigma_y):
            raise ValueError("deterministic oracle requires sigma_x = sigma_y = 0")

    @classmethod
    def deterministic(cls) -> "OracleSpec":
        return cls(0.0, 0.0, "deterministic")

    @property
    def is_deterministic(self) -> bool:
        return self.noise == "deterministic" or (
            self.noise == "gaussian" and self.sigma_x == 0 and self.sigma_y == 0
        )

    def variance_bounds(self, problem: MinimaxProblem) -> tuple:
        """``(sigma_x^2, sigma_y^2)`` in the sense of the bounded-variance assumption."""
        if self.noise == "deterministic":
            return 0.0, 0.0
        if self.noise == "gaussian" and self.scaling == "coordinate":
            return (
                self.sigma_x ** 2 * problem.N * max(problem.dims_x),
                self.sigma_y ** 2 * problem.dim_y,
            )
        return self.sigma_x ** 2, self.sigma_y ** 2

    def block_noise_std(self, problem: MinimaxProblem) -> np.ndarray:
        """Per-coordinate std of one x-noise sample, block by block."""
        if self.scaling == "coordinate":
            return np.full(problem.N, self.sigma_x)
        d = np.asarray(problem.dims_x, dtype=np.float64)
        return np.sqrt(self.sigma_x ** 2 / problem.N / d)

    def y_noise_std(self, problem: MinimaxProblem) -> float:
        if self.scaling == "coordinate":
            return self.sigma_y
        return float(np.sqrt(self.sigma_y ** 2 / problem.dim_y))


class OracleHandle:
    """Counting gradient oracle bound to one problem and one RNG stream.

    One single-sample gradient evaluation is one call; a batch of ``M``
    samples costs ``M`` calls. For Gaussian noise the batch mean is drawn
    directly from its exact distribution (variance divided by ``M``).
    """

    def __init__(self, problem: MinimaxProblem, spec: OracleSpec, rng: RngStream):
        if spec.noise == "minibatch" and problem.sample_grad_x is None:
            raise ValueError(f"{problem.name} has no minibatch sampler")
        self.problem = problem
        self.spec = spec
        self.rng = rng
        self.calls_x = 0
        self.calls_y = 0
        self._gen = rng.gen
        self._det = spec.noise == "deterministic"
        self._xstd = spec.block_noise_std(problem)
        self._ystd = spec.y_noise_std(problem)
        self._slices = problem.slices
        self._parent = None

    @property
    def calls(self) -> int:
        return self.calls_x + self.calls_y

    def auxiliary(self) -> "OracleHandle":
        """Handle on a child stream whose calls are billed to this handle.

        Used for side draws that must not shift the main draw sequence.
        """
        aux = OracleHandle(self.problem, self.spec, self.rng.spawn(0xA0))
        aux._parent = self
        return aux

    def _bill(self, nx: int, ny: int) -> None:
        self.calls_x += nx
        self.calls_y += ny
        if self._parent is not None:
            self._parent._bill(nx, ny)

    def _check_batch(self, M):
        if M < 1:
            raise ValueError(f"batch size must be >= 1, got {M}")

    def sample_grad_x(self, x: np.ndarray, y: np.ndarray, M: int) -> np.ndarray:
        """Batch-averaged estimate of the full primal gradient."""
        self._check_batch(M)
        self._bill(M, 0)
        p = self.problem
        if self.spec.noise == "minibatch":
            return p.sample_grad_x(x, y, self._gen, M)
        g = p.grad_x(x, y)
        if self._det or self.spec.sigma_x == 0:
            return g
        noise = self._gen.standard_normal(g.size)
        if p.N == 1:
            return g + noise * (self._xstd[0] / np.sqrt(M))
        for i, s in enumerate(self._slices):
            noise[s] *= self._xstd[i]
        return g + noise / np.sqrt(M)

    def sample_grad_x_block(self, x: np.ndarray, y: np.ndarray, i: int, M: int) -> np.ndarray:
        """Batch-averaged estimate of the partial gradient of block ``i``."""
        if not 0 <= i < self.problem.N:
            raise IndexError(f"block index {i} out of range for N={self.problem.N}")
        self._check_batch(M)
        p = self.problem
        if self.spec.noise == "minibatch" or p.N == 1:
            return self.sample_grad_x(x, y, M)[self._slices[i]]
        self._bill(M, 0)
        g = p.grad_x_block(x, y, i)
        if self._det or self.spec.sigma_x == 0:
            return g
        return g + self._gen.standard_normal(g.size) * (self._xstd[i] / np.sqrt(M))

    def sample_grad_y(self, x: np.ndarray, y: np.ndarray, M: int) -> np.ndarray:
        """Batch-averaged estimate of the dual gradient."""
        self._check_batch(M)
        self._bill(0, M)
        p = self.problem
        if self.spec.noise == "minibatch":
            return p.sample_grad_y(x, y, self._gen, M)
        g = p.grad_y(x, y)
        if self._det or self.spec.sigma_y == 0:
            return g
        return g + self._gen.standard_normal(g.size) * (self._ystd / np.sqrt(M))


def _flat(x) -> np.ndarray:
    return x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=np.float64)


def gradient_map_parts(problem, x, y, sx, sy, eta_x, eta_y, blocks=None):
    """Prox-gradient residuals from given gradient (estimates).

    ``blocks`` restricts the primal part to those block indices (others
    stay zero); ``sx`` may be ``None`` to skip the primal part.
    """
    gx = np.zeros_like(x)
    if sx is not None:
        idx = range(problem.N) if blocks is None else blocks
        for i in idx:
            s = problem.slices[i]
            xi = x[s]
            gx[s] = (xi - problem.prox_g[i].prox(xi - eta_x * sx[s], eta_x)) / eta_x
    gy = None
    if sy is not None:
        gy = (problem.prox_h.prox(y + eta_y * sy, eta_y) - y) / eta_y
    return gx, gy


def _check_steps(eta_x, eta_y):
    if not (eta_x > 0 and eta_y > 0):
        raise ValueError(f"step sizes must be positive, got eta_x={eta_x}, eta_y={eta_y}")


def stochastic_gradient_map(
    h: OracleHandle,
    x,
    y,
    eta_x: float,
    eta_y: float,
    M_x: int,
    M_y: int,
    mode: Union[str, int] = "full",
) -> GradientMapEval:
    """Stochastic gradient map with fresh oracle draws.

    ``mode`` is ``"full"``, ``"y"`` (dual part only) or a block index.
    """
    _check_steps(eta_x, eta_y)
    p = h.problem
    xf, yf = _flat(x), np.asarray(y, dtype=np.float64)
    if mode == "full":
        sx, blocks = h.sample_grad_x(xf, yf, M_x), None
    elif mode == "y":
        sx, blocks = None, None
    else:
        i = int(mode)
        sx = np.zeros_like(xf)
        sx[p.slices[i]] = h.sample_grad_x_block(xf, yf, i, M_x)
        blocks = [i]
    sy = h.sample_grad_y(xf, yf, M_y)
    gx, gy = gradient_map_parts(p, xf, yf, sx, sy, eta_x, eta_y, blocks)
    return GradientMapEval(BlockVector(gx, p.dims_x), gy, stochastic=not h.spec.is_deterministic)


def deterministic_gradient_map(problem: MinimaxProblem, x, y, eta_x: float, eta_y: float) -> GradientMapEval:
    """Exact gradient map. For reporting and certificates only."""
    _check_steps(eta_x, eta_y)
    xf, yf = _flat(x), np.asarray(y, dtype=np.float64)
    gx, gy = gradient_map_parts(
        problem, xf, yf, problem.grad_x(xf, yf), problem.grad_y(xf, yf), eta_x, eta_y
    )
    return GradientMapEval(BlockVector(gx, problem.dims_x), gy, stochastic=False)
