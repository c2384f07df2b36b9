"""Shared building blocks: block vectors, the problem model, RNG streams, errors."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .prox import ProxMap

__all__ = [
    "BlockVector",
    "MinimaxProblem",
    "Diagnostics",
    "RngStream",
    "GradientMapEval",
    "axpy_block",
    "norm_sq",
    "SgdabError",
    "DimensionError",
    "PreconditionError",
    "DivergenceError",
    "BudgetExceededError",
]


class SgdabError(Exception):
    """Base class for solver errors."""


class DimensionError(SgdabError, ValueError):
    pass


class PreconditionError(SgdabError, ValueError):
    pass


class DivergenceError(SgdabError, ArithmeticError):
    """An iterate became non-finite or left the 1e12 safety ball."""

    def __init__(self, message: str, iteration: int, backtrack: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration
        self.backtrack = backtrack

    def __str__(self) -> str:
        msg = super().__str__()
        if self.backtrack is not None:
            msg = f"{msg} (backtracking iteration {self.backtrack})"
        return msg


class BudgetExceededError(SgdabError, RuntimeError):
    """Backtracking cap or oracle budget exhausted. Carries the partial trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class BlockVector:
    """A real vector split into ``N`` contiguous blocks.

    The data lives in one flat float64 array so solvers can work on it
    directly; ``blocks`` exposes per-block views.
    """

    __slots__ = ("_data", "_dims", "_offsets")

    def __init__(self, data, dims: Sequence[int]):
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise DimensionError(f"block dimensions must be positive, got {dims}")
        arr = np.array(data, dtype=np.float64).reshape(-1)
        if arr.size != sum(dims):
            raise DimensionError(f"data of length {arr.size} does not match dims {dims}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("BlockVector entries must be finite")
        arr.flags.writeable = False
        self._data = arr
        self._dims = dims
        self._offsets = tuple(np.concatenate([[0], np.cumsum(dims)]).tolist())

    @classmethod
    def from_blocks(cls, blocks: Sequence) -> "BlockVector":
        blocks = [np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in blocks]
        return cls(np.concatenate(blocks) if blocks else [], [b.size for b in blocks])

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "BlockVector":
        return cls(np.zeros(sum(dims)), dims)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dims(self) -> tuple:
        return self._dims

    @property
    def N(self) -> int:
        return len(self._dims)

    @property
    def n(self) -> int:
        return self._data.size

    @property
    def blocks(self) -> list:
        o = self._offsets
        return [self._data[o[i]:o[i + 1]] for i in range(len(self._dims))]

    def block(self, i: int) -> np.ndarray:
        return self._data[self._offsets[i]:self._offsets[i + 1]]

    def with_data(self, data) -> "BlockVector":
        return BlockVector(data, self._dims)

    def __len__(self) -> int:
        return self.N

    def __repr__(self) -> str:
        return f"BlockVector(dims={self._dims}, norm={np.linalg.norm(self._data):.6g})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self._dims == other._dims and np.array_equal(self._data, other._data)

    __hash__ = None


def block_slices(dims: Sequence[int]) -> list:
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    return [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(dims))]


def axpy_block(alpha: float, u: BlockVector, v: BlockVector) -> BlockVector:
    """Return ``alpha * u + v`` blockwise."""
    if u.dims != v.dims:
        raise DimensionError(f"block dims differ: {u.dims} vs {v.dims}")
    return BlockVector(alpha * u.data + v.data, u.dims)


def norm_sq(u: BlockVector) -> float:
    """Sum of squared block norms."""
    return float(u.data @ u.data)


@dataclass(frozen=True)
class Diagnostics:
    """Closed-form facts about a test problem. Never read by solvers."""

    L: Optional[float] = None
    kappa: Optional[float] = None
    y_star: Optional[Callable] = None
    primal_value: Optional[Callable] = None


@dataclass(frozen=True)
class MinimaxProblem:
    """``min_x max_y  sum_i g_i(x_i) + f(x, y) - h(y)``.

    Gradient callables take flat float64 arrays ``(x, y)``; ``grad_x``
    returns the full primal gradient. Optional ``sample_grad_x`` /
    ``sample_grad_y`` with signature ``(x, y, rng, M)`` replace additive
    noise by a problem-specific minibatch estimator.
    """

    dims_x: tuple
    dim_y: int
    grad_x: Callable
    grad_y: Callable
    prox_g: tuple
    prox_h: ProxMap
    mu: float
    F_bar: float
    f_value: Optional[Callable] = None
    grad_x_block_fn: Optional[Callable] = None
    sample_grad_x: Optional[Callable] = None
    sample_grad_y: Optional[Callable] = None
    diagnostics: Optional[Diagnostics] = None
    name: str = "problem"
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims_x", tuple(int(d) for d in self.dims_x))
        object.__setattr__(self, "prox_g", tuple(self.prox_g))
        if len(self.prox_g) != len(self.dims_x):
            raise DimensionError("need one prox map per primal block")
        if self.mu < 0:
            raise PreconditionError(f"concavity modulus must be >= 0, got {self.mu}")
        object.__setattr__(self, "_slices", block_slices(self.dims_x))

    @property
    def N(self) -> int:
        return len(self.dims_x)

    @property
    def n(self) -> int:
        return sum(self.dims_x)

    @property
    def slices(self) -> list:
        return self._slices

    def grad_x_block(self, x: np.ndarray, y: np.ndarray, i: int) -> np.ndarray:
        if self.grad_x_block_fn is not None:
            return self.grad_x_block_fn(x, y, i)
        return self.grad_x(x, y)[self._slices[i]]

    def g_value(self, x: np.ndarray) -> float:
        return float(sum(p.value(x[s]) for p, s in zip(self.prox_g, self._slices)))

    def eval_L(self, x: np.ndarray, y: np.ndarray) -> float:
        if self.f_value is None:
            raise PreconditionError(f"{self.name}: no function value available")
        return self.g_value(x) + float(self.f_value(x, y)) - self.prox_h.value(y)

    def x_feasible(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return all(p.contains(x[s], tol) for p, s in zip(self.prox_g, self._slices))

    def without_diagnostics(self) -> "MinimaxProblem":
        return dataclasses.replace(self, diagnostics=None)

    def with_changes(self, **kw) -> "MinimaxProblem":
        return dataclasses.replace(self, **kw)


class RngStream:
    """Seeded, independently keyed random stream.

    ``(seed, stream)`` fully determines the draws; children derived with
    :meth:`spawn` are keyed by their path and are independent of siblings.
    """

    def __init__(self, seed: int, stream=0):
        self.seed = int(seed)
        self.key = tuple(int(s) for s in np.atleast_1d(stream))
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(ids))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self.key})"


@dataclass(frozen=True)
class GradientMapEval:
    """(Stochastic) prox-gradient map ``G = [G_x; G_y]`` at a point."""

    Gx: BlockVector
    Gy: np.ndarray
    stochastic: bool
    norm_sq: float = field(init=False)

    def __post_init__(self):
        gy = np.asarray(self.Gy, dtype=np.float64)
        object.__setattr__(self, "Gy", gy)
        object.__setattr__(self, "norm_sq", float(self.Gx.data @ self.Gx.data + gy @ gy))

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))
