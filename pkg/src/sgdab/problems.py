"""Benchmark problem constructors and dataset ingestion."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .core import Diagnostics, MinimaxProblem, RngStream
from .prox import L2BallIndicator, SimplexWithQuadratic, Zero, project_simplex

__all__ = [
    "make_bilinear",
    "make_bilinear_wcmc",
    "bilinear_spectrum",
    "load_libsvm",
    "write_libsvm",
    "normalize_minmax",
    "make_synthetic_classification",
    "LinearModel",
    "TinyMLP",
    "make_dro",
    "dro_train_error",
]


# --------------------------------------------------------------------------
# Regularized bilinear problem
# --------------------------------------------------------------------------

def bilinear_spectrum(n: int, L_target: float, seed: int, mu_ref: float):
    """Shared eigenbasis ``V`` and diagonals ``(lam_Q, lam_A)``.

    ``lam_A`` is the smallest nonnegative diagonal for which the primal
    function ``x'(Q + A A' / (2 mu_ref))x`` is nonnegative.
    """
    gen = RngStream(seed, 0).gen
    V, _ = np.linalg.qr(gen.uniform(0.0, 1.0, size=(n, n)))
    lam0 = gen.uniform(-1.0, 1.0, size=n)
    lam_Q = lam0 / np.max(np.abs(lam0)) * L_target
    lam_A = np.sqrt(2.0 * mu_ref * np.maximum(0.0, -lam_Q))
    return V, lam_Q, lam_A


def _joint_lipschitz(lam_Q, lam_A, mu):
    # Hessian of f is block diagonal in the shared basis: [[2q, a], [a, -mu]].
    best = 0.0
    for q, a in zip(lam_Q, lam_A):
        ev = np.linalg.eigvalsh(np.array([[2.0 * q, a], [a, -mu]]))
        best = max(best, float(np.max(np.abs(ev))))
    return best


def make_bilinear(m: int, n: int, L_target: float, mu_y: float, seed: int) -> MinimaxProblem:
    """``L(x, y) = x'Qx + x'Ay - (mu_y / 2)||y||^2`` with a controlled spectrum.

    ``g = h = 0``, so the dual quadratic lives inside ``f`` and the solver's
    concavity modulus is ``mu_y``. ``F >= 0`` so the lower bound is 0.
    """
    if m != n:
        raise ValueError("the shared-eigenbasis construction needs m == n")
    if not (L_target > 0 and mu_y > 0):
        raise ValueError("L_target and mu_y must be positive")
    V, lam_Q, lam_A = bilinear_spectrum(n, L_target, seed, mu_y)
    assert np.all(lam_Q + lam_A ** 2 / mu_y >= -1e-12)
    if np.max(lam_A) > np.max(np.abs(lam_Q)):
        raise ValueError("need L_target >= 2 * mu_y so that ||Lambda_A|| <= ||Lambda_Q||")
    Q = (V * lam_Q) @ V.T
    A = (V * lam_A) @ V.T
    Q2 = Q + Q.T
    At = A.T.copy()
    P = Q + A @ A.T / (2.0 * mu_y)

    def grad_x(x, y):
        return Q2 @ x + A @ y

    def grad_y(x, y):
        return At @ x - mu_y * y

    def f_value(x, y):
        return float(x @ Q @ x + x @ A @ y - 0.5 * mu_y * (y @ y))

    L_true = _joint_lipschitz(lam_Q, lam_A, mu_y)
    diag = Diagnostics(
        L=L_true,
        kappa=L_true / mu_y,
        y_star=lambda x: At @ x / mu_y,
        primal_value=lambda x: float(x @ P @ x),
    )
    return MinimaxProblem(
        dims_x=(m,),
        dim_y=n,
        grad_x=grad_x,
        grad_y=grad_y,
        prox_g=(Zero(),),
        prox_h=Zero(),
        mu=float(mu_y),
        F_bar=0.0,
        f_value=f_value,
        diagnostics=diag,
        name=f"bilinear(n={n}, L={L_target:g}, mu_y={mu_y:g}, seed={seed})",
        extras={"A": A, "Q": Q, "lam_Q": lam_Q, "lam_A": lam_A, "L_target": float(L_target),
                "mu_y": float(mu_y)},
    )


def make_bilinear_wcmc(
    m: int, n: int, L_target: float, D_y: float, seed: int, x_radius: float = 1.0,
    coupling_ref: float = None,
) -> MinimaxProblem:
    """Merely concave variant: ``L(x, y) = x'Qx + x'Ay`` with ``||y|| <= D_y / 2``.

    Without the dual quadratic the primal function of an indefinite ``Q``
    is unbounded below, so ``x`` is kept in a ball of radius ``x_radius``
    and the lower bound is ``-L_target * x_radius^2``. ``A`` uses the same
    spectrum rule as the strongly concave instance with reference modulus
    ``coupling_ref`` (default ``L_target / 2``, the largest value keeping
    ``||A|| <= ||Q||``).
    """
    if m != n:
        raise ValueError("the shared-eigenbasis construction needs m == n")
    if not D_y > 0:
        raise ValueError(f"dual diameter must be positive, got {D_y}")
    if not (L_target > 0 and x_radius > 0):
        raise ValueError("L_target and x_radius must be positive")
    if coupling_ref is None:
        coupling_ref = L_target / 2.0
    V, lam_Q, lam_A = bilinear_spectrum(n, L_target, seed, coupling_ref)
    Q = (V * lam_Q) @ V.T
    A = (V * lam_A) @ V.T
    Q2 = Q + Q.T
    At = A.T.copy()
    r_y = D_y / 2.0

    def grad_x(x, y):
        return Q2 @ x + A @ y

    def grad_y(x, y):
        return At @ x

    def f_value(x, y):
        return float(x @ Q @ x + x @ A @ y)

    L_true = _joint_lipschitz(lam_Q, lam_A, 0.0)
    diag = Diagnostics(
        L=L_true,
        kappa=None,
        primal_value=lambda x: float(x @ Q @ x + r_y * np.linalg.norm(At @ x)),
    )
    return MinimaxProblem(
        dims_x=(m,),
        dim_y=n,
        grad_x=grad_x,
        grad_y=grad_y,
        prox_g=(L2BallIndicator(x_radius),),
        prox_h=L2BallIndicator(r_y),
        mu=0.0,
        F_bar=-float(L_target) * x_radius ** 2,
        f_value=f_value,
        diagnostics=diag,
        name=f"bilinear-wcmc(n={n}, L={L_target:g}, D_y={D_y:g}, seed={seed})",
        extras={"A": A, "Q": Q, "D_y": float(D_y), "L_target": float(L_target)},
    )


# --------------------------------------------------------------------------
# LIBSVM ingestion
# --------------------------------------------------------------------------

def load_libsvm(path: Union[str, Path], n_features: int = None):
    """Read a LIBSVM sparse text file into ``(features, labels)``.

    Indices are 1-based; missing entries are 0; the feature count is the
    largest index seen unless ``n_features`` is given. Labels become +-1
    (a 0/1 label set maps 0 to -1).
    """
    path = Path(path)
    raw_labels, rows = [], []
    n_feat = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            entries = {}
            for tok in tokens[1:]:
                key, sep, val = tok.partition(":")
                if key == "qid":
                    continue
                try:
                    idx, v = int(key), float(val)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed entry {tok!r}") from None
                if not sep or idx < 1:
                    raise ValueError(f"{path}:{lineno}: malformed entry {tok!r}")
                entries[idx] = v
                n_feat = max(n_feat, idx)
            raw_labels.append(label)
            rows.append(entries)
    if not rows:
        raise ValueError(f"{path}: no data lines")
    if n_features is not None:
        if n_features < n_feat:
            raise ValueError(f"{path}: index {n_feat} exceeds n_features={n_features}")
        n_feat = n_features
    X = np.zeros((len(rows), n_feat))
    for r, entries in enumerate(rows):
        for idx, v in entries.items():
            X[r, idx - 1] = v
    # covers both the +-1 and the 0/1 conventions
    labels = np.where(np.asarray(raw_labels) > 0, 1.0, -1.0)
    return X, labels


def write_libsvm(path: Union[str, Path], features, labels) -> None:
    """Write ``(features, labels)`` in LIBSVM format, skipping zero entries."""
    features = np.asarray(features, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row, lab in zip(features, labels):
            parts = ["+1" if lab > 0 else "-1"]
            parts += [f"{j + 1}:{v!r}" for j, v in enumerate(row.tolist()) if v != 0.0]
            fh.write(" ".join(parts) + "\n")


def normalize_minmax(features) -> np.ndarray:
    """Shift and scale each row (data point) to span [0, 1]; constant rows become 0."""
    X = np.asarray(features, dtype=np.float64)
    lo = X.min(axis=1, keepdims=True)
    span = X.max(axis=1, keepdims=True) - lo
    out = np.zeros_like(X)
    ok = span[:, 0] > 0
    out[ok] = (X[ok] - lo[ok]) / span[ok]
    return out


def make_synthetic_classification(n_data: int = 200, d: int = 20, seed: int = 0, separation: float = 1.0):
    """Two balanced Gaussian blobs, row-normalized like the LIBSVM data."""
    gen = RngStream(seed, 1).gen
    direction = gen.standard_normal(d)
    direction /= np.linalg.norm(direction)
    labels = np.where(np.arange(n_data) < n_data // 2, 1.0, -1.0)
    gen.shuffle(labels)
    X = gen.standard_normal((n_data, d)) + separation * labels[:, None] * direction
    return normalize_minmax(X), labels


# --------------------------------------------------------------------------
# Distributionally robust logistic regression
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    """Score ``q(a; x) = a'w + b`` with ``x = [w, b]`` in one block."""

    def block_dims(self, d: int) -> tuple:
        return (d + 1,)

    def scores(self, x, X):
        return X @ x[:-1] + x[-1]

    def weighted_grad(self, x, X, c):
        """``sum_i c_i * grad_x q(a_i; x)``."""
        return np.concatenate([X.T @ c, [c.sum()]])

    def init(self, d: int, gen) -> np.ndarray:
        return np.zeros(d + 1)


@dataclass(frozen=True)
class TinyMLP:
    """One tanh hidden layer; blocks are (hidden layer, output layer)."""

    hidden: int = 16

    def block_dims(self, d: int) -> tuple:
        return (self.hidden * (d + 1), self.hidden + 1)

    def _unpack(self, x, d):
        h = self.hidden
        W1 = x[: h * d].reshape(h, d)
        b1 = x[h * d: h * (d + 1)]
        w2 = x[h * (d + 1): h * (d + 2)]
        b2 = x[-1]
        return W1, b1, w2, b2

    def scores(self, x, X):
        W1, b1, w2, b2 = self._unpack(x, X.shape[1])
        return np.tanh(X @ W1.T + b1) @ w2 + b2

    def weighted_grad(self, x, X, c):
        W1, b1, w2, _ = self._unpack(x, X.shape[1])
        H = np.tanh(X @ W1.T + b1)
        D = (c[:, None] * w2) * (1.0 - H ** 2)
        return np.concatenate([(D.T @ X).ravel(), D.sum(axis=0), H.T @ c, [c.sum()]])

    def init(self, d: int, gen) -> np.ndarray:
        """Glorot-uniform weights, zero biases."""
        h = self.hidden
        W1 = gen.uniform(-1, 1, (h, d)) * np.sqrt(6.0 / (d + h))
        w2 = gen.uniform(-1, 1, h) * np.sqrt(6.0 / (h + 1))
        return np.concatenate([W1.ravel(), np.zeros(h), w2, [0.0]])


def _logistic_loss(z, b):
    return np.logaddexp(0.0, -b * z)


def _logistic_dloss(z, b):
    # d/dz log(1 + exp(-b z)) = -b * sigmoid(-b z)
    return -b * np.exp(-np.logaddexp(0.0, b * z))


def make_dro(features, labels, mu_reg: float = 0.01, model=None, seed: int = 0) -> MinimaxProblem:
    """``min_x max_{y in simplex}  sum_i y_i l_i(q(a_i; x)) - (mu/2)||y - 1/n||^2``.

    The minibatch oracle samples ``M`` data indices with replacement; the
    primal estimate is ``n`` times the batch mean of ``y_i l_i' grad q_i``,
    the dual estimate puts ``(n / M) l_i`` on each sampled coordinate.
    """
    X = np.asarray(features, dtype=np.float64)
    b = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or b.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: features {X.shape}, labels {b.shape}")
    if not np.all(np.isin(b, (-1.0, 1.0))):
        raise ValueError("labels must be +-1")
    if mu_reg < 0:
        raise ValueError("mu_reg must be >= 0")
    model = LinearModel() if model is None else model
    n_data, d = X.shape
    dims = model.block_dims(d)
    anchor = np.full(n_data, 1.0 / n_data)
    h = SimplexWithQuadratic(mu_reg, anchor)

    def losses(x):
        return _logistic_loss(model.scores(x, X), b)

    def grad_x(x, y):
        q = model.scores(x, X)
        return model.weighted_grad(x, X, y * _logistic_dloss(q, b))

    def grad_y(x, y):
        return losses(x)

    def f_value(x, y):
        return float(y @ losses(x))

    def sample_grad_x(x, y, gen, M):
        idx = gen.integers(0, n_data, size=M)
        Xb, bb = X[idx], b[idx]
        q = model.scores(x, Xb)
        c = y[idx] * _logistic_dloss(q, bb) * (n_data / M)
        return model.weighted_grad(x, Xb, c)

    def sample_grad_y(x, y, gen, M):
        idx = gen.integers(0, n_data, size=M)
        vals = _logistic_loss(model.scores(x, X[idx]), b[idx]) * (n_data / M)
        out = np.zeros(n_data)
        np.add.at(out, idx, vals)
        return out

    def y_star(x):
        if mu_reg == 0:
            e = np.zeros(n_data)
            e[int(np.argmax(losses(x)))] = 1.0
            return e
        return project_simplex(anchor + losses(x) / mu_reg)

    def primal_value(x):
        ys = y_star(x)
        d = ys - anchor
        return f_value(x, ys) - 0.5 * mu_reg * float(d @ d)

    return MinimaxProblem(
        dims_x=dims,
        dim_y=n_data,
        grad_x=grad_x,
        grad_y=grad_y,
        prox_g=tuple(Zero() for _ in dims),
        prox_h=h,
        mu=float(mu_reg),
        F_bar=0.0,
        f_value=f_value,
        sample_grad_x=sample_grad_x,
        sample_grad_y=sample_grad_y,
        diagnostics=Diagnostics(y_star=y_star, primal_value=primal_value),
        name=f"dro(n={n_data}, d={d}, model={type(model).__name__}, mu={mu_reg:g})",
        extras={"features": X, "labels": b, "model": model, "losses": losses, "seed": seed},
    )


def dro_train_error(problem: MinimaxProblem, x) -> float:
    """Fraction of wrong sign predictions (a zero score predicts -1)."""
    X, b, model = problem.extras["features"], problem.extras["labels"], problem.extras["model"]
    pred = np.where(model.scores(np.asarray(x), X) > 0, 1.0, -1.0)
    return float(np.mean(pred != b))

