import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import reference as ref
from sgdab import (
    OracleHandle,
    OracleSpec,
    RngStream,
    deterministic_gradient_map,
    load_libsvm,
    make_bilinear,
    make_bilinear_wcmc,
    make_dro,
)
from sgdab.problems import (
    TinyMLP,
    bilinear_spectrum,
    dro_train_error,
    make_synthetic_classification,
    normalize_minmax,
    write_libsvm,
)
from sgdab.prox import project_simplex


@pytest.fixture(scope="module")
def data():
    return make_synthetic_classification(40, 5, seed=3)


def test_bilinear_closed_forms():
    p = make_bilinear(30, 30, 10.0, 1.0, seed=2)
    gen = np.random.default_rng(0)
    Q, A = p.extras["Q"], p.extras["A"]
    for _ in range(100):
        x = gen.normal(size=30)
        assert np.linalg.norm(p.grad_y(x, p.diagnostics.y_star(x))) <= 1e-12
    for _ in range(1000):
        x = gen.normal(size=30)
        assert p.diagnostics.primal_value(x) >= -1e-10
    # F(x) = max_y L(x, y) at the closed-form maximizer
    x = gen.normal(size=30)
    assert p.diagnostics.primal_value(x) == pytest.approx(p.eval_L(x, A.T @ x), rel=1e-12)
    assert p.mu == 1.0 and p.F_bar == 0.0 and p.N == 1


@pytest.mark.parametrize("L", [5.0, 10.0, 50.0])
def test_bilinear_spectrum(L):
    V, lam_Q, lam_A = bilinear_spectrum(30, L, seed=1, mu_ref=1.0)
    assert abs(np.max(np.abs(lam_Q)) - L) <= 1e-9
    assert np.max(lam_A) <= L
    assert np.all(lam_Q + lam_A ** 2 / 2.0 >= -1e-12)
    assert np.allclose(V.T @ V, np.eye(30), atol=1e-12)


def test_bilinear_stationarity_oracle():
    p = make_bilinear(20, 20, 5.0, 1.0, seed=0)
    z = np.zeros(20)
    assert deterministic_gradient_map(p, z, z, 0.1, 0.1).norm == 0.0
    # positive-definite instance: F strictly convex, no other stationary point
    Qpd = np.diag(np.linspace(1, 3, 20))
    pd = p.with_changes(grad_x=lambda x, y: 2 * Qpd @ x, grad_y=lambda x, y: -y)
    gen = np.random.default_rng(1)
    for _ in range(50):
        x, y = gen.normal(size=20), gen.normal(size=20)
        assert deterministic_gradient_map(pd, x, y, 0.1, 0.1).norm > 1e-6


def test_bilinear_rejects_bad_arguments():
    with pytest.raises(ValueError):
        make_bilinear(3, 4, 5.0, 1.0, 0)
    with pytest.raises(ValueError):
        make_bilinear(3, 3, 5.0, 0.0, 0)


def test_wcmc_instance():
    p = make_bilinear_wcmc(10, 10, 5.0, 4.0, seed=0)
    assert p.mu == 0.0
    assert p.prox_h.diameter == 4.0
    assert p.diagnostics.y_star is None
    y = p.prox_h.prox(np.full(10, 100.0), 1.0)
    assert np.linalg.norm(y) <= 2.0 + 1e-12
    with pytest.raises(ValueError):
        make_bilinear_wcmc(10, 10, 5.0, 0.0, seed=0)


@pytest.mark.parametrize("which", ["bilinear", "wcmc", "dro-linear", "dro-mlp"])
def test_central_differences(which, data):
    X, b = data
    gen = np.random.default_rng(2)
    if which == "bilinear":
        p = make_bilinear(12, 12, 5.0, 1.0, seed=3)
    elif which == "wcmc":
        p = make_bilinear_wcmc(12, 12, 5.0, 2.0, seed=3)
    elif which == "dro-linear":
        p = make_dro(X, b, 0.01)
    else:
        p = make_dro(X, b, 0.01, model=TinyMLP(6))
    for _ in range(20):
        x = gen.normal(0, 0.5, p.n)
        y = project_simplex(gen.uniform(size=p.dim_y)) if which.startswith("dro") else gen.normal(size=p.dim_y)
        for got, want in (
            (p.grad_x(x, y), ref.central_difference(lambda z: p.f_value(z, y), x)),
            (p.grad_y(x, y), ref.central_difference(lambda z: p.f_value(x, z), y)),
        ):
            assert np.linalg.norm(got - want) <= 1e-5 * max(np.linalg.norm(want), 1e-8)


def test_libsvm_examples(tmp_path):
    f = tmp_path / "a.txt"
    f.write_text("+1 1:0.5 3:2.0\n-1\n")
    X, y = load_libsvm(f)
    assert X.tolist() == [[0.5, 0.0, 2.0], [0.0, 0.0, 0.0]] and y.tolist() == [1.0, -1.0]
    g = tmp_path / "b.txt"
    g.write_text("0 2:1\n1 1:3\n")
    X, y = load_libsvm(g)
    assert X.tolist() == [[0.0, 1.0], [3.0, 0.0]] and y.tolist() == [-1.0, 1.0]


def test_libsvm_tolerates_unordered_indices(tmp_path):
    f = tmp_path / "u.txt"
    f.write_text("+1 3:1 1:2\n")
    X, _ = load_libsvm(f)
    assert X.tolist() == [[2.0, 0.0, 1.0]]


@pytest.mark.parametrize("text, lineno", [("+1 1:0.5\n-1 x:2\n", 2), ("abc 1:1\n", 1), ("+1 0:1\n", 1)])
def test_libsvm_parse_errors(tmp_path, text, lineno):
    f = tmp_path / "bad.txt"
    f.write_text(text)
    with pytest.raises(ValueError, match=f":{lineno}:"):
        load_libsvm(f)


def test_libsvm_empty_file(tmp_path):
    f = tmp_path / "empty.txt"
    f.write_text("\n")
    with pytest.raises(ValueError):
        load_libsvm(f)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 8), d=st.integers(1, 6))
def test_libsvm_round_trip(tmp_path_factory, seed, n, d):
    gen = np.random.default_rng(seed)
    X = gen.normal(size=(n, d)) * (gen.uniform(size=(n, d)) < 0.5)
    X[0, d - 1] = 1.5  # pin the feature count
    labels = np.where(gen.uniform(size=n) < 0.5, -1.0, 1.0)
    path = tmp_path_factory.mktemp("svm") / "rt.txt"
    write_libsvm(path, X, labels)
    X2, l2 = load_libsvm(path)
    assert np.array_equal(X, X2) and np.array_equal(labels, l2)


def test_normalize_minmax_examples():
    out = normalize_minmax(np.array([[0.0, 5.0, 10.0], [3.0, 3.0, 3.0], [0.0, 1.0, 1.0]]))
    assert out.tolist() == [[0.0, 0.5, 1.0], [0.0, 0.0, 0.0], [0.0, 1.0, 1.0]]


def test_dro_linear_gradient_matches_logistic_regression(data):
    X, b = data
    p = make_dro(X, b, 0.01)
    n = len(b)
    x = np.random.default_rng(4).normal(size=p.n)
    y = np.full(n, 1.0 / n)
    z = X @ x[:-1] + x[-1]
    s = -b / (1.0 + np.exp(b * z))
    want = np.concatenate([X.T @ s / n, [s.mean()]])
    assert np.allclose(p.grad_x(x, y), want, rtol=1e-12, atol=1e-15)


def test_dro_value_at_zero_is_log2(data):
    X, b = data
    p = make_dro(X, b, 0.01)
    n = len(b)
    assert p.f_value(np.zeros(p.n), np.full(n, 1.0 / n)) == pytest.approx(math.log(2.0), rel=1e-15)
    assert np.allclose(p.grad_y(np.zeros(p.n), None), math.log(2.0))


def test_dro_losses_nonnegative(data):
    X, b = data
    p = make_dro(X, b, 0.01, model=TinyMLP(4))
    gen = np.random.default_rng(5)
    for _ in range(50):
        assert np.all(p.grad_y(gen.normal(0, 10, p.n), None) >= 0)


def test_dro_structure(data):
    X, b = data
    p = make_dro(X, b, 0.01, model=TinyMLP(16))
    assert p.N == 2 and p.dims_x == (16 * 6, 17)
    assert p.mu == 0.01 and p.F_bar == 0.0
    with pytest.raises(ValueError):
        make_dro(X, b[:-1], 0.01)


def test_dro_minibatch_unbiased(data):
    X, b = data
    p = make_dro(X, b, 0.01)
    gen = np.random.default_rng(6)
    x = gen.normal(0, 0.5, p.n)
    y = project_simplex(gen.uniform(size=p.dim_y))
    h = OracleHandle(p, OracleSpec(1.0, 1.0, "minibatch"), RngStream(7))
    trials = 100_000
    sx = np.array([h.sample_grad_x(x, y, 1) for _ in range(trials)])
    z = np.abs(sx.mean(axis=0) - p.grad_x(x, y)) / (sx.std(axis=0, ddof=1) / math.sqrt(trials))
    assert z.max() <= 4.0
    sy = np.array([h.sample_grad_y(x, y, 4) for _ in range(20_000)])
    zy = np.abs(sy.mean(axis=0) - p.grad_y(x, y)) / (sy.std(axis=0, ddof=1) / math.sqrt(len(sy)))
    assert zy.max() <= 4.0


def test_majority_train_error_at_zero():
    X, b = make_synthetic_classification(200, 20, seed=0)
    p = make_dro(X, b, 0.01)
    assert dro_train_error(p, np.zeros(p.n)) == 0.5


def test_dro_primal_value_closed_form(data):
    X, b = data
    p = make_dro(X, b, 0.5)
    x = np.random.default_rng(8).normal(size=p.n)
    ys = p.diagnostics.y_star(x)
    F = p.diagnostics.primal_value(x)
    gen = np.random.default_rng(9)
    for _ in range(200):
        y = project_simplex(ys + gen.normal(0, 0.05, ys.size))
        assert p.eval_L(x, y) <= F + 1e-12
