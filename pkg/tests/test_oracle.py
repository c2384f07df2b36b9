import math

import numpy as np
import pytest

from sgdab import (
    OracleHandle,
    OracleSpec,
    RngStream,
    deterministic_gradient_map,
    make_bilinear,
    make_bilinear_wcmc,
    stochastic_gradient_map,
)
from sgdab.prox import Zero


@pytest.fixture(scope="module")
def bil():
    return make_bilinear(30, 30, 5.0, 1.0, seed=4)


@pytest.fixture(scope="module")
def point():
    gen = np.random.default_rng(0)
    return gen.normal(size=30), gen.normal(size=30)


def blocked(p):
    return p.with_changes(dims_x=(10, 12, 8), prox_g=(Zero(), Zero(), Zero()))


def test_deterministic_block_gradient_is_analytic(bil, point):
    x, y = point
    p = blocked(bil)
    Q, A = bil.extras["Q"], bil.extras["A"]
    full = (Q + Q.T) @ x + A @ y
    h = OracleHandle(p, OracleSpec.deterministic(), RngStream(0))
    for i, s in enumerate(p.slices):
        assert np.array_equal(h.sample_grad_x_block(x, y, i, 1), full[s])
    assert np.allclose(h.sample_grad_y(x, y, 1), A.T @ x - y, rtol=0, atol=1e-12)
    assert h.calls_x == 3 and h.calls_y == 1


def test_zero_sigma_equals_deterministic(bil, point):
    x, y = point
    a = OracleHandle(bil, OracleSpec(0.0, 0.0), RngStream(1))
    b = OracleHandle(bil, OracleSpec.deterministic(), RngStream(2))
    assert np.array_equal(a.sample_grad_x(x, y, 7), b.sample_grad_x(x, y, 7))
    assert np.array_equal(a.sample_grad_y(x, y, 7), b.sample_grad_y(x, y, 7))


@pytest.mark.parametrize("M", [1, 10])
def test_x_batch_mean_and_variance(bil, point, M):
    x, y = point
    g = bil.grad_x(x, y)
    h = OracleHandle(bil, OracleSpec(1.0, 0.0), RngStream(3, M))
    n = 100_000
    s = np.array([h.sample_grad_x(x, y, M) for _ in range(n)])
    z = np.abs(s.mean(axis=0) - g) / (s.std(axis=0, ddof=1) / math.sqrt(n))
    assert z.max() <= 4.0
    assert np.mean(np.sum((s - g) ** 2, axis=1)) <= 1.05 / M
    assert h.calls_x == n * M and h.calls_y == 0


def test_y_variance_ratio(bil, point):
    x, y = point
    g = bil.grad_y(x, y)
    h = OracleHandle(bil, OracleSpec(0.0, 2.0), RngStream(4))
    v1 = np.mean([np.sum((h.sample_grad_y(x, y, 1) - g) ** 2) for _ in range(10_000)])
    v3 = np.mean([np.sum((h.sample_grad_y(x, y, 1000) - g) ** 2) for _ in range(10_000)])
    assert 0.8 * 1000 <= v1 / v3 <= 1.2 * 1000


def test_per_block_noise_share(bil, point):
    x, y = point
    p = blocked(bil)
    h = OracleHandle(p, OracleSpec(1.5, 0.0), RngStream(5))
    for i, s in enumerate(p.slices):
        g = p.grad_x(x, y)[s]
        e = np.mean([np.sum((h.sample_grad_x_block(x, y, i, 1) - g) ** 2) for _ in range(20_000)])
        assert e == pytest.approx(1.5 ** 2 / 3, rel=0.05)


def test_coordinate_scaling_bounds(bil):
    spec = OracleSpec(1.0, 2.0, scaling="coordinate")
    assert spec.variance_bounds(bil) == (30.0, 120.0)
    assert OracleSpec(1.0, 2.0).variance_bounds(bil) == (1.0, 4.0)


def test_argument_errors(bil, point):
    x, y = point
    h = OracleHandle(bil, OracleSpec(1.0, 1.0), RngStream(6))
    with pytest.raises(IndexError):
        h.sample_grad_x_block(x, y, 1, 1)
    with pytest.raises(ValueError):
        h.sample_grad_x(x, y, 0)
    with pytest.raises(ValueError):
        stochastic_gradient_map(h, x, y, 0.0, 1.0, 1, 1)
    with pytest.raises(ValueError):
        deterministic_gradient_map(bil, x, y, 1.0, -1.0)
    with pytest.raises(ValueError):
        OracleSpec(1.0, 0.0, "deterministic")
    with pytest.raises(ValueError):
        OracleSpec(-1.0, 0.0)


def test_map_vanishes_at_saddle(bil):
    z = np.zeros(30)
    h = OracleHandle(bil, OracleSpec.deterministic(), RngStream(7))
    assert stochastic_gradient_map(h, z, z, 0.1, 0.5, 1, 1).norm_sq == 0.0
    assert deterministic_gradient_map(bil, z, z, 0.1, 0.5).norm_sq == 0.0


def test_map_equals_gradients_without_prox(bil, point):
    x, y = point
    G = deterministic_gradient_map(bil, x, y, 0.01, 0.3)
    assert np.allclose(G.Gx.data, bil.grad_x(x, y), rtol=1e-12, atol=1e-12)
    assert np.allclose(G.Gy, bil.grad_y(x, y), rtol=1e-12, atol=1e-12)


def test_deterministic_spec_map_is_bitwise_exact(bil, point):
    x, y = point
    for mode in ("full", "y"):
        h = OracleHandle(bil, OracleSpec.deterministic(), RngStream(8))
        a = stochastic_gradient_map(h, x, y, 0.02, 0.7, 3, 4, mode=mode)
        b = deterministic_gradient_map(bil, x, y, 0.02, 0.7)
        assert np.array_equal(a.Gy, b.Gy)
        if mode == "full":
            assert np.array_equal(a.Gx.data, b.Gx.data)
        assert a.stochastic is False


def test_block_mode_fills_only_that_block(bil, point):
    x, y = point
    p = blocked(bil)
    h = OracleHandle(p, OracleSpec(1.0, 1.0), RngStream(9))
    G = stochastic_gradient_map(h, x, y, 0.1, 0.1, 2, 3, mode=1)
    assert np.all(G.Gx.block(0) == 0) and np.all(G.Gx.block(2) == 0)
    assert np.any(G.Gx.block(1) != 0)
    assert h.calls_x == 2 and h.calls_y == 3


def test_stochastic_map_error_bounded_by_oracle_error():
    # constrained primal and dual, so both prox maps are projections
    p = make_bilinear_wcmc(20, 20, 3.0, 2.0, seed=1, x_radius=0.5)
    gen = np.random.default_rng(3)
    spec = OracleSpec(2.0, 2.0)
    for k in range(1000):
        x = gen.normal(size=20)
        x *= 0.5 * gen.uniform() / np.linalg.norm(x)
        y = gen.normal(size=20)
        y *= gen.uniform() / np.linalg.norm(y)
        ex, ey = 10 ** gen.uniform(-2, 1), 10 ** gen.uniform(-2, 1)
        twin = OracleHandle(p, spec, RngStream(10, k))
        sx, sy = twin.sample_grad_x(x, y, 1), twin.sample_grad_y(x, y, 1)
        Gt = stochastic_gradient_map(OracleHandle(p, spec, RngStream(10, k)), x, y, ex, ey, 1, 1)
        G = deterministic_gradient_map(p, x, y, ex, ey)
        assert np.linalg.norm(Gt.Gx.data - G.Gx.data) <= np.linalg.norm(sx - p.grad_x(x, y)) + 1e-12
        assert np.linalg.norm(Gt.Gy - G.Gy) <= np.linalg.norm(sy - p.grad_y(x, y)) + 1e-12


def test_auxiliary_draws_are_billed_to_parent(bil, point):
    x, y = point
    h = OracleHandle(bil, OracleSpec(1.0, 1.0), RngStream(11))
    aux = h.auxiliary()
    aux.sample_grad_y(x, y, 5)
    assert h.calls_y == 5 and aux.calls_y == 5
