import numpy as np
import pytest

from conftest import random_network, rel_close
from mlpdnn.calculus import (
    affine_wrap,
    compose_dims,
    compose_networks,
    extend_depth,
    identity_dims,
    identity_network,
    mean_network,
    retarget_dims,
    sum_dims,
    sum_networks,
    sup_norm,
    vector_scale,
    zero_network,
)
from mlpdnn.exceptions import ShapeError
from mlpdnn.network import param_count, realize

N_PROPERTY = 1000


def random_dims(rng, length=None, ends=None):
    length = int(rng.integers(3, 7)) if length is None else length
    d = [int(v) for v in rng.integers(1, 9, size=length)]
    if ends is not None:
        d[0], d[-1] = ends
    return tuple(d)


# --- dimension algebra -------------------------------------------------------


def test_compose_dims_examples():
    assert compose_dims((1, 2, 1), (3, 5, 1)) == (3, 5, 2, 2, 1)
    assert compose_dims((2, 7, 4), (4, 9, 2)) == (4, 9, 4, 7, 4)
    a, b, c = (1, 2, 1), (1, 3, 1), (1, 4, 1)
    assert compose_dims(compose_dims(a, b), c) == compose_dims(a, compose_dims(b, c))


def test_sum_dims_examples():
    assert sum_dims((2, 3, 1), (2, 5, 1)) == (2, 8, 1)
    assert sup_norm(sum_dims((2, 3, 1), (2, 5, 1))) == 8
    with pytest.raises(ShapeError):
        sum_dims((2, 3, 1), (2, 3, 3, 1))
    with pytest.raises(ShapeError):
        sum_dims((2, 3, 1), (3, 3, 1))


def test_retarget_examples():
    assert retarget_dims((2, 7, 3), 4) == (2, 7, 4)
    assert retarget_dims((2, 7, 1), 1) == (2, 7, 1)
    r = retarget_dims((2, 3, 1), 5)
    assert sup_norm(sum_dims(r, r)) == 6


def test_identity_shapes():
    assert identity_dims(6) == (1, 2, 2, 2, 2, 1)
    assert identity_network(4).dims == (1, 2, 2, 2, 2, 1)
    assert param_count(identity_network(1)) == 7


def test_compose_associative_randomized(rng):
    for _ in range(N_PROPERTY):
        a, b, c = (random_dims(rng) for _ in range(3))
        left = compose_dims(compose_dims(a, b), c)
        assert left == compose_dims(a, compose_dims(b, c))
        assert len(compose_dims(a, b)) == len(a) + len(b) - 1


def test_sum_associative_randomized(rng):
    for _ in range(N_PROPERTY):
        length = int(rng.integers(3, 7))
        ends = tuple(int(v) for v in rng.integers(1, 9, size=2))
        a, b, c = (random_dims(rng, length, ends) for _ in range(3))
        assert sum_dims(sum_dims(a, b), c) == sum_dims(a, sum_dims(b, c))


def test_sum_triangle_inequality_randomized(rng):
    for _ in range(N_PROPERTY):
        length = int(rng.integers(3, 7))
        ends = tuple(int(v) for v in rng.integers(1, 9, size=2))
        a, b = random_dims(rng, length, ends), random_dims(rng, length, ends)
        assert sup_norm(sum_dims(a, b)) <= sup_norm(a) + sup_norm(b)


def test_retargeted_sum_bound_randomized(rng):
    for _ in range(N_PROPERTY):
        length = int(rng.integers(3, 7))
        k = int(rng.integers(1, 9))
        n = int(rng.integers(1, 30))
        alphas = [random_dims(rng, length, (k, int(rng.integers(1, 9)))) for _ in range(int(rng.integers(1, 5)))]
        total = retarget_dims(alphas[0], n)
        for a in alphas[1:]:
            total = sum_dims(total, retarget_dims(a, n))
        assert sup_norm(total) <= max(sum(sup_norm(a) for a in alphas), n)


# --- realization-preserving constructors --------------------------------------


def test_identity_network_exact(rng):
    for H in (1, 2, 5):
        net = identity_network(H)
        x = np.concatenate([[-3.5, 0.0, 7.25], 1e3 * rng.standard_normal(100)])
        assert np.array_equal(realize(net, x[:, None])[:, 0], x)


def test_zero_network():
    net = zero_network(3, 4, 5)
    assert net.dims == (3, 1, 1, 1, 4)
    assert not realize(net, np.ones((7, 3))).any()


def test_affine_wrap_examples_and_oracle(rng):
    idn = identity_network(1)
    assert realize(affine_wrap(idn, 2.0, [3.0], [1.0]), np.array([0.0]))[0] == 8.0
    psi = random_network(rng, (3, 6, 2))
    x = rng.standard_normal((200, 3))
    same = affine_wrap(psi, 1.0, np.zeros(3), np.zeros(2))
    np.testing.assert_array_equal(realize(same, x), realize(psi, x))
    zero = affine_wrap(psi, 0.0, np.ones(3), np.ones(2))
    assert zero.dims == psi.dims and not realize(zero, x).any()
    lam, b, a = -1.7, rng.standard_normal(3), rng.standard_normal(2)
    wrapped = affine_wrap(psi, lam, b, a)
    assert wrapped.dims == psi.dims
    assert rel_close(realize(wrapped, x), lam * (realize(psi, x + b) + a), 1e-12)
    with pytest.raises(ShapeError):
        affine_wrap(psi, 1.0, np.zeros(2), np.zeros(2))


def test_vector_scale_examples_and_oracle(rng):
    out = vector_scale(identity_network(1), [1.0, 2.0], [0.0])
    assert out.dims == (1, 2, 2)
    np.testing.assert_array_equal(realize(out, np.array([3.0])), [3.0, 6.0])
    out = vector_scale(mean_network(2), [5.0, -5.0], [0.0, 0.0])
    assert out.dims == (2, 4, 2)
    np.testing.assert_allclose(realize(out, np.array([1.0, 3.0])), [10.0, -10.0])
    psi = random_network(rng, (2, 5, 3, 1))
    lam, b = rng.standard_normal(4), rng.standard_normal(2)
    net = vector_scale(psi, lam, b, 0.3)
    assert net.dims == retarget_dims(psi.dims, 4)
    x = rng.standard_normal((150, 2))
    assert rel_close(realize(net, x), (realize(psi, x + b) + 0.3) * lam, 1e-12)
    with pytest.raises(ShapeError):
        vector_scale(random_network(rng, (2, 3, 2)), [1.0], [0.0, 0.0])


def test_compose_examples_and_oracle(rng):
    idn = identity_network(1)
    both = compose_networks(idn, idn)
    assert both.dims == compose_dims((1, 2, 1), (1, 2, 1)) == (1, 2, 2, 2, 1)
    x = rng.standard_normal((100, 1))
    np.testing.assert_array_equal(realize(both, x), x)
    mean3 = compose_networks(idn, mean_network(3))
    assert mean3.dims == compose_dims((1, 2, 1), (3, 6, 1)) == (3, 6, 2, 2, 1)
    x3 = rng.standard_normal((100, 3))
    assert rel_close(realize(mean3, x3)[:, 0], x3.mean(axis=1), 1e-12)
    for _ in range(20):
        dp, dq = random_dims(rng), random_dims(rng)
        dp = (dq[-1],) + dp[1:]
        phi, psi = random_network(rng, dp), random_network(rng, dq)
        net = compose_networks(phi, psi)
        assert net.dims == compose_dims(dp, dq)
        xs = rng.standard_normal((100, dq[0]))
        assert rel_close(realize(net, xs), realize(phi, realize(psi, xs)), 1e-12)
    with pytest.raises(ShapeError):
        compose_networks(random_network(rng, (2, 3, 1)), random_network(rng, (1, 3, 3)))


def test_sum_examples_and_oracle(rng):
    idn = identity_network(1)
    two = sum_networks([idn, idn], [1.0, 1.0])
    assert two.dims == (1, 4, 1)
    x = rng.standard_normal((100, 1))
    np.testing.assert_allclose(realize(two, x), 2 * x, rtol=1e-15)
    assert not realize(sum_networks([idn, idn], [0.0, 0.0]), x).any()
    for _ in range(20):
        length = int(rng.integers(3, 6))
        ends = tuple(int(v) for v in rng.integers(1, 5, size=2))
        nets = [random_network(rng, random_dims(rng, length, ends)) for _ in range(3)]
        coeffs = rng.standard_normal(3)
        total = sum_networks(nets, coeffs)
        expected_dims = sum_dims(sum_dims(nets[0].dims, nets[1].dims), nets[2].dims)
        assert total.dims == expected_dims
        xs = rng.standard_normal((100, ends[0]))
        oracle = sum(c * realize(n, xs) for c, n in zip(coeffs, nets))
        assert rel_close(realize(total, xs), oracle, 1e-12)
    with pytest.raises(ShapeError):
        sum_networks([random_network(rng, (1, 2, 1)), random_network(rng, (1, 2, 2, 1))])


def test_extend_depth(rng):
    psi = random_network(rng, (2, 4, 1))
    assert extend_depth(psi, 3) is psi
    padded = extend_depth(mean_network(2), 5)
    assert padded.dims == (2, 4, 2, 2, 1)
    for target in (5, 6, 9):
        net = random_network(rng, (3, 5, 1))
        out = extend_depth(net, target)
        assert out.depth == target
        x = rng.standard_normal((100, 3))
        assert rel_close(realize(out, x), realize(net, x), 1e-12)
    with pytest.raises(ValueError):
        extend_depth(psi, 2)
    with pytest.raises(ValueError):
        extend_depth(psi, 4)


def test_mean_network():
    assert mean_network(3).dims == (3, 6, 1)
    assert realize(mean_network(3), np.array([1.0, 2.0, 6.0]))[0] == pytest.approx(3.0, rel=1e-15)
    assert realize(mean_network(4), np.array([-3.0, 3.0, 0.0, 0.0]))[0] == 0.0
    x = np.linspace(-5, 5, 101)[:, None]
    np.testing.assert_array_equal(realize(mean_network(1), x), x)
