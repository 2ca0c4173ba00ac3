import math

import numpy as np
import pytest
from scipy import integrate, stats

from mlpdnn.randomness import (
    KeyedStream,
    RandomRealization,
    arcsine_cdf,
    brownian_increment,
    derive_stream,
    rho_density,
    sample_time_fraction,
    time_fraction_from_uniform,
    time_point,
)

N_STAT = 100_000


def gaussian_sample(seed, d, n):
    return np.stack([KeyedStream(seed, (k,)).draws(d)[1] for k in range(n)])


def test_stream_is_deterministic():
    a = derive_stream(7, (3, -1, 4)).uniforms(100)
    b = derive_stream(7, (3, -1, 4)).uniforms(100)
    assert np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))


def test_prefix_free_encoding():
    a = derive_stream(0, (1,)).uniforms(16)
    b = derive_stream(0, (1, 1)).uniforms(16)
    c = derive_stream(0, (1, 0)).uniforms(16)
    assert not np.array_equal(a, b) and not np.array_equal(b, c)
    assert not np.array_equal(derive_stream(0, (1,)).uniforms(8), derive_stream(1, (1,)).uniforms(8))


def test_cross_stream_correlation_small():
    x = derive_stream(11, (5, 2)).uniforms(10_000)
    y = derive_stream(11, (5, 3)).uniforms(10_000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.05


def test_query_order_does_not_matter():
    thetas = [(k, -k, 2) for k in range(30)]
    first = RandomRealization(3, 4)
    vals = {th: first.draws(th) for th in thetas}
    rng = np.random.default_rng(0)
    second = RandomRealization(3, 4, cache=False)
    for i in rng.permutation(len(thetas)):
        th = thetas[i]
        u, xi = second.draws(th)
        assert u == vals[th][0] and np.array_equal(xi, vals[th][1])
    assert len(second) == 0 and len(first) == 30


def test_increment_scaling_and_errors():
    real = RandomRealization(5, 3)
    inc = real.increment((1, 2), 0.25, 1.0)
    np.testing.assert_array_equal(inc, 0.75**0.5 * real.gaussian((1, 2)))
    np.testing.assert_array_equal(brownian_increment(5, (1, 2), 3, 0.25, 1.0), inc)
    with pytest.raises(ValueError):
        brownian_increment(5, (1,), 3, 1.0, 1.0)
    with pytest.raises(ValueError):
        real.increment((1,), 0.5, 0.2)
    with pytest.raises(ValueError):
        RandomRealization(-1, 2)


def test_gaussian_moments():
    s, t = 0.2, 0.7
    z = gaussian_sample(2024, 3, N_STAT) * math.sqrt(t - s)
    assert np.all(np.abs(z.mean(axis=0)) <= 3 * math.sqrt((t - s) / N_STAT))
    assert np.all(np.abs(z.var(axis=0) / (t - s) - 1) <= 0.05)


def test_time_fraction_inverse_values():
    assert time_fraction_from_uniform(0.5) == pytest.approx(0.5, abs=1e-15)
    assert time_fraction_from_uniform(1 / 3) == pytest.approx(0.25, abs=1e-15)
    for u in np.linspace(0.01, 0.99, 50):
        assert arcsine_cdf(time_fraction_from_uniform(u)) == pytest.approx(u, abs=1e-12)


def test_arcsine_ks():
    sample = np.array([sample_time_fraction(99, (k, 7)) for k in range(N_STAT)])
    ks = stats.kstest(sample, arcsine_cdf).statistic
    assert ks < 1.95 / math.sqrt(N_STAT)


def test_time_point():
    assert time_point(0.0, 1.0, 0.25) == 0.25
    assert time_point(0.5, 1.0, 0.5) == 0.75
    pts = [time_point(0.1, 2.0, f) for f in np.linspace(0.01, 0.99, 40)]
    assert np.all(np.diff(pts) > 0) and 0.1 < pts[0] and pts[-1] < 2.0
    with pytest.raises(ValueError):
        time_point(1.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        time_point(0.0, 1.0, 1.0)


def test_rho_density():
    assert rho_density(0.0, 0.5, 1.0) == pytest.approx(2 / math.pi, rel=1e-15)
    assert rho_density(0.0, 1e-8, 1.0) > 1e3
    with pytest.raises(ValueError):
        rho_density(0.0, 1.0, 1.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        t = rng.uniform(0, 1)
        T = t + rng.uniform(0.1, 2)
        val, _ = integrate.quad(lambda s: rho_density(t, s, T), t, T, limit=200)
        assert val == pytest.approx(1.0, abs=1e-6)
