import numpy as np
from scipy import stats

from blockshrink import rng


def test_prefix_property():
    long = rng.standard_normal(5, 3, 1001)
    assert np.array_equal(rng.standard_normal(5, 3, 400), long[:400])


def test_streams_differ():
    assert not np.array_equal(rng.standard_normal(5, 0, 10), rng.standard_normal(5, 1, 10))


def test_reproducible():
    assert np.array_equal(rng.standard_normal(2**40 + 3, 7, 64), rng.standard_normal(2**40 + 3, 7, 64))


def test_uniforms_open_interval():
    u = rng.uniforms(1, 2, 100000)
    assert u.min() > 0 and u.max() < 1


def test_box_muller_by_hand():
    u = rng.uniforms(9, 4, 2)
    r = np.sqrt(-2 * np.log(u[0]))
    z = rng.standard_normal(9, 4, 2)
    assert np.allclose(z, [r * np.cos(2 * np.pi * u[1]), r * np.sin(2 * np.pi * u[1])], rtol=0, atol=0)


def test_gaussian_distribution():
    z = rng.standard_normal(123, 0, 200000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 4 / np.sqrt(len(z))
