import math

import numpy as np
import pytest

from blockshrink.model import (
    FUNCTION_NAMES,
    HolderClass,
    catalog,
    holder_seminorm,
    load_tree,
    make_bump,
    sample_observation,
    save_test_function,
    save_tree,
    two_point_pair,
)
from blockshrink.wavelets import CoefficientTree, build_basis


def brute_seminorm(f, alpha, h):
    k = math.ceil(alpha) - 1
    d = np.diff(f, n=k) / h**k if k else np.asarray(f)
    best = 0.0
    for i in range(len(d)):
        for j in range(i + 1, len(d)):
            best = max(best, abs(d[j] - d[i]) / ((j - i) * h) ** (alpha - k))
    return best


def test_holder_class():
    assert HolderClass(1.0, 2.0).k == 0
    assert HolderClass(1.5, 2.0).k == 1
    assert HolderClass(2.0, 2.0).k == 1
    assert HolderClass(1.0, 1.0).rate_exponent == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        HolderClass(0.0, 1.0)
    with pytest.raises(ValueError):
        HolderClass(1.0, -1.0)


def test_seminorm_constant_and_identity():
    x = np.linspace(0, 1, 513)
    assert holder_seminorm(np.full(513, 3.0), 0.5) == 0.0
    assert holder_seminorm(x, 0.4) == pytest.approx(1.0, abs=1e-12)


def test_seminorm_power():
    x = np.linspace(0, 1, 4097)
    assert holder_seminorm(2.5 * x**0.3, 0.3) == pytest.approx(2.5, rel=1e-3)


def test_seminorm_needs_points():
    with pytest.raises(ValueError):
        holder_seminorm([1.0, 2.0], 1.5)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
def test_seminorm_matches_brute_force(alpha):
    gen = np.random.default_rng(int(alpha * 10))
    f = np.cumsum(gen.normal(size=120)) / 10
    h = 1 / 119
    assert holder_seminorm(f, alpha) == pytest.approx(brute_seminorm(f, alpha, h), rel=1e-12)


@pytest.mark.parametrize("alpha,gap", [(0.5, 1.0), (1.0, 2.0), (1.5, 3.0)])
def test_bump(alpha, gap):
    g = make_bump(HolderClass(alpha, gap))
    assert abs(g.l2_norm_sq() - 1.0) < 1e-6
    xs = np.linspace(-1, 1, 101)
    assert np.all(g(xs) == g.plateau)
    assert g(np.array([g.half_width + 1e-9]))[0] == 0.0
    grid = np.linspace(-g.half_width, g.half_width, 601)
    assert brute_seminorm(g(grid), alpha, grid[1] - grid[0]) <= gap * (1 + 1e-3)


def test_bump_too_narrow():
    with pytest.raises(ValueError, match="too small"):
        make_bump(HolderClass(1.0, 0.5), A=1.05)


@pytest.fixture(scope="module")
def daub4():
    return build_basis("daub4")


def test_zero_and_constant(daub4):
    z = catalog("zero", HolderClass(1.0, 1.0), 8, daub4)
    assert not np.any(z.samples) and not np.any(z.true_tree.flat())
    c = catalog("constant", HolderClass(1.0, 1.0), 8, daub4, value=2.0)
    for j in c.true_tree.levels:
        assert np.max(np.abs(c.true_tree.level(j))) < 1e-12


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_cusp_decay(daub4, alpha):
    f = catalog("alpha_cusp", HolderClass(alpha, 1.0), 14, daub4)
    js = np.arange(4, 13)
    peaks = [np.abs(f.true_tree.level(j)).max() for j in js]
    slope = np.polyfit(js, np.log2(peaks), 1)[0]
    assert abs(slope + 0.5 + alpha) < 0.1


@pytest.mark.parametrize("name", [n for n in FUNCTION_NAMES if n != "two_point_bumped"])
def test_catalog_membership(daub4, name):
    f = catalog(name, HolderClass(1.0, 4.0), 8, daub4)
    assert f.membership_checked
    if name != "ramp":
        assert f.seminorm <= 4.0 * (1 + 1e-3)


def test_catalog_coefficients_stay_bounded(daub4):
    # level-wise decay bound: max_k |theta_jk| 2^{j(1/2 + alpha)} bounded over levels
    f = catalog("smooth_bump", HolderClass(1.0, 1.0), 12, daub4)
    scaled = [np.abs(f.true_tree.level(j)).max() * 2 ** (1.5 * j) for j in f.true_tree.levels]
    assert max(scaled) < 10 * max(scaled[:3])


def test_catalog_errors(daub4):
    with pytest.raises(ValueError, match="unknown"):
        catalog("sawtooth", HolderClass(1.0, 1.0), 8, daub4)
    with pytest.raises(ValueError, match="exceeds"):
        from blockshrink.model import make_test_function

        make_test_function("steep", lambda x: 50 * np.asarray(x), HolderClass(1.0, 1.0), 8, daub4)


def test_two_point_pair(daub4):
    cls = HolderClass(1.0, 10.0)
    f0 = catalog("zero", HolderClass(1.0, 1.0), 12, daub4)
    n, B = 4096, 64.0
    pair = two_point_pair(f0, 0.5, n, B, cls, 1.0)
    assert pair.base is f0
    assert pair.rho_n == pytest.approx(math.log(B), rel=1e-3)
    assert pair.gamma_n == pytest.approx((n / math.log(B)) ** (1 / 3))
    assert pair.bumped.seminorm <= 10.0 * (1 + 1e-3)
    # perturbation support
    reach = pair.bump.half_width / pair.beta_n
    x = np.linspace(0, 1, 20001)
    diff = pair.bumped.func(x) - f0.func(x)
    assert np.all(diff[np.abs(x - 0.5) > reach + 1e-12] == 0)


def test_two_point_errors(daub4):
    f0 = catalog("zero", HolderClass(1.0, 1.0), 10, daub4)
    with pytest.raises(ValueError, match="exits"):
        two_point_pair(f0, 0.5, 64, 2.0, HolderClass(1.0, 1.5), 1.0)
    with pytest.raises(ValueError):
        two_point_pair(f0, 0.5, 4096, 0.5, HolderClass(1.0, 10.0), 1.0)
    with pytest.raises(ValueError):
        two_point_pair(f0, 0.5, 4096, 8.0, HolderClass(1.0, 10.0), 20.0)


def test_observation_determinism_and_variance():
    tree = CoefficientTree.zeros(3, 14)
    a = sample_observation(tree, 100, 42)
    b = sample_observation(tree, 100, 42)
    assert np.array_equal(a.values.flat(), b.values.flat())
    v = a.values.flat()[:10000]
    se = 0.01 * math.sqrt(2 / len(v))
    assert abs(v.var(ddof=1) - 0.01) < 3 * se
    assert abs(np.mean(v * 10)) < 3 / math.sqrt(len(v))
    assert a.sigma2 == 0.01


def test_observation_prefix():
    tree = CoefficientTree.from_flat(3, 10, np.arange(1024.0))
    deep = sample_observation(tree, 50, 3, stream=2)
    shallow = sample_observation(tree.truncate(7), 50, 3, stream=2)
    assert np.array_equal(deep.values.truncate(7).flat(), shallow.values.flat())


def test_observation_rejects_bad_n():
    with pytest.raises(ValueError):
        sample_observation(CoefficientTree.zeros(3, 5), 0, 1)


def test_tree_round_trip(tmp_path, daub4):
    f = catalog("alpha_cusp", HolderClass(1.0, 1.0), 9, daub4)
    path = tmp_path / "cusp.txt"
    save_test_function(path, f)
    tree, header = load_tree(path)
    assert np.array_equal(tree.flat(), f.true_tree.flat())
    assert header["basis"] == "daub4" and header["function"] == "alpha_cusp"
    save_tree(tmp_path / "z.txt", CoefficientTree.zeros(2, 4), "haar")
    assert load_tree(tmp_path / "z.txt")[0].max_level == 4
