import math

import numpy as np
import pytest
from scipy import integrate, stats

from blockshrink import estimators as est
from blockshrink import risk as rk
from blockshrink.model import HolderClass, catalog, sample_observation
from blockshrink.runner import oracle_configs
from blockshrink.wavelets import build_basis, restricted_norm_bounds, synthesize, window_integral


@pytest.fixture(scope="module")
def daub4():
    return build_basis("daub4")


@pytest.fixture(scope="module")
def cusp(daub4):
    return catalog("alpha_cusp", HolderClass(1.0, 1.0), 10, daub4)


def overlap_weights(n_cells, a, b):
    w = np.zeros(n_cells)
    for i in range(n_cells):
        lo, hi = i / n_cells, (i + 1) / n_cells
        w[i] = max(0.0, min(b, hi) - max(a, lo))
    return w


def test_identity_and_zero_oracles(daub4, cusp):
    nb = rk.NeighborhoodSpec(0.4, 0.1)
    assert rk.neighborhood_risk("identity", cusp, nb, 1024, 5, 1).mean == 0.0
    zero_f = catalog("zero", HolderClass(1.0, 1.0), 10, daub4)
    r = rk.neighborhood_risk("zero", zero_f, nb, 1024, 5, 1)
    assert r.mean == 0.0 and r.stderr == 0.0
    r = rk.neighborhood_risk("zero", cusp, nb, 1024, 5, 1)
    a, b = nb.window()
    vals = synthesize(cusp.true_tree, daub4) ** 2
    direct = float(np.dot(overlap_weights(len(vals), a, b), vals)) / (b - a)
    assert abs(r.mean - direct) < 1e-10
    assert r.stderr == 0.0


def test_risk_needs_two_reps(cusp):
    with pytest.raises(ValueError):
        rk.neighborhood_risk("blockjs", cusp, rk.NeighborhoodSpec(0.5, 0.1), 1024, 1, 0)


def test_unknown_estimator(cusp):
    with pytest.raises(ValueError, match="unknown estimator"):
        rk.neighborhood_risk("median", cusp, rk.NeighborhoodSpec(0.5, 0.1), 1024, 2, 0)


def test_neighborhood_validation():
    with pytest.raises(ValueError):
        rk.NeighborhoodSpec(0.0, 0.1)
    with pytest.raises(ValueError):
        rk.NeighborhoodSpec(0.5, 0.6)
    nb = rk.NeighborhoodSpec(0.05, 0.1)
    assert nb.clamped and nb.window() == (0.0, pytest.approx(0.15))


def test_uniform_kernel_equals_neighborhood_risk(cusp):
    nb = rk.NeighborhoodSpec(0.45, 0.08)
    plain = rk.neighborhood_risk("blockjs", cusp, nb, 2048, 6, 3)
    weighted = rk.weighted_risk("blockjs", cusp, nb.with_kernel("uniform"), 2048, 6, 3)
    assert plain.losses == weighted.losses


def test_bad_kernel_rejected():
    half = rk.Kernel("half", lambda u: 0.25 * (np.abs(np.asarray(u)) <= 1))
    with pytest.raises(ValueError, match="integrates"):
        rk.NeighborhoodSpec(0.5, 0.1, half)
    with pytest.raises(ValueError):
        rk.weighted_risk("zero", None, rk.NeighborhoodSpec(0.5, 0.1), 1024, 2, 0)


@pytest.mark.parametrize("name", ["triangular", "epanechnikov"])
def test_kernel_weighted_bias_matches_quadrature(daub4, name):
    f = catalog("smooth_bump", HolderClass(1.0, 1.0), 8, daub4)
    kernel = rk.KERNELS[name]
    nb = rk.NeighborhoodSpec(0.47, 0.11, kernel)
    r = rk.weighted_risk("zero", f, nb, 1024, 3, 0)
    vals = synthesize(f.true_tree, daub4) ** 2
    N = len(vals)
    oracle = 0.0
    for i in range(N):
        lo, hi = i / N, (i + 1) / N
        if hi < nb.x0 - nb.c_n or lo > nb.x0 + nb.c_n:
            continue
        m, _ = integrate.quad(lambda x: float(kernel.pdf((x - nb.x0) / nb.c_n)) / nb.c_n, lo, hi,
                              epsabs=1e-14)
        oracle += m * vals[i]
    assert abs(r.mean - oracle) < 1e-8


def test_kernel_masses_sum_to_one():
    for kernel in rk.KERNELS.values():
        kernel.validate()
        assert kernel.cell_masses(4096, 0.5, 0.1).sum() == pytest.approx(1.0, abs=1e-12)


def test_reproducible_and_thread_independent(cusp):
    nb = rk.NeighborhoodSpec(0.5, 0.2)
    a = rk.neighborhood_risk("hybrid", cusp, nb, 1024, 8, 99, threads=1)
    b = rk.neighborhood_risk("hybrid", cusp, nb, 1024, 8, 99, threads=4)
    assert a == b
    assert (a.mean, a.stderr) == (b.mean, b.stderr)


def test_aggregate_is_order_independent():
    gen = np.random.default_rng(0)
    x = list(gen.lognormal(size=500) * 1e-3)
    m1, s1 = rk._aggregate(x)
    m2, s2 = rk._aggregate(list(reversed(x)))
    m3, s3 = rk._aggregate(sorted(x))
    assert m1 == m2 == m3 and s1 == s2 == s3


def test_losses_respect_restricted_norm_sandwich(daub4, cusp):
    # the window integral used by the risk engine against the error tree's sandwich
    nb = rk.NeighborhoodSpec(0.37, 0.06)
    a, b = nb.window()
    for r in range(20):
        obs = sample_observation(cusp.true_tree, 1024, 5, stream=r)
        err = (est.block_js(obs) - cusp.true_tree).details_only()
        integral = window_integral(synthesize(err, daub4) ** 2, a, b)
        lo, hi = restricted_norm_bounds(err, (a, b), daub4)
        assert lo - 1e-12 <= integral <= hi + 1e-12


def test_rate_fit_examples():
    ns = [2**k for k in range(10, 17)]
    fit = rk.rate_fit([(n, 3.0 * n ** (-2 / 3)) for n in ns])
    assert abs(fit.slope + 2 / 3) < 1e-12 and fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rk.rate_fit([(1024, 0.1), (2048, 0.05)])
    with pytest.raises(ValueError):
        rk.rate_fit([(1024, 0.1), (2048, 0.0), (4096, 0.01)])
    gen = np.random.default_rng(3)
    noisy = rk.rate_fit([(n, n ** -0.8 * math.exp(0.05 * gen.normal())) for n in ns])
    lo, hi = noisy.confidence_band()
    assert lo <= -0.8 <= hi


def test_oracle_bound_examples():
    lam = est.LAMBDA_STAR
    assert rk.oracle_bound(np.zeros(10), lam, 10, 1.0, "standard") == pytest.approx(2 * lam * math.exp(-10))
    big = np.full(10, 100.0)
    assert rk.oracle_bound(big, lam, 10, 1.0, "standard") == pytest.approx(lam * 10 + 2 * lam * math.exp(-10))
    # at lambda_* the two exponents coincide
    theta = np.full(5, 0.7)
    assert rk.oracle_bound(theta, lam, 5, 1.0, "general") == pytest.approx(rk.oracle_bound(theta, lam, 5, 1.0, "standard"))
    assert rk.oracle_bound(theta, lam, 5, 1.0, "bounded", c=0.7) == pytest.approx(8 * 0.49 + 2 * lam * math.exp(-5))
    with pytest.raises(ValueError):
        rk.oracle_bound(theta, lam, 5, 1.0, "bounded")
    with pytest.raises(ValueError):
        rk.oracle_bound(theta, 0.5, 5, 1.0)


def test_block_risk_below_bound():
    lam = est.LAMBDA_STAR
    for i, theta in enumerate(oracle_configs(10)):
        m, se = rk.block_total_risk_mc(theta, lam, 1.0, 4000, 500 + i)
        assert m <= rk.oracle_bound(theta, lam, 10, 1.0, "standard") + 3 * se


def test_truncated_second_moment():
    for theta in (0.0, 0.7, -2.0):
        assert rk.truncated_second_moment(theta, 0.0) == pytest.approx(1 + theta**2, abs=1e-12)
    assert rk.truncated_second_moment(0.0, 8.0) < 1e-12
    for theta, c in ((0.3, 1.0), (2.0, 0.5), (-1.0, 3.0)):
        q, _ = integrate.quad(lambda y: y * y * stats.norm.pdf(y - theta), c, np.inf, epsabs=1e-13)
        q2, _ = integrate.quad(lambda y: y * y * stats.norm.pdf(y - theta), -np.inf, -c, epsabs=1e-13)
        assert rk.truncated_second_moment(theta, c) == pytest.approx(q + q2, abs=1e-10)
    grid = np.arange(21) * 0.25
    for c in (0.5, 1, 2, 4):
        vals = [rk.truncated_second_moment(t, c) for t in grid]
        assert np.all(np.diff(vals) >= -1e-10)
    with pytest.raises(ValueError):
        rk.truncated_second_moment(0.0, -1.0)


def test_d_sequences():
    n = 4096
    assert rk.d_sequence("constant", 2.0, n, 1.0) == 2.0
    assert rk.d_sequence("log_root", 1.0, n, 1.0) == pytest.approx(math.log(n) ** (1 / 3))
    assert rk.d_sequence("log", 1.0, n, 1.0) == pytest.approx(math.log(n))
    lo, mid, hi = (rk.d_sequence(k, 1.0, n, 1.0) for k in ("log_root", "log_mid", "log"))
    assert lo < mid < hi
    with pytest.raises(ValueError):
        rk.d_sequence("cubic", 1.0, n, 1.0)
    c_n, d_n = rk.window_half_width("constant", 1.0, 4096, 1.0)
    assert c_n == pytest.approx(4096 ** (-1 / 3))


def test_superefficiency_errors():
    spec = build_basis("coif2", 0)
    cls = HolderClass(1.0, 10.0)
    with pytest.raises(ValueError, match="at least 3"):
        rk.superefficiency_experiment("case_i", cls, 1.0, 0.5, "constant", 1.0, [4096], 10, 0, spec)
    with pytest.raises(ValueError, match="does not match"):
        rk.superefficiency_experiment("case_i", cls, 1.0, 0.5, "log", 1.0, [1024, 2048, 4096], 10, 0, spec)
    with pytest.raises(ValueError, match="unknown regime"):
        rk.superefficiency_experiment("case_x", cls, 1.0, 0.5, "log", 1.0, [1024, 2048, 4096], 10, 0, spec)


def test_superefficiency_case_i_is_faster_than_minimax_at_zero():
    spec = build_basis("coif2", 0)
    rep = rk.superefficiency_experiment("case_i", HolderClass(1.0, 10.0), 1.0, 0.5, "constant", 1.0,
                                        [2**k for k in range(10, 15)], 1500, 11, spec)
    assert rep.f0_fit is not None
    assert rep.f0_fit.slope < rep.minimax_slope - 0.2
    assert all(r.risk_alt.mean > r.risk_f0.mean for r in rep.rows)


def test_whole_window_loss_matches_synthesis_quadrature():
    spec = build_basis("daub4")
    f = catalog("alpha_cusp", HolderClass(1.0, 1.0), 12, spec)
    rep = rk.neighborhood_risk("blockjs", f, rk.NeighborhoodSpec(0.5, 0.5), 1024, 3, 8)
    for r in range(3):
        out = est.block_js(sample_observation(f.true_tree, 1024, 8, stream=r))
        err = synthesize(out.extend(12) - f.true_tree, spec)
        assert rep.losses[r] == pytest.approx(np.mean(err**2), rel=1e-10)
