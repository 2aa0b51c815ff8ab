import math

import numpy as np
import pytest
from scipy import optimize

from blockshrink.wavelets import (
    CoefficientTree,
    analyze,
    available_bases,
    build_basis,
    neighborhood_index_sets,
    restricted_norm_bounds,
    support_interval,
    synthesize,
    window_energy,
)


def daub4_by_root_finding():
    # orthonormality, unit DC gain and one vanishing moment of the high-pass
    def eqs(h):
        return [
            h.sum() - math.sqrt(2),
            np.dot(h, h) - 1,
            h[0] * h[2] + h[1] * h[3],
            -0 * h[3] + 1 * h[2] - 2 * h[1] + 3 * h[0],
        ]

    return optimize.fsolve(eqs, [0.5, 0.8, 0.2, -0.1], xtol=1e-14)


def test_haar_taps():
    spec = build_basis("haar", 3)
    assert np.allclose(spec.h, [1 / math.sqrt(2)] * 2, atol=1e-15)
    assert spec.support_mother == 1
    assert spec.regularity == 1


@pytest.mark.parametrize("bad", [-1, 1.5])
def test_bad_coarse_level(bad):
    with pytest.raises(ValueError, match="coarse level"):
        build_basis("haar", bad)


def test_unknown_family():
    with pytest.raises(ValueError, match="unknown"):
        build_basis("morlet")


def test_daub4_matches_root_finding():
    spec = build_basis("daub4", 3)
    h = spec.h
    assert abs(np.dot(h, h) - 1) < 1e-12
    assert abs(h[0] * h[2] + h[1] * h[3]) < 1e-12
    assert abs(h.sum() - math.sqrt(2)) < 1e-12
    assert np.allclose(h, daub4_by_root_finding(), atol=1e-10)


@pytest.mark.parametrize("name", available_bases())
def test_every_basis_is_orthonormal(name):
    spec = build_basis(name)
    assert spec.orthonormality_defect() < 1e-12
    # quadrature mirror: g[m] = (-1)^m h[N - m], so <h, g> = 0 and |g| = 1
    assert abs(np.dot(spec.h, spec.g)) < 1e-12
    assert abs(np.dot(spec.g, spec.g) - 1) < 1e-12
    moments = [np.dot(np.arange(spec.length) ** p, spec.g) for p in range(spec.regularity)]
    assert np.max(np.abs(moments)) < 1e-7


def test_coiflet_has_father_moments():
    spec = build_basis("coif2")
    assert spec.father_moments >= 1
    assert spec.regularity == 4


def test_constant_has_no_details():
    tree = analyze(np.ones(1024), build_basis("daub4"))
    for j in tree.levels:
        assert np.max(np.abs(tree.level(j))) < 1e-12


def test_father_samples_give_unit_coefficient():
    spec = build_basis("daub6", 3)
    coarse = np.zeros(8)
    coarse[5] = 1.0
    tree = CoefficientTree(3, 3, coarse, ())
    samples = synthesize(tree, spec, level=10)
    back = analyze(samples, spec, 10).truncate(3)
    expect = np.zeros(8)
    expect[5] = 1.0
    assert np.allclose(back.flat(), expect, atol=1e-12)


def test_parseval_and_round_trip():
    gen = np.random.default_rng(4)
    s = gen.normal(size=2048)
    spec = build_basis("daub8")
    tree = analyze(s, spec)
    assert abs(tree.energy() - np.mean(s**2)) < 1e-10
    assert np.max(np.abs(synthesize(tree, spec) - s)) < 1e-8


def test_zero_tree_synthesizes_to_zero():
    assert not np.any(synthesize(CoefficientTree.zeros(3, 9), build_basis("daub4")))


def test_single_detail_has_unit_norm():
    spec = build_basis("daub4")
    tree = CoefficientTree.zeros(3, 9).flat()
    tree[2**6 + 11] = 1.0
    s = synthesize(CoefficientTree.from_flat(3, 9, tree), spec)
    assert abs(np.mean(s**2) - 1.0) < 1e-10


@pytest.mark.parametrize("n", [12, 1000])
def test_analyze_rejects_bad_lengths(n):
    with pytest.raises(ValueError):
        analyze(np.zeros(n), build_basis("haar", 4))


def test_analyze_rejects_short_input():
    with pytest.raises(ValueError):
        analyze(np.zeros(4), build_basis("haar", 3))


def test_haar_support():
    assert support_interval(2, 1, build_basis("haar", 2)) == (0.25, 0.5)


def test_support_width_halves():
    spec = build_basis("daub6")
    lo, hi = support_interval(5, 3, spec)
    lo2, hi2 = support_interval(6, 3, spec)
    assert (hi2 - lo2) * 2 == hi - lo


def test_daub4_support_from_synthesized_wavelet():
    spec = build_basis("daub4")
    assert support_interval(4, 0, spec) == (0.0, 3 / 16)
    flat = np.zeros(2**4 * 2)
    tree = CoefficientTree.from_flat(3, 5, flat).flat()
    tree[16 + 2] = 1.0
    samples = synthesize(CoefficientTree.from_flat(3, 5, tree), spec, level=14)
    nz = np.flatnonzero(np.abs(samples) > 1e-9)
    width = (nz[-1] - nz[0] + 1) / 2**14
    assert abs(width - 3 / 16) <= 2 / 2**14
    assert abs(nz[0] / 2**14 - 2 / 16) <= 2 / 2**14


def test_whole_window_gives_every_index():
    spec = build_basis("daub4")
    sets = neighborhood_index_sets((0.0, 1.0), 3, 7, spec)
    for j in range(3, 7):
        assert len(sets.inside.at(j)) == 2**j
        assert len(sets.touching.at(j)) == 2**j


def test_haar_quarter_window():
    sets = neighborhood_index_sets((0.25, 0.5), 2, 3, build_basis("haar", 2))
    assert sets.inside.pairs() == {(2, 1)}
    assert sets.touching.pairs() == {(2, 0), (2, 1), (2, 2)}


def brute_force_sets(a, b, j_lo, j_hi, spec):
    inside, touching = set(), set()
    for j in range(j_lo, j_hi):
        for k in range(2**j):
            lo, hi = support_interval(j, k, spec)
            pieces = [(lo, min(hi, 1.0))] + ([(0.0, hi - 1.0)] if hi > 1 else [])
            if any(p <= b and q >= a for p, q in pieces):
                touching.add((j, k))
            if hi <= 1 and lo >= a and hi <= b:
                inside.add((j, k))
    return inside, touching


@pytest.mark.parametrize("seed", range(6))
def test_index_sets_match_brute_force(seed):
    gen = np.random.default_rng(seed)
    x0, c = gen.uniform(0.1, 0.9), gen.uniform(0.005, 0.1)
    a, b = max(0.0, x0 - c), min(1.0, x0 + c)
    spec = build_basis("daub4")
    sets = neighborhood_index_sets((a, b), 3, 10, spec)
    inside, touching = brute_force_sets(a, b, 3, 10, spec)
    assert sets.touching.pairs() == touching
    assert sets.inside.pairs() == inside


def test_card_h_bound():
    spec = build_basis("daub4")
    for c in (0.002, 0.01, 0.05, 0.2):
        sets = neighborhood_index_sets((0.5 - c, 0.5 + c), 3, 12, spec)
        for j in range(3, 12):
            card = len(sets.per_level(j))
            assert card <= math.floor(2 ** (j + 1) * c) + spec.support_mother + 1
            if 2**j * c < 1:
                assert card <= 2 * spec.support_mother


def test_index_set_errors():
    spec = build_basis("haar", 3)
    with pytest.raises(ValueError):
        neighborhood_index_sets((0.1, 0.2), 2, 5, spec)
    with pytest.raises(ValueError):
        neighborhood_index_sets((0.1, 0.2), 5, 5, spec)


def test_restricted_norm_trivia():
    spec = build_basis("daub4")
    assert restricted_norm_bounds(CoefficientTree.zeros(3, 8), (0.2, 0.4), spec) == (0.0, 0.0)
    gen = np.random.default_rng(1)
    tree = CoefficientTree.from_flat(3, 8, gen.normal(size=256))
    lo, hi = restricted_norm_bounds(tree, (0.0, 1.0), spec)
    details = tree.details_only().energy()
    assert lo == pytest.approx(details) and hi == pytest.approx(details)


@pytest.mark.parametrize("name", ["haar", "daub4"])
def test_sandwich_on_random_trees(name):
    spec = build_basis(name)
    gen = np.random.default_rng(11)
    for _ in range(25):
        tree = CoefficientTree.from_flat(3, 8, gen.normal(size=256))
        x0, c = gen.uniform(0.05, 0.95), gen.uniform(0.01, 0.5)
        win = (max(0.0, x0 - c), min(1.0, x0 + c))
        lo, hi = restricted_norm_bounds(tree, win, spec)
        val = window_energy(tree, win, spec)
        assert lo - 1e-6 <= val <= hi + 1e-6
