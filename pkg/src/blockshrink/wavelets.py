"""Periodized orthonormal wavelets on [0, 1].

Conventions used throughout the package:

* low-pass taps ``h[0..N]`` with ``phi(x) = sqrt(2) * sum_m h[m] phi(2x - m)``,
  so ``supp(phi) = supp(psi) = [0, N]`` and ``psi_{j,k}`` lives on
  ``[k 2^-j, (k + N) 2^-j]`` taken modulo 1;
* sample vectors of length ``2^J`` are function values on the dyadic grid, and
  the finest scaling coefficients are ``2^{-J/2}`` times the samples, so the
  coefficient energy equals the discrete squared norm ``mean(samples**2)``;
* sample ``i`` stands for the grid cell ``[i 2^-J, (i + 1) 2^-J)`` when
  integrating over windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Literal

import numpy as np

__all__ = [
    "WaveletSpec",
    "CoefficientTree",
    "IndexSet",
    "NeighborhoodSets",
    "build_basis",
    "available_bases",
    "analyze",
    "synthesize",
    "scaling_coefficients",
    "support_interval",
    "neighborhood_index_sets",
    "restricted_norm_bounds",
    "cell_weights",
    "window_integral",
    "window_energy",
]

ORTHO_TOL = 1e-12

# Coiflet taps in the h[0..N] ordering; polished so that orthonormality and
# the moment conditions hold to well below double precision.
_COIFLETS = {
    1: (
        -0.072732619512526448024,
        0.33789766245748176967,
        0.85257202021160042045,
        0.38486484686485774725,
        -0.072732619512526448024,
        -0.015655728135791992526,
    ),
    2: (
        0.016387336463203640427,
        -0.04146493678687177401,
        -0.067372554723725593805,
        0.38611006682276285042,
        0.81272363544941349534,
        0.41700518442323904805,
        -0.076488599078280754278,
        -0.059434418646431087307,
        0.023680171946847768806,
        0.0056114348193688342456,
        -0.0018232088709110320946,
        -0.00072054944552034699507,
    ),
}


@lru_cache(maxsize=None)
def _daubechies_taps(p: int) -> tuple[float, ...]:
    """Minimum-phase Daubechies filter with ``p`` vanishing moments."""
    if p == 1:
        return (1 / math.sqrt(2), 1 / math.sqrt(2))
    # |m0|^2 = cos^{2p}(w/2) P(sin^2(w/2)); factor P by its roots in y = sin^2(w/2).
    coeffs = [math.comb(p - 1 + k, k) for k in range(p)]
    y_roots = np.roots(coeffs[::-1])
    z_roots = []
    for y in y_roots:
        # y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
        pair = np.roots([1.0, -(2.0 - 4.0 * y), 1.0])
        z_roots.append(pair[np.argmin(np.abs(pair))])
    poly = np.poly(z_roots)
    for _ in range(p):
        poly = np.convolve(poly, [1.0, 1.0])
    taps = np.real(poly)
    taps = taps * (math.sqrt(2) / taps.sum())
    return tuple(float(t) for t in taps)


_FAMILIES = {
    "haar": ("daubechies", 1),
    "daub4": ("daubechies", 2),
    "daub6": ("daubechies", 3),
    "daub8": ("daubechies", 4),
    "daub10": ("daubechies", 5),
    "coif1": ("coiflet", 1),
    "coif2": ("coiflet", 2),
}


def available_bases() -> list[str]:
    return list(_FAMILIES)


@dataclass(frozen=True)
class WaveletSpec:
    """An orthonormal compactly supported filter pair plus metadata.

    ``regularity`` counts the vanishing moments of psi; ``father_moments``
    counts the vanishing moments ``int (x - c)^l phi = 0, l = 1..`` about the
    centre ``c = int x phi`` (zero except for Coiflets).
    """

    name: str
    low_pass: tuple[float, ...]
    support_father: int
    support_mother: int
    regularity: int
    coarse_level: int
    father_moments: int = 0

    @property
    def h(self) -> np.ndarray:
        return np.asarray(self.low_pass)

    @property
    def g(self) -> np.ndarray:
        h = self.h
        n = len(h) - 1
        return np.array([(-1) ** m * h[n - m] for m in range(n + 1)])

    @property
    def length(self) -> int:
        return len(self.low_pass)

    @property
    def centre(self) -> float:
        """First moment of phi; the natural sampling offset in grid cells."""
        h = self.h
        return float(np.dot(np.arange(len(h)), h) / math.sqrt(2))

    def orthonormality_defect(self) -> float:
        h = self.h
        worst = abs(h.sum() - math.sqrt(2))
        for m in range(len(h) // 2 + 1):
            target = 1.0 if m == 0 else 0.0
            worst = max(worst, abs(np.dot(h[: len(h) - 2 * m], h[2 * m :]) - target))
        return float(worst)


def build_basis(name: str, coarse_level: int = 3) -> WaveletSpec:
    """Return the named wavelet family with the requested coarse level j0.

    Raises ``ValueError`` for an unknown name, a negative coarse level, or
    taps that fail the orthonormality check.
    """
    key = name.lower()
    if key not in _FAMILIES:
        raise ValueError(f"unknown wavelet family {name!r}; choose from {available_bases()}")
    if int(coarse_level) != coarse_level or coarse_level < 0:
        raise ValueError(f"invalid coarse level {coarse_level!r}: must be an integer >= 0")
    kind, order = _FAMILIES[key]
    if kind == "daubechies":
        taps = _daubechies_taps(order)
        regularity, father = order, 0
    else:
        taps = _COIFLETS[order]
        regularity, father = 2 * order, 2 * order - 1
    n = len(taps) - 1
    spec = WaveletSpec(
        name=key,
        low_pass=taps,
        support_father=n,
        support_mother=n,
        regularity=regularity,
        coarse_level=int(coarse_level),
        father_moments=father,
    )
    defect = spec.orthonormality_defect()
    if defect > ORTHO_TOL:
        raise ValueError(f"filter {name!r} fails orthonormality check (defect {defect:.2e})")
    return spec


def _freeze(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CoefficientTree:
    """Coarse coefficients at level j0 and details for j0 <= j < max_level.

    Positions are 0-based: level j stores ``detail[j - j0][k]`` for
    ``0 <= k < 2^j``.
    """

    coarse_level: int
    max_level: int
    coarse: np.ndarray
    detail: tuple[np.ndarray, ...]

    def __post_init__(self):
        j0, jmax = self.coarse_level, self.max_level
        if jmax < j0:
            raise ValueError(f"max_level {jmax} below coarse level {j0}")
        object.__setattr__(self, "coarse", _freeze(self.coarse))
        object.__setattr__(self, "detail", tuple(_freeze(d) for d in self.detail))
        if self.coarse.shape != (2**j0,):
            raise ValueError(f"coarse block must have {2**j0} entries, got {self.coarse.shape}")
        if len(self.detail) != jmax - j0:
            raise ValueError(f"expected {jmax - j0} detail levels, got {len(self.detail)}")
        for j, d in zip(range(j0, jmax), self.detail):
            if d.shape != (2**j,):
                raise ValueError(f"level {j} must have {2**j} entries, got {d.shape}")
        if not (np.all(np.isfinite(self.coarse)) and all(np.all(np.isfinite(d)) for d in self.detail)):
            raise ValueError("coefficient tree contains non-finite values")

    @classmethod
    def zeros(cls, coarse_level: int, max_level: int) -> "CoefficientTree":
        return cls(
            coarse_level,
            max_level,
            np.zeros(2**coarse_level),
            tuple(np.zeros(2**j) for j in range(coarse_level, max_level)),
        )

    @classmethod
    def from_flat(cls, coarse_level: int, max_level: int, values) -> "CoefficientTree":
        values = np.asarray(values, dtype=float)
        if values.shape != (2**max_level,):
            raise ValueError(f"flat vector must have {2**max_level} entries")
        coarse = values[: 2**coarse_level]
        detail = tuple(values[2**j : 2 ** (j + 1)] for j in range(coarse_level, max_level))
        return cls(coarse_level, max_level, coarse, detail)

    def flat(self) -> np.ndarray:
        """Level-ordered vector: coarse block, then levels j0, j0+1, ..."""
        return np.concatenate((self.coarse, *self.detail))

    def level(self, j: int) -> np.ndarray:
        if not self.coarse_level <= j < self.max_level:
            raise IndexError(f"level {j} outside [{self.coarse_level}, {self.max_level})")
        return self.detail[j - self.coarse_level]

    @property
    def levels(self) -> range:
        return range(self.coarse_level, self.max_level)

    def truncate(self, max_level: int) -> "CoefficientTree":
        """Keep levels below ``max_level`` (the projection onto V_{max_level})."""
        if not self.coarse_level <= max_level <= self.max_level:
            raise ValueError(f"cannot truncate to level {max_level}")
        return CoefficientTree(
            self.coarse_level, max_level, self.coarse, self.detail[: max_level - self.coarse_level]
        )

    def extend(self, max_level: int) -> "CoefficientTree":
        """Pad with zero detail levels up to ``max_level``."""
        if max_level < self.max_level:
            raise ValueError(f"cannot extend to a shallower level {max_level}")
        extra = tuple(np.zeros(2**j) for j in range(self.max_level, max_level))
        return CoefficientTree(self.coarse_level, max_level, self.coarse, self.detail + extra)

    def details_only(self) -> "CoefficientTree":
        return CoefficientTree(self.coarse_level, self.max_level, np.zeros_like(self.coarse), self.detail)

    def energy(self) -> float:
        return float(np.sum(self.flat() ** 2))

    def _check_shape(self, other: "CoefficientTree") -> None:
        if (self.coarse_level, self.max_level) != (other.coarse_level, other.max_level):
            raise ValueError("coefficient trees have different level ranges")

    def __sub__(self, other: "CoefficientTree") -> "CoefficientTree":
        self._check_shape(other)
        return CoefficientTree.from_flat(self.coarse_level, self.max_level, self.flat() - other.flat())

    def __add__(self, other: "CoefficientTree") -> "CoefficientTree":
        self._check_shape(other)
        return CoefficientTree.from_flat(self.coarse_level, self.max_level, self.flat() + other.flat())

    def scaled(self, factor: float) -> "CoefficientTree":
        return CoefficientTree.from_flat(self.coarse_level, self.max_level, factor * self.flat())


def _check_length(m: int, j0: int) -> int:
    if m < 1 or m & (m - 1):
        raise ValueError(f"sample count {m} is not a power of two")
    jmax = m.bit_length() - 1
    if jmax < j0:
        raise ValueError(f"sample count {m} is below 2^j0 = {2**j0}")
    return jmax


def _analysis_step(a: np.ndarray, h: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = len(a)
    base = np.arange(0, m, 2)
    low = np.zeros(m // 2)
    high = np.zeros(m // 2)
    for tap in range(len(h)):
        vals = a[(base + tap) % m]
        low += h[tap] * vals
        high += g[tap] * vals
    return low, high


def _synthesis_step(low: np.ndarray, high: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    m = 2 * len(low)
    base = np.arange(0, m, 2)
    out = np.zeros(m)
    for tap in range(len(h)):
        # indices are distinct for a fixed tap, so fancy-index accumulation is safe
        out[(base + tap) % m] += h[tap] * low + g[tap] * high
    return out


def analyze(samples, spec: WaveletSpec, J_max: int | None = None) -> CoefficientTree:
    """Periodized forward transform of ``2^J_max`` grid samples down to level j0."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    jmax = _check_length(len(s), spec.coarse_level)
    if J_max is not None and J_max != jmax:
        raise ValueError(f"J_max={J_max} inconsistent with {len(s)} samples")
    h, g = spec.h, spec.g
    a = s * 2.0 ** (-jmax / 2)
    details = []
    for _ in range(jmax, spec.coarse_level, -1):
        a, d = _analysis_step(a, h, g)
        details.append(d)
    return CoefficientTree(spec.coarse_level, jmax, a, tuple(reversed(details)))


def scaling_coefficients(tree: CoefficientTree, spec: WaveletSpec, level: int) -> np.ndarray:
    """Scaling coefficients <f, phi_{level,k}> rebuilt from the coarse block and
    the details below ``level``."""
    if tree.coarse_level != spec.coarse_level:
        raise ValueError("tree coarse level does not match the basis")
    if not tree.coarse_level <= level <= tree.max_level:
        raise ValueError(f"level {level} outside [{tree.coarse_level}, {tree.max_level}]")
    h, g = spec.h, spec.g
    a = np.array(tree.coarse)
    for j in range(tree.coarse_level, level):
        a = _synthesis_step(a, tree.level(j), h, g)
    return a


def synthesize(tree: CoefficientTree, spec: WaveletSpec, level: int | None = None) -> np.ndarray:
    """Inverse transform to grid samples.

    With ``level`` above ``tree.max_level`` the missing details are taken as
    zero, which evaluates the same expansion on a finer grid.
    """
    if tree.coarse_level != spec.coarse_level:
        raise ValueError(
            f"tree coarse level {tree.coarse_level} does not match basis j0={spec.coarse_level}"
        )
    level = tree.max_level if level is None else level
    if level < tree.max_level:
        raise ValueError("synthesis level below the tree depth")
    a = scaling_coefficients(tree.extend(level), spec, level)
    return a * 2.0 ** (level / 2)


def support_interval(
    j: int, k: int, spec: WaveletSpec, kind: Literal["father", "mother"] = "mother"
) -> tuple[float, float]:
    """Support ``[k 2^-j, (k + N) 2^-j]``; the right end may exceed 1 and is
    read modulo 1. Endpoints are dyadic and exact in binary floating point."""
    if j < spec.coarse_level or not 0 <= k < 2**j:
        raise ValueError(f"invalid index (j={j}, k={k}) for j0={spec.coarse_level}")
    n = spec.support_father if kind == "father" else spec.support_mother
    scale = 2.0**-j
    return k * scale, (k + n) * scale


@dataclass(frozen=True)
class IndexSet:
    """Set of (j, k) pairs stored as sorted position arrays per level."""

    levels: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for j, ks in self.levels.items():
            arr = np.unique(np.asarray(ks, dtype=np.int64))
            if len(arr) and (arr[0] < 0 or arr[-1] >= 2**j):
                raise ValueError(f"position out of range at level {j}")
            arr.setflags(write=False)
            clean[int(j)] = arr
        object.__setattr__(self, "levels", clean)

    def __len__(self) -> int:
        return int(sum(len(v) for v in self.levels.values()))

    def __contains__(self, item) -> bool:
        j, k = item
        ks = self.levels.get(j)
        return ks is not None and bool(np.any(ks == k))

    def __iter__(self) -> Iterator[tuple[int, int]]:
        for j in sorted(self.levels):
            for k in self.levels[j]:
                yield j, int(k)

    def at(self, j: int) -> np.ndarray:
        return self.levels.get(j, np.zeros(0, dtype=np.int64))

    def pairs(self) -> set[tuple[int, int]]:
        return set(self)

    def issubset(self, other: "IndexSet") -> bool:
        return self.pairs() <= other.pairs()

    def union(self, other: "IndexSet") -> "IndexSet":
        keys = set(self.levels) | set(other.levels)
        return IndexSet({j: np.concatenate((self.at(j), other.at(j))) for j in keys})


@dataclass(frozen=True)
class NeighborhoodSets:
    inside: IndexSet
    touching: IndexSet

    def per_level(self, j: int) -> np.ndarray:
        """H_j: positions at level j whose support meets the window."""
        return self.touching.at(j)


def _window(nb) -> tuple[float, float]:
    if hasattr(nb, "window"):
        return nb.window()
    a, b = nb
    return float(a), float(b)


def _level_masks(j: int, n_support: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(2**j)
    lo = k * 2.0**-j
    hi = (k + n_support) * 2.0**-j
    if b - a >= 1.0:
        full = np.ones(len(k), dtype=bool)
        return full, full
    inside = (lo >= a) & (hi <= b)
    touching = ((lo <= b) & (hi >= a)) | (hi - 1.0 >= a)
    return inside, touching


def neighborhood_index_sets(nb, j_lo: int, j_hi: int, spec: WaveletSpec) -> NeighborhoodSets:
    """S1 (supports inside the closed window) and S2 (supports meeting it) for
    levels ``j_lo <= j < j_hi``; the window is ``nb.window()`` or an ``(a, b)``
    pair with ``0 <= a < b <= 1``."""
    if j_lo < spec.coarse_level:
        raise ValueError(f"j_lo={j_lo} below coarse level {spec.coarse_level}")
    if j_hi <= j_lo:
        raise ValueError(f"empty level range [{j_lo}, {j_hi})")
    a, b = _window(nb)
    if not 0.0 <= a < b <= 1.0:
        raise ValueError(f"window [{a}, {b}] must satisfy 0 <= a < b <= 1")
    inside, touching = {}, {}
    for j in range(j_lo, j_hi):
        m_in, m_touch = _level_masks(j, spec.support_mother, a, b)
        inside[j] = np.flatnonzero(m_in)
        touching[j] = np.flatnonzero(m_touch)
    return NeighborhoodSets(IndexSet(inside), IndexSet(touching))


def restricted_norm_bounds(tree: CoefficientTree, nb, spec: WaveletSpec) -> tuple[float, float]:
    """Sum of squared details over S1 and over S2 for the tree's levels."""
    if tree.max_level == tree.coarse_level:
        return 0.0, 0.0
    sets = neighborhood_index_sets(nb, tree.coarse_level, tree.max_level, spec)
    lower = math.fsum(float(np.sum(tree.level(j)[sets.inside.at(j)] ** 2)) for j in tree.levels)
    upper = math.fsum(float(np.sum(tree.level(j)[sets.touching.at(j)] ** 2)) for j in tree.levels)
    return lower, upper


def cell_weights(n_cells: int, a: float, b: float) -> np.ndarray:
    """Fraction of each grid cell ``[i/N, (i+1)/N)`` covered by ``[a, b]``."""
    edges = np.arange(n_cells + 1) / n_cells
    overlap = np.minimum(b, edges[1:]) - np.maximum(a, edges[:-1])
    return np.clip(overlap, 0.0, None) * n_cells


def window_integral(values, a: float, b: float) -> float:
    """Integral over ``[a, b]`` of a function given by its cell values, with
    partial cells weighted by their covered fraction."""
    values = np.asarray(values, dtype=float)
    w = cell_weights(len(values), a, b)
    return float(np.dot(w, values)) / len(values)


def window_energy(tree: CoefficientTree, nb, spec: WaveletSpec, oversample: int = 4) -> float:
    """Quadrature value of the window integral of (sum theta psi)^2 on a grid
    ``2^oversample`` times finer than the tree."""
    a, b = _window(nb)
    s = synthesize(tree.details_only(), spec, tree.max_level + oversample)
    return window_integral(s**2, a, b)
