"""Test functions, Hölder checks, two-point bump pairs and the sequence-model sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from . import rng
from .wavelets import CoefficientTree, WaveletSpec, analyze

MEMBERSHIP_TOL = 1e-3
CHECK_POINTS = 4097
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

FUNCTION_NAMES = (
    "zero",
    "constant",
    "ramp",
    "alpha_cusp",
    "smooth_bump",
    "lacunary",
    "two_point_bumped",
)


@dataclass(frozen=True)
class HolderClass:
    """F(alpha, M): k-th derivative increments bounded by M |x - y|^(alpha - k)."""

    alpha: float
    bound: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.bound > 0:
            raise ValueError(f"M must be positive, got {self.bound}")

    @property
    def k(self) -> int:
        return math.ceil(self.alpha) - 1

    @property
    def rate_exponent(self) -> float:
        return 2 * self.alpha / (1 + 2 * self.alpha)


def holder_seminorm(samples, alpha: float, spacing: float | None = None) -> float:
    """Grid estimate of the Hölder(alpha) seminorm of sampled values.

    Uses the k-th normalized forward difference, k = ceil(alpha) - 1, and the
    largest ratio over all grid pairs. ``spacing`` defaults to samples on a
    closed unit interval. The result is a lower bound on the true seminorm up
    to the O(h) error of the difference quotient.
    """
    f = np.asarray(samples, dtype=float)
    k = math.ceil(alpha) - 1
    if len(f) < k + 2:
        raise ValueError(f"need at least {k + 2} samples for alpha={alpha}")
    h = 1.0 / (len(f) - 1) if spacing is None else float(spacing)
    d = np.diff(f, n=k) / h**k if k else f
    expo = alpha - k
    span = float(d.max() - d.min())
    best = 0.0
    for lag in range(1, len(d)):
        denom = (lag * h) ** expo
        # later lags cannot beat the current best
        if span / denom <= best:
            break
        best = max(best, float(np.max(np.abs(d[lag:] - d[:-lag]))) / denom)
    return best


def _grid_seminorm(func: Callable, alpha: float, lo: float = 0.0, hi: float = 1.0,
                   points: int = CHECK_POINTS) -> float:
    xs = np.linspace(lo, hi, points)
    return holder_seminorm(func(xs), alpha, (hi - lo) / (points - 1))


# ---------------------------------------------------------------- bump


@lru_cache(maxsize=None)
def _profile_energy(order: int) -> float:
    val, _ = integrate.quad(lambda t: special.betainc(order, order, t) ** 2, 0.0, 1.0,
                            epsabs=1e-14, epsrel=1e-13)
    return val


def _profile(x, half_width: float, order: int) -> np.ndarray:
    ax = np.abs(np.asarray(x, dtype=float))
    t = np.clip((half_width - ax) / (half_width - 1.0), 0.0, 1.0)
    return np.where(ax <= 1.0, 1.0, special.betainc(order, order, t))


@dataclass(frozen=True)
class Bump:
    """Plateau bump: constant ``plateau`` on [-1, 1], zero outside [-A, A],
    smoothstep ramps in between, unit L2 norm."""

    alpha: float
    budget: float
    half_width: float
    plateau: float
    order: int
    seminorm: float

    def __call__(self, x) -> np.ndarray:
        return self.plateau * _profile(x, self.half_width, self.order)

    def l2_norm_sq(self) -> float:
        val, _ = integrate.quad(lambda x: float(self(x)) ** 2, -self.half_width, self.half_width,
                                points=[-1.0, 1.0], epsabs=1e-13, epsrel=1e-12, limit=200)
        return val


def _bump_parts(alpha: float, half_width: float) -> tuple[int, float]:
    order = math.ceil(alpha) + 2
    mass = 2.0 + 2.0 * (half_width - 1.0) * _profile_energy(order)
    return order, 1.0 / math.sqrt(mass)


def _bump_seminorm(alpha: float, half_width: float, points: int = CHECK_POINTS) -> float:
    order, plateau = _bump_parts(alpha, half_width)
    return _grid_seminorm(lambda x: plateau * _profile(x, half_width, order), alpha,
                          -half_width, half_width, points)


def minimal_half_width(cls_gap: HolderClass, safety: float = 0.98) -> float:
    """Smallest A (up to root-finding tolerance) whose unit-norm bump uses at
    most ``safety`` times the seminorm budget ``cls_gap.bound``."""
    alpha, target = cls_gap.alpha, safety * cls_gap.bound
    upper = 2.0
    while _bump_seminorm(alpha, upper) > target:
        upper *= 2.0
        if upper > 1e6:
            raise ValueError(f"no bump fits the seminorm budget {cls_gap.bound}")
    lower = 1.0 + 1e-9 if upper == 2.0 else upper / 2.0
    if _bump_seminorm(alpha, lower) <= target:
        return lower
    return optimize.brentq(lambda a: _bump_seminorm(alpha, a) - target, lower, upper, xtol=1e-6)


def make_bump(cls_gap: HolderClass, A: float | None = None) -> Bump:
    """Unit-L2 plateau bump on [-A, A] within the Hölder budget of ``cls_gap``.

    ``cls_gap.bound`` plays the role of M - M'. Without ``A`` the smallest
    feasible half-width is used.
    """
    if A is None:
        A = minimal_half_width(cls_gap)
    if not A > 1.0:
        raise ValueError(f"half-width A={A} must exceed the plateau half-width 1")
    order, plateau = _bump_parts(cls_gap.alpha, A)
    semi = _bump_seminorm(cls_gap.alpha, A)
    if semi > cls_gap.bound:
        raise ValueError(
            f"A={A} too small: bump seminorm {semi:.4g} exceeds budget {cls_gap.bound:.4g}"
        )
    return Bump(cls_gap.alpha, cls_gap.bound, float(A), plateau, order, semi)


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class TestFunction:
    """A function on [0, 1] with its sampled truth and coefficient tree.

    ``samples`` are values at ``(i + c) 2^-(J_max + oversample)`` with ``c`` the
    first moment of phi, and ``true_tree`` is their transform truncated at
    ``J_max``.
    """

    __test__ = False  # not a pytest class

    name: str
    func: Callable
    samples: np.ndarray
    true_tree: CoefficientTree
    declared_class: HolderClass
    membership_checked: bool
    seminorm: float | None
    spacing: float | None
    spec: WaveletSpec
    oversample: int

    @property
    def max_level(self) -> int:
        return self.true_tree.max_level


def make_test_function(name: str, func: Callable, cls: HolderClass, J_max: int, spec: WaveletSpec,
                       *, check: bool = True, oversample: int = 4,
                       check_points: int = CHECK_POINTS) -> TestFunction:
    if J_max < spec.coarse_level:
        raise ValueError(f"J_max={J_max} below coarse level {spec.coarse_level}")
    fine = J_max + oversample
    x = ((np.arange(2**fine) + spec.centre) / 2**fine) % 1.0
    samples = np.asarray(func(x), dtype=float)
    samples.setflags(write=False)
    tree = analyze(samples, spec).truncate(J_max)
    semi = spacing = None
    if check:
        spacing = 1.0 / (check_points - 1)
        semi = _grid_seminorm(func, cls.alpha, points=check_points)
        if semi > cls.bound * (1 + MEMBERSHIP_TOL):
            raise ValueError(
                f"{name}: grid seminorm {semi:.6g} exceeds M={cls.bound} for alpha={cls.alpha}"
            )
    return TestFunction(name, func, samples, tree, cls, check, semi, spacing, spec, oversample)


def _cusp_scale(alpha: float, bound: float) -> float:
    if alpha <= 1:
        return bound
    if alpha <= 2:
        return bound / (alpha * 2.0 ** (2.0 - alpha))
    raise ValueError("alpha_cusp is only provided for alpha <= 2")


def _smooth_base(x0: float, width: float):
    def base(x):
        u = (np.asarray(x, dtype=float) - x0) / width
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
        return out

    return base


def _lacunary_bound(alpha: float, terms: int) -> float:
    """Analytic Hölder bound for sum_{j<terms} 2^{-j alpha} cos(2 pi 2^j x + phase_j)."""
    if alpha <= 1:
        per_term = 2.0 ** (1.0 - alpha) * (2 * math.pi) ** alpha
        return terms * per_term
    raise ValueError("lacunary is only provided for alpha <= 1")


def catalog(name: str, cls: HolderClass, J_max: int, spec: WaveletSpec, *, x0: float = 0.5,
            **params) -> TestFunction:
    """Concrete members of F(alpha, M) used by the experiments.

    ``lacunary`` takes ``terms`` (default 12); ``two_point_bumped`` takes
    ``n``, ``B_n`` and ``M_prime`` and returns the bumped member of the pair
    built on the zero function; ``constant`` takes ``value``.
    """
    alpha, bound = cls.alpha, cls.bound
    if name == "zero":
        func = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    elif name == "constant":
        value = float(params.get("value", 1.0))
        func = lambda x: np.full_like(np.asarray(x, dtype=float), value)  # noqa: E731
    elif name == "ramp":
        func = lambda x: bound * (np.asarray(x, dtype=float) - 0.5)  # noqa: E731
    elif name == "alpha_cusp":
        scale = _cusp_scale(alpha, bound)
        func = lambda x: scale * np.abs(np.asarray(x, dtype=float) - x0) ** alpha  # noqa: E731
    elif name == "smooth_bump":
        width = float(params.get("width", 0.25))
        base = _smooth_base(x0, width)
        amp = 0.9 * bound / _grid_seminorm(base, alpha)
        func = lambda x: amp * base(x)  # noqa: E731
    elif name == "lacunary":
        terms = int(params.get("terms", 12))
        amp = 0.95 * bound / _lacunary_bound(alpha, terms)
        freqs = 2.0 ** np.arange(terms)
        weights = amp * freqs ** (-alpha)
        phases = GOLDEN_ANGLE * np.arange(terms)

        def func(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for w, f, p in zip(weights, freqs, phases):
                out += w * np.cos(2 * np.pi * f * x + p)
            return out
    elif name == "two_point_bumped":
        n = int(params.get("n", 1024))
        B_n = float(params.get("B_n", n))
        m_prime = float(params.get("M_prime", bound / 2))
        base = catalog("zero", HolderClass(alpha, m_prime), J_max, spec)
        return two_point_pair(base, x0, n, B_n, cls, m_prime).bumped
    else:
        raise ValueError(f"unknown test function {name!r}; choose from {FUNCTION_NAMES}")
    return make_test_function(name, func, cls, J_max, spec)


# ---------------------------------------------------------------- two-point pairs


@dataclass(frozen=True)
class TwoPointPair:
    base: TestFunction
    bumped: TestFunction
    gamma_n: float
    beta_n: float
    B_n: float
    rho_n: float
    bump: Bump
    x0: float


def two_point_pair(f0: TestFunction, x0: float, n: int, B_n: float, cls: HolderClass,
                   M_prime: float, A: float | None = None) -> TwoPointPair:
    """The pair f0 and f0 + gamma_n^{-1} g(beta_n (x - x0)) with
    n * int (f1 - f0)^2 = log B_n."""
    if not 0 < M_prime < cls.bound:
        raise ValueError(f"need 0 < M' < M, got M'={M_prime}, M={cls.bound}")
    if not B_n > 1:
        raise ValueError(f"B_n must exceed 1, got {B_n}")
    log_b = math.log(B_n)
    if not log_b < n:
        raise ValueError(f"log B_n={log_b:.4g} must be below n={n}")
    semi0 = _grid_seminorm(f0.func, cls.alpha)
    if semi0 > M_prime * (1 + MEMBERSHIP_TOL):
        raise ValueError(f"f0 grid seminorm {semi0:.4g} exceeds M'={M_prime}")
    bump = make_bump(HolderClass(cls.alpha, cls.bound - M_prime), A)
    ratio = n / log_b
    gamma = ratio ** (cls.alpha / (1 + 2 * cls.alpha))
    beta = ratio ** (1 / (1 + 2 * cls.alpha))
    reach = bump.half_width / beta
    if x0 - reach < 0 or x0 + reach > 1:
        raise ValueError(
            f"bump support [{x0 - reach:.4g}, {x0 + reach:.4g}] exits [0, 1]; increase n"
        )

    def diff(x):
        return bump(beta * (np.asarray(x, dtype=float) - x0)) / gamma

    base_func = f0.func

    def bumped(x):
        return base_func(x) + diff(x)

    # finer check grid so that the bump spans many points
    points = max(CHECK_POINTS, int(64 * beta / bump.half_width) + 1)
    f1 = make_test_function("two_point_bumped", bumped, cls, f0.max_level, f0.spec,
                            oversample=f0.oversample, check_points=points)
    mass, _ = integrate.quad(lambda x: float(diff(x)) ** 2, x0 - reach, x0 + reach,
                             points=[x0 - 1 / beta, x0 + 1 / beta], epsabs=1e-15,
                             epsrel=1e-12, limit=200)
    return TwoPointPair(f0, f1, gamma, beta, float(B_n), n * mass, bump, x0)


# ---------------------------------------------------------------- sequence model


@dataclass(frozen=True)
class ObservedSequence:
    """Noisy coefficients y = theta + n^{-1/2} z with the same shape as the truth."""

    noise_level: int
    values: CoefficientTree
    seed: int
    stream: int = 0

    @property
    def coarse_obs(self) -> np.ndarray:
        return self.values.coarse

    @property
    def detail_obs(self) -> tuple[np.ndarray, ...]:
        return self.values.detail

    @property
    def sigma2(self) -> float:
        return 1.0 / self.noise_level


def sample_observation(tree: CoefficientTree, n: int, seed: int, stream: int = 0) -> ObservedSequence:
    """Observe every coefficient with independent N(0, 1/n) noise.

    Noise is drawn in level order (coarse block, then j0, j0+1, ...) from the
    stream ``(seed, stream)``, so a truncated tree sees a prefix of the same
    draws.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"noise level n must be an integer >= 1, got {n}")
    z = rng.standard_normal(seed, stream, 2**tree.max_level)
    values = tree.flat() + z / math.sqrt(n)
    return ObservedSequence(int(n), CoefficientTree.from_flat(tree.coarse_level, tree.max_level, values),
                            int(seed), int(stream))


# ---------------------------------------------------------------- serialization

_TREE_MAGIC = "# blockshrink coefficient tree v1"


def save_tree(path, tree: CoefficientTree, basis: str, **meta) -> None:
    """Write a tree as text: magic line, ``key value`` header lines, ``values
    <count>``, then one coefficient per line in level order."""
    lines = [_TREE_MAGIC, f"basis {basis}", f"coarse_level {tree.coarse_level}",
             f"max_level {tree.max_level}"]
    lines += [f"{k} {v}" for k, v in meta.items()]
    flat = tree.flat()
    lines.append(f"values {len(flat)}")
    lines += [repr(float(v)) for v in flat]
    Path(path).write_text("\n".join(lines) + "\n")


def load_tree(path) -> tuple[CoefficientTree, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _TREE_MAGIC:
        raise ValueError(f"{path}: not a coefficient tree file")
    header = {}
    i = 1
    while not lines[i].startswith("values "):
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    count = int(lines[i].split()[1])
    values = np.array([float(v) for v in lines[i + 1 : i + 1 + count]])
    if len(values) != count:
        raise ValueError(f"{path}: expected {count} values, found {len(values)}")
    tree = CoefficientTree.from_flat(int(header["coarse_level"]), int(header["max_level"]), values)
    return tree, header


def save_test_function(path, f: TestFunction) -> None:
    save_tree(path, f.true_tree, f.spec.name, function=f.name, alpha=f.declared_class.alpha,
              M=f.declared_class.bound)
