"""Neighborhood and weighted risk, Monte Carlo engine, risk-bound oracles and rate fits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, stats

from . import estimators as est
from .model import HolderClass, ObservedSequence, TestFunction, catalog, sample_observation, two_point_pair
from .wavelets import CoefficientTree, WaveletSpec, cell_weights, synthesize

KERNEL_TOL = 1e-8


# ---------------------------------------------------------------- kernels and windows


@dataclass(frozen=True)
class Kernel:
    """Weight w >= 0 supported on [-half_support, half_support] with unit integral.

    ``cdf`` is the antiderivative of ``pdf`` from -half_support; when absent,
    cell masses are computed by Gauss-Legendre quadrature.
    """

    name: str
    pdf: Callable
    half_support: float = 1.0
    cdf: Callable | None = None

    def validate(self) -> None:
        mass, _ = integrate.quad(lambda u: float(self.pdf(u)), -self.half_support, self.half_support,
                                 points=[0.0], epsabs=1e-12, epsrel=1e-12, limit=200)
        if abs(mass - 1.0) > KERNEL_TOL:
            raise ValueError(f"kernel {self.name!r} integrates to {mass:.12g}, not 1")
        grid = np.linspace(-self.half_support, self.half_support, 2001)
        if np.any(np.asarray(self.pdf(grid)) < 0):
            raise ValueError(f"kernel {self.name!r} takes negative values")
        if not float(self.pdf(0.0)) > 0:
            raise ValueError(f"kernel {self.name!r} must be positive at 0")

    def cell_masses(self, n_cells: int, x0: float, c_n: float) -> np.ndarray:
        """Integral of W_n(x) = w((x - x0)/c_n)/c_n over each grid cell."""
        edges = np.arange(n_cells + 1) / n_cells
        if self.name == "uniform":
            a, b = x0 - c_n, x0 + c_n
            return cell_weights(n_cells, a, b) / (n_cells * 2.0 * c_n)
        if self.cdf is not None:
            u = np.clip((edges - x0) / c_n, -self.half_support, self.half_support)
            return np.diff(self.cdf(u))
        nodes, wts = np.polynomial.legendre.leggauss(16)
        lo, hi = edges[:-1], edges[1:]
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        x = mid[:, None] + half[:, None] * nodes[None, :]
        u = (x - x0) / c_n
        vals = np.where(np.abs(u) <= self.half_support, self.pdf(u), 0.0) / c_n
        return (vals * wts[None, :]).sum(axis=1) * half


def _uniform_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 0.5, 0.0)


def _triangular_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.clip(1.0 - np.abs(u), 0.0, None)


def _triangular_cdf(u):
    u = np.asarray(u, dtype=float)
    return np.where(u < 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)


def _epanechnikov_pdf(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1, 0.75 * (1 - u**2), 0.0)


def _epanechnikov_cdf(u):
    u = np.asarray(u, dtype=float)
    return 0.5 + 0.75 * u - 0.25 * u**3


KERNELS = {
    "uniform": Kernel("uniform", _uniform_pdf, 1.0, lambda u: np.clip((np.asarray(u) + 1) / 2, 0, 1)),
    "triangular": Kernel("triangular", _triangular_pdf, 1.0, _triangular_cdf),
    "epanechnikov": Kernel("epanechnikov", _epanechnikov_pdf, 1.0, _epanechnikov_cdf),
}


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Window [x0 - c_n, x0 + c_n], optionally with a weight kernel."""

    x0: float
    c_n: float
    kernel: Kernel | None = None
    d_n: float | None = None

    def __post_init__(self):
        if not 0 < self.x0 < 1:
            raise ValueError(f"x0 must lie in (0, 1), got {self.x0}")
        if not 0 < self.c_n <= 0.5:
            raise ValueError(f"c_n must lie in (0, 1/2], got {self.c_n}")
        if self.kernel is not None:
            self.kernel.validate()

    def window(self) -> tuple[float, float]:
        """Support of the weight clamped to [0, 1]."""
        reach = self.c_n * (self.kernel.half_support if self.kernel else 1.0)
        a, b = max(0.0, self.x0 - reach), min(1.0, self.x0 + reach)
        if not b > a:
            raise ValueError("window is degenerate after clamping")
        return a, b

    @property
    def clamped(self) -> bool:
        reach = self.c_n * (self.kernel.half_support if self.kernel else 1.0)
        return self.x0 - reach < 0 or self.x0 + reach > 1

    def with_kernel(self, kernel: Kernel | str) -> "NeighborhoodSpec":
        kernel = KERNELS[kernel] if isinstance(kernel, str) else kernel
        return NeighborhoodSpec(self.x0, self.c_n, kernel, self.d_n)


def neighborhood_weights(nb: NeighborhoodSpec, n_cells: int) -> np.ndarray:
    """Cell weights whose dot product with cell values gives the window average."""
    a, b = nb.window()
    return cell_weights(n_cells, a, b) / (n_cells * (b - a))


def kernel_weights(nb: NeighborhoodSpec, n_cells: int) -> np.ndarray:
    if nb.kernel is None:
        raise ValueError("weighted risk needs a kernel")
    if nb.kernel.name == "uniform":
        return neighborhood_weights(nb, n_cells)
    masses = nb.kernel.cell_masses(n_cells, nb.x0, nb.c_n)
    if nb.clamped:
        masses = masses / masses.sum()
    return masses


# ---------------------------------------------------------------- estimators by name


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    params: dict = field(default_factory=dict)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"


ORACLE_ESTIMATORS = ("identity", "zero")


def make_estimator(spec_or_name, *, basis: WaveletSpec, nb: NeighborhoodSpec, truth: CoefficientTree,
                   n: int) -> tuple[Callable[[ObservedSequence], CoefficientTree | float], int]:
    """Build the estimator closure and the observation depth it needs."""
    es = spec_or_name if isinstance(spec_or_name, EstimatorSpec) else EstimatorSpec(spec_or_name)
    p = dict(es.params)
    depth = truth.max_level
    if es.name == "identity":
        return (lambda obs: truth), truth.coarse_level
    if es.name == "zero":
        zero = CoefficientTree.zeros(truth.coarse_level, truth.max_level)
        return (lambda obs: zero), truth.coarse_level
    if es.name == "soft":
        return est.soft_estimate, depth
    if es.name == "blockjs":
        return est.block_js, depth
    if es.name == "hybrid":
        part = est.hybrid_partition(n, nb, basis)
        return (lambda obs: est.hybrid_estimate(obs, nb, basis, partition=part)), depth
    if es.name == "superefficient":
        D, alpha = float(p["D"]), float(p["alpha"])
        return (lambda obs: est.superefficient_estimate(obs, D, alpha)), depth
    if es.name == "local_constant":
        B_n, alpha = float(p["B_n"]), float(p["alpha"])
        j_n = est.local_level(n, B_n, alpha)
        return (lambda obs: est.local_constant_estimate(obs, nb, B_n, alpha, basis)), max(
            j_n, truth.coarse_level)
    raise ValueError(f"unknown estimator {es.name!r}; choose from {list(est.ESTIMATORS)}")


# ---------------------------------------------------------------- Monte Carlo risk


@dataclass(frozen=True)
class RiskReport:
    mean: float
    stderr: float
    reps: int
    n: int
    estimator: str
    seed: int
    losses: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.reps < 2 or self.stderr < 0:
            raise ValueError("invalid risk report")


def _aggregate(losses: Sequence[float]) -> tuple[float, float]:
    # fsum is exactly rounded, so the result does not depend on completion order
    r = len(losses)
    mean = math.fsum(losses) / r
    var = math.fsum((x - mean) ** 2 for x in losses) / (r - 1)
    return mean, math.sqrt(var / r)


def _mc_risk(estimator, f: TestFunction, nb: NeighborhoodSpec, n: int, reps: int, seed: int,
             weights_fn, threads: int) -> RiskReport:
    if reps < 2:
        raise ValueError(f"reps must be at least 2, got {reps}")
    basis = f.spec
    truth = f.true_tree
    fn, depth = make_estimator(estimator, basis=basis, nb=nb, truth=truth, n=n)
    obs_tree = truth.truncate(min(depth, truth.max_level))
    n_cells = 2**truth.max_level
    weights = weights_fn(nb, n_cells)
    live = np.flatnonzero(weights)
    w_live = weights[live]
    truth_samples = synthesize(truth, basis)[live]
    # uniform weights over all of [0, 1]: the loss is the error energy (Parseval)
    whole = len(live) == n_cells and np.all(weights == weights[0])

    def loss(r: int) -> float:
        obs = sample_observation(obs_tree, n, seed, stream=r)
        out = fn(obs)
        if isinstance(out, CoefficientTree):
            if out.max_level < truth.max_level:
                out = out.extend(truth.max_level)
            if whole:
                return (out - truth).energy()
            err = synthesize(out - truth, basis)[live]
        else:
            err = out - truth_samples
        return float(np.dot(w_live, err * err))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            losses = list(pool.map(loss, range(reps)))
    else:
        losses = [loss(r) for r in range(reps)]
    mean, se = _aggregate(losses)
    label = estimator.label() if isinstance(estimator, EstimatorSpec) else str(estimator)
    return RiskReport(mean, se, reps, n, label, seed, tuple(losses))


def neighborhood_risk(estimator, f: TestFunction, nb: NeighborhoodSpec, n: int, reps: int, seed: int,
                      threads: int = 1) -> RiskReport:
    """Monte Carlo estimate of the window-averaged mean squared error.

    Each replication r observes the truth with noise stream (seed, r), applies
    the estimator, synthesizes the error on the 2^J_max grid and averages its
    square over the window (partial cells weighted by coverage).
    """
    return _mc_risk(estimator, f, nb, n, reps, seed, neighborhood_weights, threads)


def weighted_risk(estimator, f: TestFunction, nb: NeighborhoodSpec, n: int, reps: int, seed: int,
                  threads: int = 1) -> RiskReport:
    """As :func:`neighborhood_risk` with the squared error weighted by W_n."""
    if nb.kernel is None:
        raise ValueError("weighted risk needs a kernel")
    return _mc_risk(estimator, f, nb, n, reps, seed, kernel_weights, threads)


# ---------------------------------------------------------------- rate fits


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple[tuple[float, float], ...]
    slope_stderr: float

    def confidence_band(self, level: float = 0.95) -> tuple[float, float]:
        dof = len(self.points) - 2
        if dof < 1:
            return -math.inf, math.inf
        q = stats.t.ppf(0.5 + level / 2, dof)
        return self.slope - q * self.slope_stderr, self.slope + q * self.slope_stderr


def rate_fit(points) -> RateFit:
    """Least-squares line through (log n, log risk)."""
    pts = tuple((float(x), float(y)) for x, y in points)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points for a rate fit, got {len(pts)}")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("rate fit needs positive n and risk values")
    lx = np.log([p[0] for p in pts])
    ly = np.log([p[1] for p in pts])
    res = stats.linregress(lx, ly)
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2), pts, float(res.stderr))


# ---------------------------------------------------------------- risk-bound oracles


def oracle_bound(theta_block, lam: float, L: float, sigma2: float, variant: str = "standard",
                 c: float | None = None) -> float:
    """Block risk bounds for James-Stein shrinkage.

    general: min(sum theta^2, lam L sigma2) + 2 lam exp(-(lam - log lam - 1) L / 2) sigma2
    standard: same with exp(-L)
    bounded: per-coefficient bound 8 c^2 + 2 lam exp(-L) sigma2 when |theta_i| <= c
    """
    if lam < 1:
        raise ValueError("lambda must be at least 1")
    if variant == "bounded":
        if c is None:
            raise ValueError('variant "bounded" needs the coefficient bound c')
        return 8.0 * c * c + 2.0 * lam * math.exp(-L) * sigma2
    theta = np.asarray(theta_block, dtype=float)
    head = min(float(np.dot(theta, theta)), lam * L * sigma2)
    if variant == "general":
        return head + 2.0 * lam * math.exp(-0.5 * (lam - math.log(lam) - 1.0) * L) * sigma2
    if variant == "standard":
        return head + 2.0 * lam * math.exp(-L) * sigma2
    raise ValueError(f"unknown bound variant {variant!r}")


def truncated_second_moment(theta: float, c: float) -> float:
    """E[y^2 1{|y| > c}] for y ~ N(theta, 1), in closed form."""
    if c < 0:
        raise ValueError("c must be non-negative")

    def upper(t: float) -> float:
        # int_c^inf y^2 phi(y - t) dy with a = c - t
        a = c - t
        return a * stats.norm.pdf(a) + stats.norm.sf(a) + 2 * t * stats.norm.pdf(a) + t * t * stats.norm.sf(a)

    return float(upper(theta) + upper(-theta))


def block_risk_mc(theta, lam: float, sigma2: float, reps: int, seed: int,
                  chunk: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo per-coefficient risk of the James-Stein block rule.

    Returns (mean, stderr) arrays of (theta_hat_i - theta_i)^2 with the
    block length taken as len(theta).
    """
    from . import rng

    theta = np.asarray(theta, dtype=float)
    L = len(theta)
    sums = np.zeros(L)
    sq = np.zeros(L)
    done = 0
    stream = 0
    while done < reps:
        m = min(chunk, reps - done)
        z = rng.standard_normal(seed, stream, m * L).reshape(m, L)
        y = theta + math.sqrt(sigma2) * z
        s2 = np.einsum("ij,ij->i", y, y)
        factor = np.clip(1.0 - lam * L * sigma2 / s2, 0.0, None)
        loss = (factor[:, None] * y - theta) ** 2
        sums += loss.sum(axis=0)
        sq += (loss**2).sum(axis=0)
        done += m
        stream += 1
    mean = sums / reps
    var = (sq - reps * mean**2) / (reps - 1)
    return mean, np.sqrt(np.clip(var, 0, None) / reps)


def block_total_risk_mc(theta, lam: float, sigma2: float, reps: int, seed: int,
                        chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo total block risk sum_i E(theta_hat_i - theta_i)^2 with its stderr."""
    from . import rng

    theta = np.asarray(theta, dtype=float)
    L = len(theta)
    totals = []
    stream = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        z = rng.standard_normal(seed, stream, m * L).reshape(m, L)
        y = theta + math.sqrt(sigma2) * z
        s2 = np.einsum("ij,ij->i", y, y)
        factor = np.clip(1.0 - lam * L * sigma2 / s2, 0.0, None)
        totals.append(((factor[:, None] * y - theta) ** 2).sum(axis=1))
        done += m
        stream += 1
    t = np.concatenate(totals)
    return float(t.mean()), float(t.std(ddof=1) / math.sqrt(len(t)))


# ---------------------------------------------------------------- superefficiency experiment

D_KINDS = ("constant", "log_root", "log_mid", "log", "loglog")
REGIME_KINDS = {"case_i": ("constant",), "case_ii": ("log_root",), "case_iii": ("log", "loglog")}


def d_sequence(kind: str, scale: float, n: int, alpha: float) -> float:
    log_n = math.log(n)
    if kind == "constant":
        return scale
    if kind == "log_root":
        return scale * log_n ** (1.0 / (1.0 + 2.0 * alpha))
    if kind == "log_mid":
        # strictly between log^{1/(1+2 alpha)} n and log n
        return scale * log_n ** ((1.0 + alpha) / (1.0 + 2.0 * alpha))
    if kind == "log":
        return scale * log_n
    if kind == "loglog":
        return scale * log_n * math.log(log_n)
    raise ValueError(f"unknown d_n kind {kind!r}; choose from {D_KINDS}")


def window_half_width(kind: str, scale: float, n: int, alpha: float) -> tuple[float, float]:
    """(c_n, d_n) with c_n = d_n n^{-1/(1+2 alpha)} capped at 1/2."""
    d_n = d_sequence(kind, scale, n, alpha)
    return min(0.5, d_n * n ** (-1.0 / (1.0 + 2.0 * alpha))), d_n


@dataclass(frozen=True)
class SuperefficiencyRow:
    n: int
    c_n: float
    d_n: float
    B_n: float
    estimator: str
    risk_f0: RiskReport
    risk_alt: RiskReport

    @property
    def max_risk(self) -> float:
        return max(self.risk_f0.mean, self.risk_alt.mean)


@dataclass(frozen=True)
class SuperefficiencyReport:
    regime: str
    alpha: float
    rows: tuple[SuperefficiencyRow, ...]
    f0_fit: RateFit | None
    max_fit: RateFit

    @property
    def minimax_slope(self) -> float:
        return -2.0 * self.alpha / (1.0 + 2.0 * self.alpha)


def superefficiency_experiment(regime: str, cls: HolderClass, M_prime: float, x0: float,
                               d_kind: str, d_scale: float, n_grid: Sequence[int], reps: int,
                               seed: int, basis: WaveletSpec, B_exponent: float = 0.5,
                               J_max: int | None = None, threads: int = 1) -> SuperefficiencyReport:
    """Risk at f0 = 0 and at the two-point alternative across an n grid.

    Case (i) runs the local-constant estimator with B_n = n^B_exponent and fits
    the maximum risk against n / log B_n; the other cases run the hybrid
    estimator (BlockJS when c_n <= log(n)/n) and fit against n.
    """
    if regime not in REGIME_KINDS:
        raise ValueError(f"unknown regime {regime!r}; choose from {list(REGIME_KINDS)}")
    if d_kind not in REGIME_KINDS[regime]:
        raise ValueError(f"d_n kind {d_kind!r} does not match {regime} (expects {REGIME_KINDS[regime]})")
    grid = sorted(set(int(n) for n in n_grid))
    if len(grid) < 3:
        raise ValueError("superefficiency experiment needs at least 3 distinct n values")
    alpha = cls.alpha
    rows = []
    for n in grid:
        B_n = float(n) ** B_exponent
        c_n, d_n = window_half_width(d_kind, d_scale, n, alpha)
        nb = NeighborhoodSpec(x0, c_n, d_n=d_n)
        if regime == "case_i":
            depth = J_max or 12
            es = EstimatorSpec("local_constant", {"B_n": B_n, "alpha": alpha})
        else:
            depth = J_max or (int(n) - 1).bit_length() + 2
            name = "blockjs" if c_n <= math.log(n) / n else "hybrid"
            es = EstimatorSpec(name)
        f0 = catalog("zero", HolderClass(alpha, M_prime), depth, basis)
        pair = two_point_pair(f0, x0, n, B_n, cls, M_prime)
        r0 = neighborhood_risk(es, f0, nb, n, reps, seed, threads)
        r1 = neighborhood_risk(es, pair.bumped, nb, n, reps, seed + 1, threads)
        rows.append(SuperefficiencyRow(n, c_n, d_n, B_n, es.label(), r0, r1))
    positive = [r for r in rows if r.risk_f0.mean > 0]
    f0_fit = rate_fit([(r.n, r.risk_f0.mean) for r in positive]) if len(positive) >= 3 else None
    if regime == "case_i":
        max_fit = rate_fit([(r.n / math.log(r.B_n), r.max_risk) for r in rows])
    else:
        max_fit = rate_fit([(r.n, r.max_risk) for r in rows])
    return SuperefficiencyReport(regime, alpha, tuple(rows), f0_fit, max_fit)
