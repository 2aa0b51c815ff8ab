"""Shrinkage rules and the BlockJS, hybrid, superefficient and local-constant estimators.

All logarithms are natural logarithms and the horizontal block length is
``L = ceil(log n)``. Levels are half-open: ``[j0, J)`` is estimated and level
``J`` and above are set to zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .model import ObservedSequence
from .wavelets import (
    CoefficientTree,
    IndexSet,
    WaveletSpec,
    neighborhood_index_sets,
    scaling_coefficients,
)

logger = logging.getLogger(__name__)

ESTIMATORS = {
    "soft": "term-by-term soft thresholding at sqrt(2 log n / n) below level J",
    "blockjs": "level-wise James-Stein blocks of length ceil(log n), threshold lambda_*",
    "hybrid": "soft / vertical block / horizontal block hybrid for a given window",
    "superefficient": "one James-Stein block over all coefficients up to level J' (params D, alpha)",
    "local_constant": "soft-thresholded local mean, constant on the window (params B_n, alpha)",
}


def solve_threshold_constant(c: float) -> float:
    """Root lambda >= 1 of lambda - log(lambda) - 1 = c."""
    if c < 0:
        raise ValueError(f"c must be non-negative, got {c}")
    if c == 0:
        return 1.0
    upper = 2.0
    while upper - math.log(upper) - 1.0 < c:
        upper *= 2.0
    return optimize.brentq(lambda lam: lam - math.log(lam) - 1.0 - c, 1.0, upper,
                           xtol=1e-14, rtol=4 * np.finfo(float).eps)


LAMBDA_STAR = solve_threshold_constant(2.0)


@dataclass(frozen=True)
class ThresholdConstants:
    lambda_star: float
    soft_level: float
    lambda_custom: float | None = None

    @classmethod
    def for_n(cls, n: int, D: float | None = None) -> "ThresholdConstants":
        custom = None if D is None else solve_threshold_constant(2.0 * D)
        return cls(LAMBDA_STAR, math.sqrt(2.0 * math.log(n) / n), custom)


def soft_threshold(y, t: float):
    if t < 0:
        raise ValueError("threshold must be non-negative")
    y = np.asarray(y, dtype=float)
    out = np.sign(y) * np.maximum(np.abs(y) - t, 0.0)
    return float(out) if out.ndim == 0 else out


def shrink_factor(s2: float, lam: float, l_eff: float, sigma2: float) -> float:
    if s2 <= 0.0:
        return 0.0
    return max(1.0 - lam * l_eff * sigma2 / s2, 0.0)


def james_stein_block(ys, lam: float, l_eff: float, sigma2: float) -> np.ndarray:
    """Multiply the block by (1 - lam * l_eff * sigma2 / S^2)_+, S^2 = sum ys^2."""
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise ValueError("empty block")
    if lam < 1 or sigma2 <= 0:
        raise ValueError("need lambda >= 1 and sigma2 > 0")
    return shrink_factor(float(np.dot(ys, ys)), lam, l_eff, sigma2) * ys


def block_slices(size: int, L: int) -> list[slice]:
    """Contiguous blocks of length L; the last block holds the remainder."""
    return [slice(start, min(start + L, size)) for start in range(0, size, L)]


def _shrink_level(y: np.ndarray, L: int, lam: float, sigma2: float) -> np.ndarray:
    out = np.empty_like(y)
    for sl in block_slices(len(y), L):
        block = y[sl]
        out[sl] = shrink_factor(float(np.dot(block, block)), lam, len(block), sigma2) * block
    return out


@dataclass(frozen=True)
class LevelPlan:
    n: int
    c_n: float | None
    j0: int
    J: int
    J_star: int | None
    J_upper: int | None
    J_prime: int | None
    block_length: int
    blockjs_regime: bool

    def as_dict(self) -> dict:
        return {
            "J": self.J,
            "J_star": self.J_star,
            "J_upper": self.J_upper,
            "J_prime": self.J_prime,
            "L": self.block_length,
        }


def _smallest_level(target: float) -> int:
    j = 0
    while 2.0**j < target:
        j += 1
    return j


def plan_levels(n: int, c_n: float | None = None, alpha: float | None = None, j0: int = 0) -> LevelPlan:
    """Dividing levels: 2^J >= n, 2^J_* >= 1/c_n (then J_* >= j0),
    2^J^* >= log(n)/c_n, and the largest J' with 2^J' < n^{1/(1+2 alpha)}."""
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    J = (int(n) - 1).bit_length()
    log_n = math.log(n)
    j_star = j_upper = None
    regime = False
    if c_n is not None:
        if not c_n > 0:
            raise ValueError(f"c_n must be positive, got {c_n}")
        j_star = max(_smallest_level(1.0 / c_n), j0)
        j_upper = _smallest_level(log_n / c_n)
        regime = c_n <= log_n / n
    j_prime = None
    if alpha is not None:
        bound = n ** (1.0 / (1.0 + 2.0 * alpha))
        j_prime = 0
        while 2.0 ** (j_prime + 1) < bound:
            j_prime += 1
        if not 2.0**j_prime < bound:
            j_prime = -1
    return LevelPlan(int(n), c_n, j0, J, j_star, j_upper, j_prime, math.ceil(log_n), regime)


def _working_depth(obs: ObservedSequence, J: int, who: str) -> int:
    depth = obs.values.max_level
    if depth < J:
        logger.warning("%s: observations stop at level %d < J=%d; truncating", who, depth, J)
        return depth
    return J


def block_js(obs: ObservedSequence, consts: ThresholdConstants | None = None) -> CoefficientTree:
    """BlockJS: James-Stein on blocks of length ceil(log n) within each level
    j0 <= j < J; coarse coefficients unchanged; higher levels zero."""
    n = obs.noise_level
    consts = consts or ThresholdConstants.for_n(n)
    tree = obs.values
    plan = plan_levels(n, j0=tree.coarse_level)
    top = _working_depth(obs, plan.J, "block_js")
    detail = []
    for j in tree.levels:
        y = tree.level(j)
        if j < top:
            detail.append(_shrink_level(y, plan.block_length, consts.lambda_star, obs.sigma2))
        else:
            detail.append(np.zeros_like(y))
    return CoefficientTree(tree.coarse_level, tree.max_level, tree.coarse, tuple(detail))


def soft_estimate(obs: ObservedSequence, consts: ThresholdConstants | None = None) -> CoefficientTree:
    n = obs.noise_level
    consts = consts or ThresholdConstants.for_n(n)
    tree = obs.values
    top = _working_depth(obs, plan_levels(n).J, "soft")
    detail = [soft_threshold(tree.level(j), consts.soft_level) if j < top else np.zeros(2**j)
              for j in tree.levels]
    return CoefficientTree(tree.coarse_level, tree.max_level, tree.coarse, tuple(detail))


@dataclass(frozen=True)
class BlockPartition:
    """Branch layout of the hybrid estimator."""

    plan: LevelPlan
    vertical: IndexSet
    soft_levels: range
    horizontal_levels: range

    @property
    def vertical_size(self) -> int:
        return len(self.vertical)

    def horizontal(self, j: int) -> list[slice]:
        return block_slices(2**j, self.plan.block_length)

    def branch(self, j: int, k: int) -> str:
        if j >= self.plan.J:
            return "zero"
        if (j, k) in self.vertical:
            return "vertical"
        if j in self.soft_levels:
            return "soft"
        return "horizontal"


def hybrid_partition(n: int, nb, spec: WaveletSpec) -> BlockPartition:
    a, b = nb.window()
    c_n = nb.c_n
    j0 = spec.coarse_level
    plan = plan_levels(n, c_n, j0=j0)
    if plan.blockjs_regime:
        raise ValueError(
            f"hybrid estimator needs c_n > log(n)/n ({c_n:.4g} <= {math.log(n) / n:.4g}); use blockjs"
        )
    lo, hi = plan.J_star, max(plan.J_upper, j0)
    if hi > lo:
        vertical = neighborhood_index_sets((a, b), lo, hi, spec).touching
    else:
        vertical = IndexSet({})
    return BlockPartition(plan, vertical, range(j0, hi), range(hi, plan.J))


def hybrid_estimate(obs: ObservedSequence, nb, spec: WaveletSpec,
                    consts: ThresholdConstants | None = None,
                    partition: BlockPartition | None = None) -> CoefficientTree:
    """Hybrid rule: soft thresholding for j0 <= j < J^* outside H^*, one
    James-Stein block over H^* (threshold uses Card(H^*)), horizontal
    James-Stein blocks for J^* <= j < J, zero from J on."""
    n = obs.noise_level
    consts = consts or ThresholdConstants.for_n(n)
    part = partition or hybrid_partition(n, nb, spec)
    tree = obs.values
    top = _working_depth(obs, part.plan.J, "hybrid_estimate")
    sigma2 = obs.sigma2
    s_v = math.fsum(float(np.dot(tree.level(j)[ks], tree.level(j)[ks]))
                    for j, ks in part.vertical.levels.items() if j < tree.max_level)
    v_factor = shrink_factor(s_v, consts.lambda_star, max(part.vertical_size, 1), sigma2)
    detail = []
    for j in tree.levels:
        y = tree.level(j)
        if j >= top:
            detail.append(np.zeros_like(y))
        elif j in part.soft_levels:
            out = soft_threshold(y, consts.soft_level)
            ks = part.vertical.at(j)
            out[ks] = v_factor * y[ks]
            detail.append(out)
        else:
            detail.append(_shrink_level(y, part.plan.block_length, consts.lambda_star, sigma2))
    return CoefficientTree(tree.coarse_level, tree.max_level, tree.coarse, tuple(detail))


def superefficient_block_size(n: int, alpha: float, j0: int) -> tuple[int, int]:
    """(J', L') with L' the number of coefficients in the coarse block plus
    levels j0..J'."""
    j_prime = plan_levels(n, alpha=alpha).J_prime
    if j_prime < j0:
        raise ValueError(f"J'={j_prime} below j0={j0}: n={n} too small for alpha={alpha}")
    return j_prime, 2 ** (j_prime + 1)


def superefficient_estimate(obs: ObservedSequence, D: float, alpha: float) -> CoefficientTree:
    """One James-Stein block over the coarse block and levels j0..J', with
    lambda solving lambda - log lambda - 1 = 2D; all finer levels zero."""
    if not D > 0 or not alpha > 0:
        raise ValueError("need D > 0 and alpha > 0")
    n = obs.noise_level
    tree = obs.values
    j_prime, l_prime = superefficient_block_size(n, alpha, tree.coarse_level)
    if j_prime >= tree.max_level:
        raise ValueError(f"observations stop at level {tree.max_level}, need level {j_prime}")
    lam = solve_threshold_constant(2.0 * D)
    kept = [tree.coarse] + [tree.level(j) for j in range(tree.coarse_level, j_prime + 1)]
    s2 = math.fsum(float(np.dot(v, v)) for v in kept)
    factor = shrink_factor(s2, lam, l_prime, obs.sigma2)
    detail = [factor * tree.level(j) if j <= j_prime else np.zeros(2**j) for j in tree.levels]
    return CoefficientTree(tree.coarse_level, tree.max_level, factor * tree.coarse, tuple(detail))


def local_level(n: int, B_n: float, alpha: float) -> int:
    """Largest j with 2^j <= (n / log B_n)^{1/(1+2 alpha)}."""
    target = (n / math.log(B_n)) ** (1.0 / (1.0 + 2.0 * alpha))
    if target < 1:
        raise ValueError("(n / log B_n) must be at least 1")
    j = 0
    while 2.0 ** (j + 1) <= target:
        j += 1
    return j


def local_position(x0: float, level: int, spec: WaveletSpec) -> int:
    """Position k whose phi_{level,k} has its centre of mass closest to x0."""
    size = 2**level
    k = int(round(x0 * size - spec.centre))
    return k % size


def local_constant_estimate(obs: ObservedSequence, nb, B_n: float, alpha: float,
                            spec: WaveletSpec) -> float:
    """Soft-thresholded local mean 2^{j_n/2} <Z, phi_{j_n,k}> at threshold
    sigma_n sqrt(2 log B_n), sigma_n^2 = 2^{j_n}/n; the estimate is this
    constant on the window."""
    if spec.father_moments < 1:
        raise ValueError(f"basis {spec.name!r} has no father-wavelet vanishing moments; use a Coiflet")
    if not B_n > 1:
        raise ValueError("B_n must exceed 1")
    n = obs.noise_level
    j_n = local_level(n, B_n, alpha)
    tree = obs.values
    if j_n < tree.coarse_level:
        raise ValueError(f"j_n={j_n} below coarse level {tree.coarse_level}")
    if j_n > tree.max_level:
        raise ValueError(f"j_n={j_n} beyond observed depth {tree.max_level}")
    a = scaling_coefficients(tree, spec, j_n)
    y_n = 2.0 ** (j_n / 2) * a[local_position(nb.x0, j_n, spec)]
    sigma_n = math.sqrt(2.0**j_n / n)
    return soft_threshold(y_n, sigma_n * math.sqrt(2.0 * math.log(B_n)))
