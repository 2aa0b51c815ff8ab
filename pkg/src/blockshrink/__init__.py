"""Wavelet block shrinkage over neighborhoods: transforms, estimators and risk experiments."""

from .estimators import (
    LAMBDA_STAR,
    block_js,
    hybrid_estimate,
    hybrid_partition,
    local_constant_estimate,
    plan_levels,
    solve_threshold_constant,
    superefficient_estimate,
)
from .model import HolderClass, catalog, sample_observation, two_point_pair
from .risk import NeighborhoodSpec, neighborhood_risk, rate_fit, weighted_risk
from .wavelets import CoefficientTree, analyze, build_basis, synthesize

__version__ = "0.1.0"

__all__ = [
    "LAMBDA_STAR",
    "CoefficientTree",
    "HolderClass",
    "NeighborhoodSpec",
    "analyze",
    "block_js",
    "build_basis",
    "catalog",
    "hybrid_estimate",
    "hybrid_partition",
    "local_constant_estimate",
    "neighborhood_risk",
    "plan_levels",
    "rate_fit",
    "sample_observation",
    "solve_threshold_constant",
    "superefficient_estimate",
    "synthesize",
    "two_point_pair",
    "weighted_risk",
]
