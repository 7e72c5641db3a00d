"""Optimal-stopping benchmarks for randomized optimizers."""

from .dist import (
    DirichletPosterior,
    EnergyDistribution,
    GaussianParams,
    GpdParams,
    SplicedDistribution,
    build_empirical,
)
from .stopping import CostModel, StoppingSolution, solve_optimal_cost, split_cost

__version__ = "0.1.0"

__all__ = [
    "CostModel",
    "DirichletPosterior",
    "EnergyDistribution",
    "GaussianParams",
    "GpdParams",
    "SplicedDistribution",
    "StoppingSolution",
    "build_empirical",
    "solve_optimal_cost",
    "split_cost",
]
