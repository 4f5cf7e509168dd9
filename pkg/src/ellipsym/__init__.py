"""Elliptically symmetric distributions: sampling, densities, robust
location/scatter estimation, asymptotic covariances and Cramer-Rao bounds,
with a Monte Carlo verification harness."""

from . import asymptotics, density, estimators, families, harness, matrixkit, rng, sampling
from .families import (
    CIRCULAR,
    NONCIRCULAR,
    REAL,
    FamilyKernel,
    epscont,
    gaussian,
    gg,
    kdist,
    parse_family,
    student,
)
from .sampling import DistributionSpec, SampleBatch

__all__ = [
    "matrixkit",
    "families",
    "rng",
    "sampling",
    "density",
    "estimators",
    "asymptotics",
    "harness",
    "FamilyKernel",
    "DistributionSpec",
    "SampleBatch",
    "REAL",
    "CIRCULAR",
    "NONCIRCULAR",
    "gaussian",
    "student",
    "gg",
    "kdist",
    "epscont",
    "parse_family",
]

__version__ = "0.1.0"
