"""Low-rank recovery of nonnegative matrices from Poisson-noisy random-mask measurements."""

from ._backend import BACKEND, available_backends
from .exceptions import (
    ConfigError,
    DegenerateIterateError,
    DimensionError,
    PmlsvError,
    SvdConvergenceError,
    UnidentifiableSignalError,
)
from .imaging import ImageSpec, normalized_risk, patchify, rank_truncate, synthetic_flare, unpatchify
from .linalg import entry_sum_norm, frobenius_norm_sq, nuclear_norm, svd, svt
from .poisson import ObjectiveParams, gradient, neg_log_likelihood, objective
from .sensing import MeasurementSet, SensingConfig, SensingOperator, adjoint, forward, generate, sample_poisson
from .solver import SolverConfig, SolverTrace, initialize, project_intensity, solve, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConfigError",
    "DegenerateIterateError",
    "DimensionError",
    "ImageSpec",
    "MeasurementSet",
    "ObjectiveParams",
    "PmlsvError",
    "SensingConfig",
    "SensingOperator",
    "SolverConfig",
    "SolverTrace",
    "SvdConvergenceError",
    "UnidentifiableSignalError",
    "adjoint",
    "available_backends",
    "entry_sum_norm",
    "forward",
    "frobenius_norm_sq",
    "generate",
    "gradient",
    "initialize",
    "neg_log_likelihood",
    "normalized_risk",
    "nuclear_norm",
    "objective",
    "patchify",
    "project_intensity",
    "rank_truncate",
    "sample_poisson",
    "solve",
    "step",
    "svd",
    "svt",
    "synthetic_flare",
    "unpatchify",
]
