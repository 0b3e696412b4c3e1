"""Poisson negative log-likelihood, its gradient and the nuclear-norm regularized objective.

The constant ``sum(log(y_j!))`` is dropped everywhere, so objective values are
only comparable between evaluations that share the same counts.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError
from .linalg import nuclear_norm
from .sensing import adjoint, forward

__all__ = [
    "ObjectiveParams",
    "gradient",
    "gradient_from_rates",
    "neg_log_likelihood",
    "nll_from_rates",
    "objective",
]


@dataclass(frozen=True)
class ObjectiveParams:
    """Regularization weight and the floor applied to measured rates before ``log``."""

    lam: float
    rate_floor: float

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if not self.rate_floor > 0:
            raise ConfigError(f"rate_floor must be positive, got {self.rate_floor}")


def _counts(op, y):
    counts = np.asarray(getattr(y, "counts", y), dtype=np.float64)
    if counts.shape != (op.n_meas,):
        raise DimensionError(f"counts have shape {counts.shape}, expected ({op.n_meas},)")
    return counts


def nll_from_rates(rates, counts, rate_floor):
    r = np.maximum(rates, rate_floor)
    return float(np.sum(r - counts * np.log(r)))


def gradient_from_rates(op, rates, counts, rate_floor):
    r = np.maximum(rates, rate_floor)
    return adjoint(op, 1.0 - counts / r)


def neg_log_likelihood(op, y, m, params):
    """``sum_j r_j - y_j log r_j`` with ``r = max(A m, rate_floor)``."""
    return nll_from_rates(forward(op, m), _counts(op, y), params.rate_floor)


def gradient(op, y, m, params):
    """Gradient of :func:`neg_log_likelihood` with respect to `m`."""
    return gradient_from_rates(op, forward(op, m), _counts(op, y), params.rate_floor)


def objective(op, y, m, params):
    """Negative log-likelihood plus ``lam * ||m||_*``."""
    value = neg_log_likelihood(op, y, m, params)
    if params.lam:
        value += params.lam * nuclear_norm(m)
    return value
