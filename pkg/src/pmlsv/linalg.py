"""Dense matrix helpers, norms, a deterministic thin SVD and singular value thresholding.

Matrices are plain two-dimensional ``float64`` numpy arrays. Every public
function validates its input with :func:`as_matrix`, which rejects NaN/Inf.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import SvdConvergenceError

__all__ = [
    "SvdFactors",
    "as_matrix",
    "entry_sum_norm",
    "frobenius_norm_sq",
    "nuclear_norm",
    "svd",
    "svt",
    "threshold_factors",
]


def as_matrix(m):
    """Return `m` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains NaN or Inf entries")
    return arr


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = u @ diag(sigma) @ v.T`` with ``r = min(rows, cols)``.

    Column signs are fixed so that the largest-magnitude entry of each left
    singular vector is positive.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    def reconstruct(self):
        return (self.u * self.sigma) @ self.v.T


def frobenius_norm_sq(m):
    m = as_matrix(m)
    return float(np.sum(m * m))


def entry_sum_norm(m):
    """Signed sum of all entries (the total intensity for nonnegative `m`)."""
    return float(np.sum(as_matrix(m)))


def nuclear_norm(m):
    return float(np.sum(svd(m).sigma))


def _lapack_svd(m):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    # gesdd occasionally fails where the slower QR-iteration driver succeeds.
    try:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    except np.linalg.LinAlgError as exc:
        raise SvdConvergenceError(f"SVD did not converge for a {m.shape} matrix") from exc


def svd(m):
    """Thin SVD of `m` with a deterministic sign convention.

    Raises
    ------
    SvdConvergenceError
        If neither LAPACK driver converges.
    """
    m = as_matrix(m)
    u, sigma, vt = _lapack_svd(m)
    v = vt.T.copy()
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u = u * signs
    v = v * signs
    return SvdFactors(u=u, sigma=np.maximum(sigma, 0.0), v=v)


def threshold_factors(factors, tau):
    """Rebuild ``u @ diag((sigma - tau)_+) @ v.T`` from precomputed factors."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    shrunk = np.maximum(factors.sigma - tau, 0.0)
    return (factors.u * shrunk) @ factors.v.T


def svt(m, tau):
    """Singular value thresholding: the proximal map of ``tau * ||.||_*``.

    Returns the minimizer of ``0.5 * ||Y - m||_F**2 + tau * ||Y||_*``. The
    result depends only on the product of the factors, so repeated or zero
    singular values need no tie-breaking.
    """
    return threshold_factors(svd(m), tau)
