"""Self-checks of operator physics, the likelihood gradient and the SVT prox.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs them all on
a seeded random instance. These back the ``pmlsv checks`` report.
"""

from dataclasses import dataclass

import numpy as np

from ._constants import FLUX_ATOL
from .linalg import svt
from .poisson import ObjectiveParams, gradient, neg_log_likelihood
from .sensing import SensingConfig, adjoint, forward, generate, sample_poisson, verify_flux_preserving

__all__ = ["CheckResult", "run_checks"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_nonnegative(rng, shape):
    m = rng.exponential(size=shape)
    return m * (rng.random(shape) < rng.uniform(0.05, 1.0))


def check_positivity(op, trials, rng):
    worst = min(float(forward(op, _random_nonnegative(rng, op.shape)).min()) for _ in range(trials))
    return CheckResult("positivity", worst >= 0, f"min rate over {trials} trials = {worst:.3g}")


def check_flux(op, trials, seed):
    ok = verify_flux_preserving(op, trials, seed=seed)
    return CheckResult("flux", ok, f"{trials} trials, atol {FLUX_ATOL:g}")


def check_lower_bound(op, rng, c=0.5):
    m = c + rng.random(op.shape)
    rates = forward(op, m)
    nonempty = op.support.any(axis=1)
    ok = bool(np.all(rates[nonempty] >= c / op.n_meas * (1 - 1e-12)))
    return CheckResult("lower_bound", ok, f"{int(nonempty.sum())}/{op.n_meas} nonempty masks, c = {c}")


def check_adjoint(op, trials, rng):
    worst = 0.0
    for _ in range(trials):
        m, w = rng.standard_normal(op.shape), rng.standard_normal(op.n_meas)
        lhs, rhs = float(forward(op, m) @ w), float(np.sum(m * adjoint(op, w)))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return CheckResult("adjoint", worst <= 1e-12, f"max relative mismatch {worst:.2e}")


def check_gradient(op, rng, noise_seed, tol=1e-6, n_coords=20):
    m = 100.0 * (0.5 + rng.random(op.shape))
    y = sample_poisson(op, m, noise_seed)
    params = ObjectiveParams(0.0, 1e-12)
    g = gradient(op, y, m, params)
    h = 1e-5 * float(np.abs(m).max())
    flat = rng.choice(m.size, size=min(n_coords, m.size), replace=False)
    fd = np.empty(flat.size)
    for k, idx in enumerate(flat):
        e = np.zeros(m.size)
        e[idx] = h
        e = e.reshape(m.shape)
        fd[k] = (neg_log_likelihood(op, y, m + e, params) - neg_log_likelihood(op, y, m - e, params)) / (2 * h)
    err = float(np.linalg.norm(g.ravel()[flat] - fd) / np.linalg.norm(fd))
    return CheckResult("gradient", err <= tol, f"relative error {err:.2e} on {flat.size} coordinates")


def check_svt(rng, n_perturb=100):
    x = rng.standard_normal((6, 6))
    tau = 0.5

    def prox(y):
        return 0.5 * np.sum((y - x) ** 2) + tau * np.sum(np.linalg.svd(y, compute_uv=False))

    y = svt(x, tau)
    best = prox(y)
    beaten = sum(prox(y + 1e-3 * rng.standard_normal(y.shape)) < best for _ in range(n_perturb))
    return CheckResult("svt_prox", bool(beaten == 0), f"{beaten}/{n_perturb} perturbations beat the prox")


def run_checks(m1=16, m2=16, n_meas=50, seed=0, trials=1000, zero_prob=0.5):
    """Run every check on a seeded operator and return the results in a fixed order."""
    op = generate(SensingConfig(m1, m2, n_meas, zero_prob, seed))
    rng = np.random.default_rng(seed)
    return [
        check_positivity(op, trials, rng),
        check_flux(op, trials, seed),
        check_lower_bound(op, rng),
        check_adjoint(op, 20, rng),
        check_gradient(op, rng, seed + 1),
        check_svt(rng),
    ]
