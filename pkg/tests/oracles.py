"""Independent reference computations used by the tests.

None of these call into pmlsv; they are deliberately slow, direct routes to the
same quantities.
"""

import numpy as np
from scipy.optimize import minimize


def prox_objective(Y, X, tau):
    return 0.5 * np.sum((Y - X) ** 2) + tau * np.sum(np.linalg.svd(Y, compute_uv=False))


def subgradient_prox(X, tau, iters=20000):
    """Subgradient descent on 0.5||Y - X||^2 + tau ||Y||_* from Y = X.

    `X` may be a stack of matrices (``(..., n1, n2)``) with `tau` broadcast
    against the leading axes. Steps 1/(k+1) suit the unit strong convexity.
    The subgradient used is U V^T from the current SVD.
    """
    X = np.asarray(X, dtype=float)
    tau = np.asarray(tau, dtype=float)[..., None, None]
    Y = X.copy()
    for k in range(iters):
        u, _, vt = np.linalg.svd(Y, full_matrices=False)
        g = Y - X + tau * (u @ vt)
        Y = Y - g / (k + 1)
    return Y


def factored_prox(X, tau, seed=0):
    """Minimise 0.5||P Q^T - X||^2 + tau/2 (||P||^2 + ||Q||^2) over full-width P, Q.

    The variational form ||Y||_* = min_{PQ^T = Y} (||P||^2 + ||Q||^2) / 2 makes this
    smooth; gradient-based descent (L-BFGS) gives a high-accuracy prox without any SVD.
    """
    n1, n2 = X.shape
    k = min(n1, n2)
    rng = np.random.default_rng(seed)
    z0 = 0.1 * rng.standard_normal((n1 + n2) * k)

    def fun(z):
        P = z[: n1 * k].reshape(n1, k)
        Q = z[n1 * k:].reshape(n2, k)
        R = P @ Q.T - X
        val = 0.5 * np.sum(R * R) + 0.5 * tau * (np.sum(P * P) + np.sum(Q * Q))
        gP = R @ Q + tau * P
        gQ = R.T @ P + tau * Q
        return val, np.concatenate([gP.ravel(), gQ.ravel()])

    res = minimize(fun, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 200000, "maxfun": 400000, "ftol": 0.0, "gtol": 1e-13, "maxcor": 30})
    P = res.x[: n1 * k].reshape(n1, k)
    Q = res.x[n1 * k:].reshape(n2, k)
    return P @ Q.T


def dense_sensing_matrix(op):
    """Rows vec(A_i)^T with column-stacking vec, built entry by entry from the masks."""
    m1, m2 = op.shape
    A = np.zeros((op.n_meas, m1 * m2))
    for i in range(op.n_meas):
        mask = op.mask(i)
        for k in range(m2):
            for j in range(m1):
                A[i, k * m1 + j] = mask[j, k]
    return A


def poisson_nll_direct(A, M, y, floor):
    """-sum_j y_j log r_j + r_j evaluated term by term, r = A vec(M)."""
    f = M.ravel(order="F")
    total = 0.0
    for j in range(A.shape[0]):
        r = max(float(np.dot(A[j], f)), floor)
        total += r - y[j] * np.log(r)
    return total


def long_run_reference(A, y, intensity, shape, lam, eta, iters, floor=1e-300, monotone=False):
    """Fixed-step proximal gradient with singular value shrinkage and rescaling.

    Dense column-stacked formulation with no line search: every step uses the
    same step `eta` and threshold ``lam * eta``. With ``monotone=True`` a step
    is only taken while it strictly lowers the regularized objective, and the
    run ends at the first step that does not. Returns ``(X, steps_taken)``.
    """
    y = np.asarray(y, dtype=float)

    def objective(X):
        r = np.maximum(A @ X.ravel(order="F"), floor)
        return np.sum(r - y * np.log(r)) + lam * np.sum(np.linalg.svd(X, compute_uv=False))

    x = A.T @ y
    X = (x * (intensity / x.sum())).reshape(shape, order="F")
    f = objective(X)
    for k in range(iters):
        r = np.maximum(A @ X.ravel(order="F"), floor)
        g = (A.T @ (1.0 - y / r)).reshape(shape, order="F")
        u, s, vt = np.linalg.svd(X - eta * g, full_matrices=False)
        Z = (u * np.maximum(s - lam * eta, 0.0)) @ vt
        Z *= intensity / Z.sum()
        if monotone:
            fz = objective(Z)
            if not fz < f:
                return X, k
            f = fz
        X = Z
    return X, iters
