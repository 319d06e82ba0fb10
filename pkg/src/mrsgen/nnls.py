"""Lawson-Hanson active-set non-negative least squares."""

import numpy as np


def nnls(A, b, max_iter=None, tol=None):
    """Solve ``min ||A x - b||`` subject to ``x >= 0``.

    Returns ``(x, residual_norm)``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError("incompatible dimensions")
    if max_iter is None:
        max_iter = 3 * n + 30
    if tol is None:
        tol = 10 * np.finfo(float).eps * np.linalg.norm(A, 1) * max(m, n)

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    w = A.T @ (b - A @ x)
    for _ in range(max_iter):
        if passive.all() or np.max(np.where(passive, -np.inf, w)) <= tol:
            break
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        passive[j] = True
        while True:
            z = np.zeros(n)
            z[passive] = np.linalg.lstsq(A[:, passive], b, rcond=None)[0]
            if np.all(z[passive] > 0):
                x = z
                break
            # step back to the boundary and drop the variables that hit zero
            blocking = passive & (z <= 0)
            alpha = np.min(x[blocking] / (x[blocking] - z[blocking]))
            x = x + alpha * (z - x)
            passive &= x > tol
            x[~passive] = 0.0
        w = A.T @ (b - A @ x)
    else:
        raise RuntimeError("nnls did not converge")
    return x, float(np.linalg.norm(A @ x - b))
