import numpy as np
import scipy.linalg

RIDGE = 1e-12


def solve_gram(gamma, rhs):
    """Solve ``X @ conj(gamma) = rhs`` for Hermitian PSD ``gamma``.

    Returns ``(X, ridge_used)``. A ridge of ``RIDGE * trace(gamma) / R`` is
    added when the Cholesky factorization fails or is badly conditioned.
    """
    r = gamma.shape[0]
    # X conj(G) = M  <=>  G X^T = M^T  (G Hermitian)
    try:
        c, low = scipy.linalg.cho_factor(gamma, lower=False, check_finite=False)
        d = np.abs(np.diag(c))
        if d.min() > 1e-8 * d.max():
            return scipy.linalg.cho_solve((c, low), rhs.T, check_finite=False).T, False
    except np.linalg.LinAlgError:
        pass
    ridge = RIDGE * max(np.trace(gamma).real, np.finfo(float).tiny) / r
    g = gamma + ridge * np.eye(r)
    try:
        x = scipy.linalg.solve(g, rhs.T, assume_a="her", check_finite=False).T
    except (np.linalg.LinAlgError, ValueError):
        x = np.linalg.lstsq(g, rhs.T, rcond=None)[0].T
    return x, True


def hadamard_grams(factors, skip):
    """Hadamard product of ``F^H F`` over all factors except index ``skip``."""
    r = factors[0].shape[1]
    dtype = np.result_type(*factors)
    g = np.ones((r, r), dtype=dtype)
    for k, f in enumerate(factors):
        if k != skip:
            g = g * (f.conj().T @ f)
    return g
