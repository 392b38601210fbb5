"""Materialized reference quantities for the progressive contractions."""
import numpy as np

from tt2cp.tensor_core import khatri_rao, reshape, train_contract


def left_block(x, n):
    """``G_{<n}`` as a ``(I_0 ... I_{n-1}) x R_n`` matrix (``n >= 1``)."""
    out = x.cores[0][0]
    for c in x.cores[1:n]:
        out = train_contract(out, c)
    return reshape(out, (-1, out.shape[-1]))


def right_block(x, n):
    """``G_{>n}`` as an ``R_{n+1} x (I_{n+1} ... I_{N-1})`` matrix (``n <= N-2``)."""
    out = x.cores[-1][..., 0]
    for c in reversed(x.cores[n + 1 : -1]):
        out = train_contract(c, out)
    return reshape(out, (out.shape[0], -1))


def psi_left_oracle(x, factors, n):
    if n == 0:
        return np.ones((1, factors[0].shape[1]))
    kr = khatri_rao(*reversed(factors[:n]))
    return left_block(x, n).T @ kr.conj()


def psi_right_oracle(x, factors, n):
    if n == x.order - 1:
        return np.ones((1, factors[0].shape[1]))
    kr = khatri_rao(*reversed(factors[n + 1 :]))
    return right_block(x, n) @ kr.conj()
