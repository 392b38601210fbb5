"""Pure numpy versions of the contraction kernels in ``_kernels.pyx``.

Cores have shape ``(a, i, b)``; factors ``(i, r)``; interface matrices
``(a, r)`` or ``(b, r)``. All kernels cost O(a * i * b * r).
"""
import numpy as np


def psi_right_step(core, factor, psi):
    """out[a, r] = sum_{i, b} core[a, i, b] * conj(factor[i, r]) * psi[b, r]"""
    t = np.tensordot(core, psi, axes=(2, 0))  # (a, i, r)
    return np.einsum("air,ir->ar", t, factor.conj())


def psi_left_step(core, factor, psi):
    """out[b, r] = sum_{a, i} core[a, i, b] * conj(factor[i, r]) * psi[a, r]"""
    t = np.tensordot(psi, core, axes=(0, 0))  # (r, i, b)
    return np.einsum("rib,ir->br", t, factor.conj())


def core_mttkrp(core, psi_left, psi_right):
    """out[i, r] = sum_{a, b} core[a, i, b] * psi_left[a, r] * psi_right[b, r]"""
    t = np.tensordot(core, psi_right, axes=(2, 0))  # (a, i, r)
    return np.einsum("air,ar->ir", t, psi_left)
