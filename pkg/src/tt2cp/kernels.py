"""Kernel selection: compiled Cython kernels when built, numpy otherwise.

Set ``TT2CP_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "numpy"
_compiled = None
if os.environ.get("TT2CP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled

        BACKEND = "cython"
    except ImportError:  # extension not built
        _compiled = None


def _prep(*arrays):
    dtype = np.complex128 if any(np.iscomplexobj(a) for a in arrays) else np.float64
    return [np.ascontiguousarray(a, dtype=dtype) for a in arrays]


def psi_right_step(core, factor, psi):
    if _compiled is None:
        return _kernels_py.psi_right_step(core, factor, psi)
    return _compiled.psi_right_step(*_prep(core, factor, psi))


def psi_left_step(core, factor, psi):
    if _compiled is None:
        return _kernels_py.psi_left_step(core, factor, psi)
    return _compiled.psi_left_step(*_prep(core, factor, psi))


def core_mttkrp(core, psi_left, psi_right):
    if _compiled is None:
        return _kernels_py.core_mttkrp(core, psi_left, psi_right)
    return _compiled.core_mttkrp(*_prep(core, psi_left, psi_right))
