"""Dense tensors, Kruskal and tensor-train containers, multilinear primitives.

Dense tensors are plain :class:`numpy.ndarray` objects. Every operation that
depends on a linear layout (unfolding, reshaping, file I/O) uses
first-index-fastest (Fortran) order, so the mode-0 unfolding of a tensor is a
reinterpretation of its buffer and

    unfold(kruskal_full(K), n) == A[n] @ diag(w) @ khatri_rao(A[N-1], ..., A[n+1], A[n-1], ..., A[0]).T

holds with the Khatri-Rao product taken in descending mode order.

Modes are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operands have incompatible shapes."""


def _as_tensor(t) -> np.ndarray:
    t = np.asarray(t)
    if not np.iscomplexobj(t):
        t = t.astype(np.float64, copy=False)
    elif t.dtype != np.complex128:
        t = t.astype(np.complex128)
    return t


def result_dtype(*arrays) -> np.dtype:
    """float64 unless any operand is complex."""
    if any(np.iscomplexobj(a) for a in arrays):
        return np.dtype(np.complex128)
    return np.dtype(np.float64)


def unfold(t, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding.

    Row ``i`` is the vectorization of ``t`` with index ``mode`` fixed at ``i``;
    the remaining modes run in ascending order, earliest mode fastest.
    """
    t = np.asarray(t)
    if not 0 <= mode < t.ndim:
        raise ValueError(f"mode {mode} out of range for order-{t.ndim} tensor")
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(m, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    shape = tuple(int(s) for s in shape)
    if not 0 <= mode < len(shape):
        raise ValueError(f"mode {mode} out of range for order-{len(shape)} tensor")
    m = np.asarray(m)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    if m.size != int(np.prod(shape)) or m.shape[0] != shape[mode]:
        raise ShapeError(f"cannot fold {m.shape} into {shape} along mode {mode}")
    return np.moveaxis(np.reshape(m, moved, order="F"), 0, mode)


def reshape(t, new_shape: Sequence[int]) -> np.ndarray:
    """Reinterpret the first-index-fastest buffer of ``t`` under ``new_shape``.

    One extent may be ``-1`` and is then inferred.
    """
    t = np.asarray(t)
    new_shape = tuple(int(s) for s in new_shape)
    if new_shape.count(-1) == 1:
        known = -int(np.prod(new_shape))
        if known > 0 and t.size % known == 0:
            new_shape = tuple(t.size // known if s == -1 else s for s in new_shape)
    if int(np.prod(new_shape)) != t.size or min(new_shape, default=0) < 0:
        raise ShapeError(f"cannot reshape {t.shape} ({t.size} elements) to {new_shape}")
    return np.reshape(t, new_shape, order="F")


def vec(t) -> np.ndarray:
    """First-index-fastest vectorization."""
    return np.reshape(np.asarray(t), -1, order="F")


def train_contract(a, b) -> np.ndarray:
    """Contract the last mode of ``a`` with the first mode of ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError("train contraction needs tensors of order >= 1")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"bond mismatch: {a.shape[-1]} != {b.shape[0]}")
    return np.tensordot(a, b, axes=(a.ndim - 1, 0))


def kronecker(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def khatri_rao(*matrices) -> np.ndarray:
    """Column-wise Kronecker product; the last operand varies fastest.

    ``khatri_rao(A, B)[:, r] == kron(A[:, r], B[:, r])``.
    """
    if len(matrices) == 1 and not isinstance(matrices[0], np.ndarray):
        matrices = tuple(matrices[0])
    mats = [np.asarray(m) for m in matrices]
    if not mats:
        raise ValueError("khatri_rao needs at least one matrix")
    ncols = mats[0].shape[1]
    for m in mats:
        if m.ndim != 2 or m.shape[1] != ncols:
            raise ShapeError("khatri_rao operands must be matrices with equal column counts")

    def _kr2(x, y):
        return (x[:, None, :] * y[None, :, :]).reshape(-1, ncols)

    return reduce(_kr2, mats)


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def inner(a, b):
    """<a, b> = sum(a * conj(b)); conjugate-linear in the second argument."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"inner product shape mismatch: {a.shape} vs {b.shape}")
    val = np.vdot(b, a)
    return val if np.iscomplexobj(val) else float(val)


def fro_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a).ravel()))


@dataclass(frozen=True, eq=False)
class KruskalTensor:
    """Weighted sum of rank-one tensors ``sum_r w[r] A[0][:, r] o ... o A[N-1][:, r]``."""

    factors: tuple
    weights: np.ndarray

    def __init__(self, factors, weights=None):
        factors = tuple(_as_tensor(f) for f in factors)
        if not factors:
            raise ValueError("a Kruskal tensor needs at least one factor")
        rank = factors[0].shape[1] if factors[0].ndim == 2 else -1
        for f in factors:
            if f.ndim != 2 or f.shape[1] != rank:
                raise ShapeError("all factors must be matrices with the same column count")
        if weights is None:
            weights = np.ones(rank)
        weights = _as_tensor(weights).reshape(-1)
        if weights.shape[0] != rank:
            raise ShapeError(f"{weights.shape[0]} weights for rank {rank}")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", weights)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def dtype(self) -> np.dtype:
        return result_dtype(self.weights, *self.factors)

    def full(self) -> np.ndarray:
        return kruskal_full(self)

    def normalize(self) -> "KruskalTensor":
        """Unit-norm columns and positive real weights.

        Column norms move into the weights; any sign or phase left in a weight
        is pushed into the first factor.
        """
        w = self.weights.astype(result_dtype(self.weights, *self.factors), copy=True)
        factors = []
        for f in self.factors:
            norms = np.linalg.norm(f, axis=0)
            safe = np.where(norms > 0, norms, 1.0)
            factors.append(f / safe)
            w = w * norms
        mag = np.abs(w)
        phase = np.where(mag > 0, w / np.where(mag > 0, mag, 1.0), 1.0)
        if np.iscomplexobj(phase) and not np.iscomplexobj(factors[0]):
            factors[0] = factors[0].astype(np.complex128)
        if not np.iscomplexobj(phase):
            phase = phase.real
        factors[0] = factors[0] * phase
        return KruskalTensor(factors, mag)

    def absorb_weights(self, mode: int = 0) -> "KruskalTensor":
        """Move the weights into factor ``mode``; the weights become ones."""
        factors = list(self.factors)
        factors[mode] = factors[mode] * self.weights
        return KruskalTensor(factors, np.ones(self.rank))

    def permute(self, perm) -> "KruskalTensor":
        perm = np.asarray(perm)
        return KruskalTensor([f[:, perm] for f in self.factors], self.weights[perm])


def kruskal_full(k: KruskalTensor) -> np.ndarray:
    """Materialize a Kruskal tensor."""
    f0 = k.factors[0] * k.weights
    if k.order == 1:
        return f0.sum(axis=1)
    rest = khatri_rao(*reversed(k.factors[1:]))
    mat = f0 @ rest.T
    return reshape(mat, k.shape)


@dataclass(frozen=True, eq=False)
class TTTensor:
    """Chain of order-3 cores ``G[n]`` of shape ``(R[n], I[n], R[n+1])`` with ``R[0] = R[N] = 1``."""

    cores: tuple

    def __init__(self, cores):
        cores = tuple(_as_tensor(c) for c in cores)
        if not cores:
            raise ValueError("a TT tensor needs at least one core")
        for n, c in enumerate(cores):
            if c.ndim != 3:
                raise ShapeError(f"core {n} has order {c.ndim}, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ShapeError("boundary bond dimensions must be 1")
        for n in range(len(cores) - 1):
            if cores[n].shape[2] != cores[n + 1].shape[0]:
                raise ShapeError(
                    f"bond mismatch between cores {n} and {n + 1}: "
                    f"{cores[n].shape[2]} != {cores[n + 1].shape[0]}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def order(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple:
        """Full rank profile ``(R[0], ..., R[N])``."""
        return tuple(c.shape[0] for c in self.cores) + (1,)

    @property
    def dtype(self) -> np.dtype:
        return result_dtype(*self.cores)

    def full(self) -> np.ndarray:
        return tt_full(self)


def tt_full(t: TTTensor) -> np.ndarray:
    """Materialize a TT tensor by left-to-right train contraction."""
    out = t.cores[0][0]
    for core in t.cores[1:]:
        out = train_contract(out, core)
    return out[..., 0]


def tt_full_rtl(t: TTTensor) -> np.ndarray:
    """Right-to-left materialization; used to cross-check :func:`tt_full`."""
    out = t.cores[-1][..., 0]
    for core in reversed(t.cores[:-1]):
        out = train_contract(core, out)
    return out[0]
