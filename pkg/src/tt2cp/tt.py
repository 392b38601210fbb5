"""Tensor-train compression (TT-SVD) and TT utilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor_core import TTTensor, fro_norm, reshape, train_contract, tt_full

#: singular values below this fraction of the largest are always dropped
SVD_FLOOR = 1e-14


@dataclass(frozen=True)
class TTOptions:
    """Truncation controls for :func:`tt_svd`.

    ``max_rank`` caps every bond. ``rel_error`` targets
    ``||y - x||_F <= rel_error * ||y||_F``. When both are given the cap wins and
    the achieved error is only reported.
    """

    max_rank: Optional[int] = None
    rel_error: Optional[float] = None

    def __post_init__(self):
        if self.max_rank is None and self.rel_error is None:
            raise ValueError("TTOptions needs max_rank, rel_error, or both")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {self.max_rank}")
        if self.rel_error is not None and not self.rel_error >= 0:
            raise ValueError(f"rel_error must be >= 0, got {self.rel_error}")


def _choose_rank(s: np.ndarray, delta: float, max_rank: Optional[int]) -> int:
    if s.size == 0 or s[0] == 0:
        return 1
    r = int(np.count_nonzero(s > SVD_FLOOR * s[0]))
    if delta > 0:
        # tail[k] = ||s[k:]||
        tail = np.sqrt(np.cumsum((s[::-1] ** 2))[::-1])
        tail = np.append(tail, 0.0)
        r = min(r, int(np.argmax(tail <= delta)))
    if max_rank is not None:
        r = min(r, max_rank)
    return max(r, 1)


def tt_svd(y, opts: TTOptions) -> TTTensor:
    """Compress ``y`` by sequential truncated SVDs of its unfoldings.

    The relative error budget is split evenly over the ``N - 1`` splits, so each
    truncation discards at most ``rel_error * ||y|| / sqrt(N - 1)``.
    """
    y = np.asarray(y)
    if not np.iscomplexobj(y):
        y = y.astype(np.float64, copy=False)
    n_order = y.ndim
    if n_order < 2:
        raise ValueError("tt_svd needs a tensor of order >= 2")
    if isinstance(opts, dict):
        opts = TTOptions(**opts)
    delta = 0.0
    if opts.rel_error is not None and opts.rel_error > 0:
        delta = opts.rel_error * fro_norm(y) / np.sqrt(n_order - 1)

    cores = []
    r_prev = 1
    c = reshape(y, (y.shape[0], -1))
    for k in range(n_order - 1):
        c = reshape(c, (r_prev * y.shape[k], -1))
        u, s, vh = np.linalg.svd(c, full_matrices=False)
        r = _choose_rank(s, delta, opts.max_rank)
        cores.append(reshape(u[:, :r], (r_prev, y.shape[k], r)))
        c = s[:r, None] * vh[:r]
        r_prev = r
    cores.append(reshape(c, (r_prev, y.shape[-1], 1)))
    return TTTensor(cores)


def tt_rel_error(y, x: TTTensor) -> float:
    """``||y - full(x)||_F / ||y||_F``."""
    y = np.asarray(y)
    if tuple(y.shape) != x.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {x.shape}")
    ny = fro_norm(y)
    if ny == 0:
        raise ValueError("relative error undefined for a zero tensor")
    return fro_norm(y - tt_full(x)) / ny


def tt_norm(x: TTTensor) -> float:
    """Frobenius norm by a left-orthogonalizing QR sweep (no materialization).

    The sweep keeps the accumulated part orthonormal, so the result is accurate
    relative to the norm itself even when ``x`` is a difference of nearly
    equal tensors.
    """
    carry = x.cores[0]
    for core in x.cores[1:]:
        a, i, b = carry.shape
        q, r = np.linalg.qr(carry.reshape(a * i, b))
        carry = np.tensordot(r, core, axes=(1, 0))
    return fro_norm(carry)


def tt_gram_norm(x: TTTensor) -> float:
    """Frobenius norm by chaining the core Gram contractions."""
    w = np.ones((1, 1), dtype=x.dtype)
    for core in x.cores:
        # w[a, a'] -> sum_i core[a, i, b] conj(core[a', i, b'])
        t = np.tensordot(w, core, axes=(0, 0))
        w = np.tensordot(t, core.conj(), axes=([0, 1], [0, 1]))
    return float(np.sqrt(max(w[0, 0].real, 0.0)))


def tt_sum(a: TTTensor, b: TTTensor, alpha=1.0, beta=1.0) -> TTTensor:
    """TT representation of ``alpha * a + beta * b`` with summed bond ranks."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    dtype = np.result_type(a.dtype, b.dtype, np.asarray(alpha), np.asarray(beta))
    n_order = a.order
    if n_order == 1:
        return TTTensor([alpha * a.cores[0] + beta * b.cores[0]])
    cores = []
    for n, (ga, gb) in enumerate(zip(a.cores, b.cores)):
        ra0, i, ra1 = ga.shape
        rb0, _, rb1 = gb.shape
        if n == 0:
            c = np.concatenate([alpha * ga, beta * gb], axis=2).astype(dtype, copy=False)
        elif n == n_order - 1:
            c = np.concatenate([ga, gb], axis=0).astype(dtype, copy=False)
        else:
            c = np.zeros((ra0 + rb0, i, ra1 + rb1), dtype=dtype)
            c[:ra0, :, :ra1] = ga
            c[ra0:, :, ra1:] = gb
        cores.append(c)
    return TTTensor(cores)


@dataclass(frozen=True, eq=False)
class GroupedTT:
    """TT with the two leading and the two trailing modes merged into its end cores.

    ``head`` has shape ``(I0, I1, R2)``, ``middle`` cores are ordinary
    ``(R, I, R)`` cores, ``tail`` has shape ``(R, I[N-2], I[N-1])``.
    """

    head: np.ndarray
    middle: tuple
    tail: np.ndarray

    @property
    def cores(self) -> tuple:
        return (self.head,) + tuple(self.middle) + (self.tail,)

    @property
    def shape(self) -> tuple:
        return (
            self.head.shape[:2]
            + tuple(c.shape[1] for c in self.middle)
            + self.tail.shape[1:]
        )

    @property
    def bond_ranks(self) -> tuple:
        return (self.head.shape[2],) + tuple(c.shape[2] for c in self.middle)

    def full(self) -> np.ndarray:
        out = self.head
        for c in self.middle:
            out = train_contract(out, c)
        return train_contract(out, self.tail)


def regroup_for_sequential(x: TTTensor) -> GroupedTT:
    """Merge ``G0 . G1`` and ``G[N-2] . G[N-1]`` so the TT has ``N - 2`` cores."""
    if x.order < 4:
        raise ValueError(f"regrouping needs order >= 4, got {x.order}")
    head = train_contract(x.cores[0], x.cores[1])[0]
    tail = train_contract(x.cores[-2], x.cores[-1])[..., 0]
    return GroupedTT(head, tuple(x.cores[2:-2]), tail)
