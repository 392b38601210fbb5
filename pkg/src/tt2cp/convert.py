"""Conversions between Kruskal and tensor-train representations.

``kt_to_tt`` and ``tt_to_kt_full`` are exact structural rewrites.
``tt_to_cp_exact`` recovers a rank-``R`` K-tensor from a TT whose cores come
from an exact rank-``R`` model, by decomposing the order-3 cores and stitching
their factors together. ``tt_to_cp_sequential`` walks the train once and peels
one rank-one slice per component and core.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .cpd3 import Cpd3Options, best_rank1, cpd3_robust, rank1_factors
from .tensor_core import KruskalTensor, TTTensor, reshape, train_contract
from .tt import GroupedTT, regroup_for_sequential

#: columns allowed in ``tt_to_kt_full`` before refusing
MAX_FULL_COLUMNS = 10**6
#: off-monomial mass above which a permutation repair is flagged
REPAIR_THRESHOLD = 0.3


class ConversionWarning(RuntimeWarning):
    """A conversion finished but its result should not be trusted blindly."""


@dataclass(frozen=True, eq=False)
class PermScale:
    """Monomial matrix ``diag(gamma) P`` with ``P[r, perm[r]] = 1``."""

    perm: np.ndarray
    gamma: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        perm = np.asarray(self.perm)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValueError("perm is not a permutation")
        if np.any(np.asarray(self.gamma) == 0):
            raise ValueError("gamma entries must be nonzero")

    def matrix(self) -> np.ndarray:
        r = len(self.perm)
        m = np.zeros((r, r), dtype=np.asarray(self.gamma).dtype)
        m[np.arange(r), self.perm] = self.gamma
        return m


@dataclass
class ConversionInfo:
    """Diagnostics returned by ``tt_to_cp_exact(..., return_info=True)``."""

    low_confidence: bool = False
    repair_residuals: list = field(default_factory=list)
    core_fallbacks: int = 0
    interior: tuple = ()


def kt_to_tt(k: KruskalTensor) -> TTTensor:
    """TT with bond ranks ``(1, R, ..., R, 1)`` representing the same tensor.

    The weights are folded into the first core.
    """
    if k.order < 3:
        raise ValueError(f"kt_to_tt needs order >= 3, got {k.order}")
    r = k.rank
    f = k.factors
    cores = [(f[0] * k.weights)[None, :, :]]
    for a in f[1:-1]:
        core = np.zeros((r, a.shape[0], r), dtype=a.dtype)
        idx = np.arange(r)
        core[idx, :, idx] = a.T
        cores.append(core)
    cores.append(f[-1].T[:, :, None])
    return TTTensor(cores)


def tt_to_kt_full(x: TTTensor, max_columns: int = MAX_FULL_COLUMNS) -> KruskalTensor:
    """Expand every bond index combination of ``x`` into a K-tensor column.

    Columns are ordered with the first internal bond index running fastest.
    """
    internal = x.ranks[1:-1]
    ncols = int(np.prod(internal, dtype=np.int64))
    if ncols > max_columns:
        raise ValueError(f"{ncols} columns exceed the cap of {max_columns}")
    # multi[n] is the value of bond n (0..N) for each column
    grid = np.indices(internal).reshape(len(internal), -1, order="F")
    zeros = np.zeros((1, ncols), dtype=int)
    multi = np.vstack([zeros, grid, zeros])
    factors = [core[multi[n], :, multi[n + 1]].T for n, core in enumerate(x.cores)]
    return KruskalTensor(factors)


def match_permutation(m) -> PermScale:
    """Greedy monomial fit: repeatedly take the largest remaining ``|m[r, c]|``."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("match_permutation expects a square matrix")
    r = m.shape[0]
    if r == 0:
        raise ValueError("empty matrix")
    work = np.abs(m).astype(float)
    perm = np.empty(r, dtype=int)
    for _ in range(r):
        i, j = np.unravel_index(np.argmax(work), work.shape)
        perm[i] = j
        work[i, :] = -1.0
        work[:, j] = -1.0
    gamma = m[np.arange(r), perm].copy()
    gamma = np.where(gamma == 0, np.finfo(float).tiny, gamma)
    ps = PermScale(perm, gamma)
    denom = np.linalg.norm(m)
    resid = np.linalg.norm(m - ps.matrix()) / denom if denom else 0.0
    return PermScale(perm, gamma, float(resid))


def _split_rank1(z, shape):
    """Factor each column of ``z`` as a rank-one tensor of ``shape``."""
    r = z.shape[1]
    out = [np.empty((i, r), dtype=z.dtype) for i in shape]
    for c in range(r):
        for f, v in zip(out, rank1_factors(reshape(z[:, c], shape))):
            f[:, c] = v
    return out


def _interior_span(ranks, r):
    """First and last core whose two bonds both equal ``r``."""
    full = [n for n in range(len(ranks) - 1) if ranks[n] == r and ranks[n + 1] == r]
    if not full:
        return None
    lo, hi = full[0], full[-1]
    if full != list(range(lo, hi + 1)):
        return None
    return lo, hi


def tt_to_cp_exact(
    x: TTTensor,
    r: int,
    opts: Optional[Cpd3Options] = None,
    return_info: bool = False,
) -> Union[KruskalTensor, tuple[KruskalTensor, ConversionInfo]]:
    """Rank-``r`` K-tensor from a TT of an (approximately) rank-``r`` tensor.

    Every core whose two bonds equal ``r`` gets its own order-3 CPD
    ``[[lam; Q, A, S]]``. Neighbouring decompositions are aligned by reading
    the permutation and scale off ``S_n^T Q_{n+1}``. The cores left of the
    first such core (and right of the last) are contracted with ``Q`` (or
    ``S``) and split into rank-one pieces, which covers TT-SVD outputs where
    the outer bonds are capped by the mode sizes.

    Parameters
    ----------
    x : TTTensor
        Order ``N >= 3`` tensor train.
    r : int
        Target rank.
    opts : Cpd3Options, optional
        Settings for the core CPDs.
    return_info : bool
        Also return a :class:`ConversionInfo`.

    Raises
    ------
    ValueError
        If no core has both bond ranks equal to ``r`` or some bond exceeds it.
    """
    opts = opts or Cpd3Options()
    if x.order < 3:
        raise ValueError("exact conversion needs order >= 3")
    ranks = x.ranks
    if max(ranks) > r:
        raise ValueError(f"bond ranks {ranks} exceed the target rank {r}")
    info = ConversionInfo()
    cores = x.cores
    n_order = x.order

    if r == 1:
        factors = [c[0, :, 0][:, None] for c in cores]
        k = KruskalTensor(factors).normalize()
        return (k, info) if return_info else k

    span = _interior_span(ranks, r)
    if span is None:
        raise ValueError(f"bond ranks {ranks} have no core with both bonds equal to {r}")
    lo, hi = span
    info.interior = (lo, hi)

    cpds = []
    for n in range(lo, hi + 1):
        k, _, fell_back = cpd3_robust(cores[n], r, opts)
        info.core_fallbacks += int(fell_back)
        q, a, s = (f.copy() for f in k.factors)
        cpds.append([q, a, s, k.weights.astype(np.result_type(k.weights, q)).copy()])

    # align each core CPD with its left neighbour
    for j in range(len(cpds) - 1):
        s_prev = cpds[j][2]
        q, a, s, lam = cpds[j + 1]
        ps = match_permutation(s_prev.T @ q)
        info.repair_residuals.append(ps.residual)
        q, a, s, lam = q[:, ps.perm], a[:, ps.perm], s[:, ps.perm], lam[ps.perm]
        cpds[j + 1] = [q / ps.gamma, a, s, lam * ps.gamma]

    lam_total = np.prod([c[3] for c in cpds], axis=0)
    factors = []

    q_first = cpds[0][0]
    left = cores[0]
    for c in cores[1:lo]:
        left = train_contract(left, c)
    left_shape = x.shape[:lo]
    zl = reshape(left, (-1, r)) @ q_first
    factors.extend(_split_rank1(zl, left_shape))

    factors.extend(c[1] for c in cpds)

    s_last = cpds[-1][2]
    right = cores[n_order - 1]
    for c in reversed(cores[hi + 1 : n_order - 1]):
        right = train_contract(c, right)
    right_shape = x.shape[hi + 1 :]
    zr = reshape(right, (r, -1)).T @ s_last * lam_total
    factors.extend(_split_rank1(zr, right_shape))

    if info.repair_residuals and max(info.repair_residuals) > REPAIR_THRESHOLD:
        info.low_confidence = True
        # constant text so the default filter reports it once per call site
        warnings.warn(
            "permutation repair left large off-monomial mass; the core CPDs may not be unique "
            "(see ConversionInfo.repair_residuals)",
            ConversionWarning,
        )
    k = KruskalTensor(factors).normalize()
    return (k, info) if return_info else k


def tt_to_cp_sequential(
    x: Union[TTTensor, GroupedTT], r: int, opts: Optional[Cpd3Options] = None
) -> KruskalTensor:
    """Rank-``r`` K-tensor by one CPD of the merged head core and rank-one peels.

    The head ``I0 x I1 x R`` core is decomposed as ``[[A0, A1, S]]``. For each
    later core every component ``r`` contracts ``s_r`` into the core and takes
    the best rank-one approximation of the resulting matrix; its left vector
    is the next factor column and its right vector the next ``s_r``.
    """
    opts = opts or Cpd3Options()
    g = x if isinstance(x, GroupedTT) else regroup_for_sequential(x)
    if g.head.shape[2] > r:
        raise ValueError(f"head bond {g.head.shape[2]} exceeds the target rank {r}")
    k, _, _ = cpd3_robust(g.head, r, opts)
    a0, a1, s = k.factors
    a0 = a0 * k.weights
    factors = [a0, a1]
    s = s.copy()
    for core in list(g.middle) + [g.tail]:
        a_next = np.empty((core.shape[1], r), dtype=np.result_type(core, s))
        s_next = np.empty((core.shape[2], r), dtype=a_next.dtype)
        # slices[r] = s_r^T . core
        slices = np.tensordot(s, core, axes=([0], [0]))
        for c in range(r):
            sl = slices[c]
            if not np.any(np.abs(sl) > 0):
                raise ValueError(f"component {c} collapsed to a zero slice")
            u, v = best_rank1(sl)
            a_next[:, c] = u
            s_next[:, c] = v
        factors.append(a_next)
        s = s_next
    factors.append(s)
    return KruskalTensor(factors).normalize()
