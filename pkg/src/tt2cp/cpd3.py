"""Small dense CP engines: DTLD, ALS and best rank-one approximations.

These decompose the order-3 cores produced by TT compression. :func:`cp_als`
works for any order and doubles as the dense baseline in the experiments.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from ._linalg import hadamard_grams, solve_gram
from .report import FitReport, Termination
from .tensor_core import KruskalTensor, fro_norm, khatri_rao, kruskal_full, reshape, unfold

#: relative residual treated as an exact fit
EXACT_RESIDUAL = 1e-13


class DTLDError(ValueError):
    """DTLD could not produce a decomposition (degenerate or infeasible input)."""


@dataclass(frozen=True)
class Cpd3Options:
    max_iters: int = 500
    tol: float = 1e-12
    init: str = "dtld"  # "dtld" or "random"
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.init not in ("dtld", "random"):
            raise ValueError(f"unknown init {self.init!r}")


def best_rank1(m):
    """Best rank-one approximation ``m ~ outer(u, v)``.

    ``u`` is the unit leading left singular vector, phased so that its first
    largest-magnitude entry is real and positive; ``v`` carries the singular
    value.
    """
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError("best_rank1 expects a matrix")
    if not np.any(m):
        raise ValueError("best_rank1 of a zero matrix is undefined")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    u1 = u[:, 0]
    v1 = s[0] * vh[0]
    idx = int(np.argmax(np.abs(u1)))
    phase = u1[idx] / abs(u1[idx])
    return u1 / phase, v1 * phase


def rank1_factors(t):
    """Factor vectors of a (best-effort) rank-one decomposition of ``t``.

    Peels one mode at a time with :func:`best_rank1`; exact when ``t`` has
    rank one. All scale ends up in the last vector.
    """
    t = np.asarray(t)
    shape = t.shape
    if t.ndim == 1:
        return [t.copy()]
    factors = []
    rest = t
    for n in range(t.ndim - 1):
        u, v = best_rank1(reshape(rest, (shape[n], -1)))
        factors.append(u)
        rest = v
    factors.append(rest)
    return factors


def _leading_subspace(m, k):
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, :k]


def dtld(t, r: int) -> KruskalTensor:
    """Closed-form rank-``r`` CPD of an order-3 tensor.

    The two modes with extent >= ``r`` are compressed to their leading
    ``r``-dimensional singular subspaces and the remaining mode to two
    directions; the two resulting ``r x r`` slices are jointly diagonalized by a
    generalized eigendecomposition. The remaining factors come from rank-one
    fits of the rows of the projected unfolding.
    """
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"dtld expects an order-3 tensor, got order {t.ndim}")
    if r < 1:
        raise ValueError("rank must be >= 1")
    is_complex = np.iscomplexobj(t)
    if r == 1:
        f = rank1_factors(t)
        return KruskalTensor([x[:, None] for x in f]).normalize()

    # slice mode: smallest extent, ties go to the middle mode
    order = sorted(range(3), key=lambda m: (t.shape[m], m != 1))
    c = order[0]
    a, b = sorted(m for m in range(3) if m != c)
    if t.shape[a] < r or t.shape[b] < r:
        raise DTLDError(f"rank {r} too large for DTLD on shape {t.shape}")
    if t.shape[c] < 2:
        raise DTLDError(f"DTLD needs at least two slices, shape {t.shape}")
    tp = np.transpose(t, (a, b, c))

    ua = _leading_subspace(unfold(tp, 0), r)
    ub = _leading_subspace(unfold(tp, 1), r)
    uc = _leading_subspace(unfold(tp, 2), 2)
    core = np.einsum("ijk,ip,jq,ks->pqs", tp, ua.conj(), ub.conj(), uc.conj())
    # core[:, :, s] = At diag(ct[s]) Bt^T  ->  eigvecs X = Bt^{-T}
    _, x = scipy.linalg.eig(
        core[:, :, 0].astype(complex), core[:, :, 1].astype(complex), check_finite=False
    )
    if not np.all(np.isfinite(x)):
        raise DTLDError("non-finite eigenvectors")
    if not is_complex:
        idx = np.argmax(np.abs(x), axis=0)
        ph = x[idx, np.arange(r)]
        x = x / (ph / np.abs(ph))
        if np.abs(x.imag).max() > 1e-8 * np.abs(x).max():
            raise DTLDError("complex eigenpairs for a real tensor")
        x = x.real

    # unfold(tp, 1) = B diag(w) (Fc kr Fa)^T and B^+ = X^T ub^H
    z = x.T @ (ub.conj().T @ unfold(tp, 1))
    fa = np.empty((t.shape[a], r), dtype=z.dtype)
    fc = np.empty((t.shape[c], r), dtype=z.dtype)
    for k in range(r):
        row = z[k]
        if not np.any(row):
            raise DTLDError("degenerate component")
        u, v = best_rank1(reshape(row, (t.shape[a], t.shape[c])))
        fa[:, k] = u
        fc[:, k] = v
    # B is defined up to column scale; fit it against the other two factors
    kr = khatri_rao(fc, fa)
    fb = np.linalg.lstsq(kr, unfold(tp, 1).T, rcond=None)[0].T
    factors = [None, None, None]
    factors[a], factors[b], factors[c] = fa, fb, fc
    if not all(np.all(np.isfinite(f)) for f in factors):
        raise DTLDError("non-finite factors")
    return KruskalTensor(factors).normalize()


def _random_init(shape, r, rng, is_complex):
    factors = []
    for i in shape:
        f = rng.standard_normal((i, r))
        if is_complex:
            f = (f + 1j * rng.standard_normal((i, r))) / np.sqrt(2)
        factors.append(f)
    return KruskalTensor(factors).normalize()


def _cost(t, k, tnorm2):
    return 0.5 * fro_norm(t - kruskal_full(k)) ** 2


def cp_als(
    t,
    r: int,
    init: Union[str, KruskalTensor] = "random",
    max_iters: int = 500,
    tol: float = 1e-12,
    seed: int = 0,
) -> tuple[KruskalTensor, FitReport]:
    """Rank-``r`` CP decomposition of a dense tensor by alternating least squares.

    Parameters
    ----------
    t : ndarray
        Real or complex data tensor.
    r : int
        Number of components.
    init : {"random", "dtld"} or KruskalTensor
        Starting point. ``"dtld"`` is only valid for order-3 tensors.
    max_iters : int
        Maximum number of full sweeps.
    tol : float
        Stop when the relative decrease of the cost falls below ``tol``.
    seed : int
        Seed for the random initialization.

    Returns
    -------
    KruskalTensor
        Normalized decomposition.
    FitReport
        One cost entry per sweep, the first being the initial cost.
    """
    t = np.asarray(t)
    if r < 1:
        raise ValueError("rank must be >= 1")
    is_complex = np.iscomplexobj(t)
    if isinstance(init, KruskalTensor):
        k = init
        init_name = "given"
    elif init == "dtld":
        k = dtld(t, r)
        init_name = "dtld"
    elif init == "random":
        k = _random_init(t.shape, r, np.random.default_rng(seed), is_complex)
        init_name = "random"
    else:
        raise ValueError(f"unknown init {init!r}")

    factors = list(k.absorb_weights(0).factors)
    if is_complex:
        factors = [f.astype(np.complex128) for f in factors]
    n_order = t.ndim
    tnorm2 = fro_norm(t) ** 2
    report = FitReport(init=init_name)
    cost = _cost(t, KruskalTensor(factors), tnorm2)
    report.cost_trace.append(cost)
    unfoldings = [unfold(t, n) for n in range(n_order)]

    if tnorm2 == 0 or np.sqrt(2 * cost / tnorm2) <= EXACT_RESIDUAL:
        report.termination = Termination.EXACT
    else:
        for it in range(max_iters):
            for n in range(n_order):
                others = [factors[m] for m in reversed(range(n_order)) if m != n]
                m = unfoldings[n] @ khatri_rao(*others).conj()
                gamma = hadamard_grams(factors, n)
                factors[n], ridge = solve_gram(gamma, m)
                report.ridge_used |= ridge
            # keep factors 1.. unit norm; factor 0 is recomputed first next sweep
            for n in range(1, n_order):
                norms = np.linalg.norm(factors[n], axis=0)
                norms = np.where(norms > 0, norms, 1.0)
                factors[n] = factors[n] / norms
                factors[0] = factors[0] * norms
            prev, cost = cost, _cost(t, KruskalTensor(factors), tnorm2)
            report.cost_trace.append(cost)
            report.sweeps = it + 1
            if np.sqrt(2 * cost / tnorm2) <= EXACT_RESIDUAL:
                report.termination = Termination.EXACT
                break
            if abs(prev - cost) <= tol * prev:
                report.termination = Termination.TOLERANCE
                break
        else:
            report.termination = Termination.MAX_ITERATIONS
    out = KruskalTensor(factors).normalize()
    report.final_rel_error = np.sqrt(2 * report.cost_trace[-1] / tnorm2) if tnorm2 else 0.0
    return out, report


def cp_als3(t, r: int, opts: Optional[Cpd3Options] = None) -> tuple[KruskalTensor, FitReport]:
    """Order-3 ALS started from DTLD (or a seeded random point)."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError(f"cp_als3 expects an order-3 tensor, got order {t.ndim}")
    opts = opts or Cpd3Options()
    return cp_als(t, r, init=opts.init, max_iters=opts.max_iters, tol=opts.tol, seed=opts.seed)


def cpd3_robust(t, r: int, opts: Optional[Cpd3Options] = None, restarts: int = 5):
    """DTLD + ALS, falling back to the best of ``restarts`` random starts.

    Returns ``(ktensor, report, used_fallback)``.
    """
    opts = opts or Cpd3Options()
    if opts.init == "dtld":
        try:
            k, rep = cp_als3(t, r, opts)
            if np.all(np.isfinite(k.weights)):
                return k, rep, False
        except DTLDError as exc:
            warnings.warn(f"DTLD failed ({exc}); falling back to random restarts", RuntimeWarning)
    best = None
    for j in range(restarts):
        o = Cpd3Options(opts.max_iters, opts.tol, "random", opts.seed + j)
        k, rep = cp_als3(t, r, o)
        if best is None or rep.cost_trace[-1] < best[1].cost_trace[-1]:
            best = (k, rep)
    return best[0], best[1], True
