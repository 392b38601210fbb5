"""Rank-R CP fitting of a tensor given in TT form, without materializing it.

The ALS update for factor ``n`` needs the interface matrices

    psi_left[n][a, r]  = <G_0 ... G_{n-1} | conj a^(0)_r ... conj a^(n-1)_r>
    psi_right[n][b, r] = <G_{n+1} ... G_{N-1} | conj a^(n+1)_r ... conj a^(N-1)_r>

which are built one core at a time. Sweeping left to right keeps the left
side current while the right side was filled by the previous right-to-left
pass, so each factor update touches a single core.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from ._linalg import hadamard_grams, solve_gram
from .convert import _interior_span, kt_to_tt, tt_to_cp_exact, tt_to_cp_sequential
from .cpd3 import Cpd3Options
from .report import FitReport, Termination
from .tensor_core import KruskalTensor, TTTensor, khatri_rao, unfold
from .tt import tt_norm, tt_sum

INITS = ("auto", "exact_convert", "sequential_convert", "random", "given")
#: fast cost below EXACT_FLOOR * ||x||^2 is rounding noise; recheck it exactly
EXACT_FLOOR = 64 * np.finfo(float).eps
#: relative residual accepted as an exact fit
EXACT_RESIDUAL = 1e-12


@dataclass(frozen=True)
class FitOptions:
    max_sweeps: int = 500
    tol: float = 1e-10
    init: str = "auto"
    seed: int = 0
    initial: Optional[KruskalTensor] = None
    cpd3: Cpd3Options = field(default_factory=Cpd3Options)

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.init not in INITS:
            raise ValueError(f"unknown init {self.init!r}")
        if self.init == "given" and self.initial is None:
            raise ValueError("init='given' needs an initial KruskalTensor")


def psi_right_step(core, factor, psi):
    """Interface to the right of a core from the one to the right of ``core``."""
    return kernels.psi_right_step(core, factor, psi)


def psi_left_step(core, factor, psi):
    """Interface to the left of the core following ``core``."""
    return kernels.psi_left_step(core, factor, psi)


class ContractionCache:
    """Left and right interface matrices with per-entry validity flags."""

    def __init__(self, x: TTTensor, factors: List[np.ndarray]):
        self.x = x
        n_order = x.order
        r = factors[0].shape[1]
        dtype = np.result_type(x.dtype, *factors)
        self.psi_left: list = [None] * n_order
        self.psi_right: list = [None] * n_order
        self.left_valid = [False] * n_order
        self.right_valid = [False] * n_order
        self.psi_left[0] = np.ones((1, r), dtype=dtype)
        self.psi_right[-1] = np.ones((1, r), dtype=dtype)
        self.left_valid[0] = self.right_valid[-1] = True

    def update_left(self, n: int, factors) -> None:
        """Recompute ``psi_left[n]`` from ``psi_left[n - 1]``."""
        self.psi_left[n] = psi_left_step(self.x.cores[n - 1], factors[n - 1], self.psi_left[n - 1])
        self.left_valid[n] = True

    def update_right(self, n: int, factors) -> None:
        """Recompute ``psi_right[n]`` from ``psi_right[n + 1]``."""
        self.psi_right[n] = psi_right_step(self.x.cores[n + 1], factors[n + 1], self.psi_right[n + 1])
        self.right_valid[n] = True

    def fill_right(self, factors) -> None:
        for n in range(self.x.order - 2, -1, -1):
            self.update_right(n, factors)

    def fill_left(self, factors) -> None:
        for n in range(1, self.x.order):
            self.update_left(n, factors)

    def factor_changed(self, n: int) -> None:
        """Invalidate every interface that depends on factor ``n``."""
        for m in range(n + 1, self.x.order):
            self.left_valid[m] = False
        for m in range(n):
            self.right_valid[m] = False

    def mttkrp(self, n: int) -> np.ndarray:
        if not (self.left_valid[n] and self.right_valid[n]):
            raise RuntimeError(f"interfaces for mode {n} are stale")
        return kernels.core_mttkrp(self.x.cores[n], self.psi_left[n], self.psi_right[n])


def gram_product(factors, n: int) -> np.ndarray:
    """Hadamard product of ``A^H A`` over every factor but ``n``."""
    return hadamard_grams(factors, n)


def als_factor_update(n: int, cache: ContractionCache, grams) -> tuple:
    """Least-squares optimal factor ``n`` given the others.

    ``grams`` is the Hadamard product of the other factors' Gram matrices.
    Returns ``(A_n, M, ridge_used)`` where ``M`` is the right-hand side.
    """
    m = cache.mttkrp(n)
    a, ridge = solve_gram(grams, m)
    return a, m, ridge


def fast_cost(norm2: float, factor, m) -> float:
    """Cost right after ``factor`` solved its normal equations with rhs ``m``."""
    return 0.5 * (norm2 - np.vdot(factor, m).real)


def model_cost(norm2: float, factor, m, grams) -> float:
    """Cost for any ``factor`` given its rhs ``m`` and the other Grams."""
    fit = np.vdot(factor, m).real
    model2 = np.vdot(factor, factor @ grams.conj()).real
    return 0.5 * (norm2 - 2 * fit + model2)


def exact_cost(x: TTTensor, k: KruskalTensor) -> float:
    """``0.5 * ||x - k||^2`` through an orthogonalized difference train."""
    diff = tt_sum(x, kt_to_tt(k), 1.0, -1.0)
    return 0.5 * tt_norm(diff) ** 2


def structured_gradient(x: TTTensor, factors, n: int) -> np.ndarray:
    """Data term of the cost gradient for factor ``n``.

    Returns ``M_n`` with ``M_n[i, r] = <x, e_i o (a_r with mode n removed)>``;
    the full gradient with respect to ``conj(A_n)`` is ``A_n conj(Gamma_n) - M_n``.
    """
    if len(factors) != x.order:
        raise ValueError("need one factor per mode")
    for f, i in zip(factors, x.shape):
        if f.shape[0] != i:
            raise ValueError("factor rows do not match the tensor shape")
    cache = ContractionCache(x, list(factors))
    for m in range(1, n + 1):
        cache.update_left(m, factors)
    for m in range(x.order - 2, n - 1, -1):
        cache.update_right(m, factors)
    return cache.mttkrp(n)


def cost_gradient(x: TTTensor, factors, n: int) -> np.ndarray:
    """Gradient of ``0.5 * ||x - [[A]]||^2`` with respect to ``conj(A_n)``."""
    g = gram_product(factors, n)
    return factors[n] @ g.conj() - structured_gradient(x, factors, n)


def _random_factors(shape, r, rng, is_complex):
    out = []
    for i in shape:
        f = rng.standard_normal((i, r))
        if is_complex:
            f = (f + 1j * rng.standard_normal((i, r))) / np.sqrt(2)
        out.append(f)
    return out


def _initial(x: TTTensor, r: int, opts: FitOptions):
    init = opts.init
    if init == "given":
        k = opts.initial
        if k.shape != x.shape or k.rank != r:
            raise ValueError("initial K-tensor does not match the tensor shape or rank")
        return k, "given"
    if init == "auto":
        if max(x.ranks) <= r and (r == 1 or _interior_span(x.ranks, r) is not None):
            init = "exact_convert"
        elif x.order >= 4 and max(x.ranks) <= r:
            init = "sequential_convert"
        else:
            init = "random"
    if init == "exact_convert":
        return tt_to_cp_exact(x, r, opts.cpd3), init
    if init == "sequential_convert":
        return tt_to_cp_sequential(x, r, opts.cpd3), init
    rng = np.random.default_rng(opts.seed)
    is_complex = np.iscomplexobj(np.empty(0, dtype=x.dtype))
    return KruskalTensor(_random_factors(x.shape, r, rng, is_complex)), "random"


def _normalize_except(factors, keep: int):
    """Scale columns of every factor but ``keep`` to unit norm; return the scales."""
    total = np.ones(factors[0].shape[1])
    scales = {}
    for k, f in enumerate(factors):
        if k == keep:
            continue
        s = np.linalg.norm(f, axis=0)
        s = np.where(s > 0, s, 1.0)
        factors[k] = f / s
        scales[k] = s
        total = total * s
    factors[keep] = factors[keep] * total
    return scales


def fit_tt2cp(
    x: TTTensor, r: int, opts: Optional[FitOptions] = None
) -> tuple[KruskalTensor, FitReport]:
    """Fit a rank-``r`` K-tensor to ``x`` by ALS with two-sided sweeps.

    Parameters
    ----------
    x : TTTensor
        Data tensor in TT form.
    r : int
        CP rank.
    opts : FitOptions, optional
        ``init="auto"`` converts the train directly when its bonds allow it
        and otherwise starts from a seeded random point.

    Returns
    -------
    KruskalTensor
        Normalized result.
    FitReport
        ``cost_trace[0]`` is the initial cost; one entry per half-sweep after
        that. ``sweeps`` counts full sweeps, a trailing half included.
    """
    opts = opts or FitOptions()
    if r < 1:
        raise ValueError("rank must be >= 1")
    n_order = x.order
    if n_order < 2:
        raise ValueError("fit_tt2cp needs order >= 2")

    k0, init_name = _initial(x, r, opts)
    dtype = np.result_type(x.dtype, k0.dtype)
    factors = [f.astype(dtype, copy=True) for f in k0.absorb_weights(0).factors]
    report = FitReport(init=init_name)
    norm2 = tt_norm(x) ** 2
    floor = EXACT_FLOOR * norm2

    cache = ContractionCache(x, factors)
    cache.fill_right(factors)
    grams = [f.conj().T @ f for f in factors]

    def hadamard_others(n):
        g = np.ones((r, r), dtype=dtype)
        for k, gk in enumerate(grams):
            if k != n:
                g = g * gk
        return g

    exact_level = 0.5 * EXACT_RESIDUAL**2 * norm2

    def settle(c):
        # below the floor the fast formula is all cancellation error
        if c <= floor:
            c = exact_cost(x, KruskalTensor(list(factors)))
        return c

    g0 = hadamard_others(0)
    cost = settle(max(model_cost(norm2, factors[0], cache.mttkrp(0), g0), 0.0))
    report.cost_trace.append(cost)

    def update(n):
        a, m, ridge = als_factor_update(n, cache, hadamard_others(n))
        factors[n] = a
        grams[n] = a.conj().T @ a
        cache.factor_changed(n)
        report.ridge_used |= ridge
        return m

    halves = 0
    if norm2 == 0 or cost <= exact_level:
        report.termination = Termination.EXACT
    else:
        report.termination = Termination.MAX_ITERATIONS
        for halves in range(1, 2 * opts.max_sweeps + 1):
            if halves % 2 == 1:
                order = range(0, n_order - 1)
                for n in order:
                    if n > 0:
                        cache.update_left(n, factors)
                    m = update(n)
                cache.update_left(n_order - 1, factors)
                last, nxt = n_order - 2, n_order - 1
            else:
                for n in range(n_order - 1, 0, -1):
                    if n < n_order - 1:
                        cache.update_right(n, factors)
                    m = update(n)
                cache.update_right(0, factors)
                last, nxt = 1, 0
            prev, cost = cost, settle(max(fast_cost(norm2, factors[last], m), 0.0))
            report.cost_trace.append(cost)

            scales = _normalize_except(factors, nxt)
            for k, s in scales.items():
                grams[k] = grams[k] / np.outer(s, s)
            grams[nxt] = factors[nxt].conj().T @ factors[nxt]
            # the next half-sweep reuses the interfaces built by this one
            acc = np.ones(r)
            if nxt == n_order - 1:
                for n in range(1, n_order):
                    acc = acc * scales[n - 1]
                    cache.psi_left[n] = cache.psi_left[n] / acc
            else:
                for n in range(n_order - 2, -1, -1):
                    acc = acc * scales[n + 1]
                    cache.psi_right[n] = cache.psi_right[n] / acc

            if cost <= exact_level:
                report.termination = Termination.EXACT
                break
            if abs(prev - cost) <= opts.tol * prev:
                report.termination = Termination.TOLERANCE
                break
    report.sweeps = (halves + 1) // 2
    k = KruskalTensor(factors).normalize()
    report.final_rel_error = float(np.sqrt(2 * report.cost_trace[-1] / norm2)) if norm2 else 0.0
    return k, report


def dense_cost(x: TTTensor, factors) -> float:
    """Reference cost by materializing both tensors (small inputs only)."""
    from .tensor_core import fro_norm, kruskal_full, tt_full

    return 0.5 * fro_norm(tt_full(x) - kruskal_full(KruskalTensor(list(factors)))) ** 2


def dense_mttkrp(y, factors, n: int) -> np.ndarray:
    """``unfold(y, n) @ conj(khatri_rao of the other factors)`` on a dense array."""
    others = [factors[m] for m in reversed(range(len(factors))) if m != n]
    return unfold(y, n) @ khatri_rao(*others).conj()
