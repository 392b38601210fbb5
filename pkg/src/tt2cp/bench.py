"""Experiment harness: synthetic data, accuracy metrics and batch runs."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np

from .convert import tt_to_cp_exact, tt_to_cp_sequential
from .cpd3 import cp_als
from .fit import FitOptions, fit_tt2cp
from .io import ensure_dir, save_ktensor
from .tensor_core import KruskalTensor, fro_norm, kruskal_full
from .tt import TTOptions, tt_svd

#: SAE reported for numerically identical directions
SAE_CAP_DB = 300.0
#: largest tensor the dense ALS baseline will touch
DENSE_LIMIT = 10**7

KINDS = ("random", "hankel", "hilbert")
CSV_FIELDS = ("trial", "snr_db", "algorithm", "msae_db", "rel_error", "sweeps", "status")


# ---------------------------------------------------------------- metrics


def _angle(x, y) -> float:
    """Angle between the lines spanned by ``x`` and ``y``, in [0, pi/2]."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValueError("SAE of a zero vector is undefined")
    x = x / nx
    y = y / ny
    c = np.vdot(y, x)
    if c != 0:
        y = y * (c / abs(c))
    # 2*atan2 keeps full precision for tiny angles, unlike arccos
    return 2.0 * math.atan2(np.linalg.norm(x - y), np.linalg.norm(x + y))


def _angle_to_db(theta: float) -> float:
    if theta <= 10 ** (-SAE_CAP_DB / 20):
        return SAE_CAP_DB
    return -20.0 * math.log10(theta)


def sae(x, xhat) -> float:
    """Squared angular error in dB, invariant to sign and phase, capped at 300."""
    return _angle_to_db(_angle(x, xhat))


def _abs_cosines(a, ahat):
    a = np.asarray(a)
    ahat = np.asarray(ahat)
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(ahat, axis=0)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("zero column")
    return np.abs(a.conj().T @ ahat) / np.outer(na, nb)


def greedy_match(score) -> np.ndarray:
    """``perm[i]`` = column paired with row ``i``, largest scores first."""
    score = np.array(score, dtype=float)
    r = score.shape[0]
    perm = np.full(r, -1)
    for _ in range(r):
        i, j = np.unravel_index(np.argmax(score), score.shape)
        perm[i] = j
        score[i, :] = -np.inf
        score[:, j] = -np.inf
    return perm


def optimal_match(score) -> np.ndarray:
    """Exhaustive assignment maximizing the summed score (small ``R`` only)."""
    score = np.asarray(score, dtype=float)
    r = score.shape[0]
    if r > 8:
        raise ValueError("optimal_match is exhaustive; use R <= 8")
    rows = np.arange(r)
    best = max(itertools.permutations(range(r)), key=lambda p: score[rows, list(p)].sum())
    return np.array(best)


def msae(a, ahat) -> float:
    """Mean SAE over columns after greedy matching on ``|cos|``."""
    a = np.asarray(a)
    ahat = np.asarray(ahat)
    if a.shape[1] != ahat.shape[1]:
        raise ValueError("column counts differ")
    perm = greedy_match(_abs_cosines(a, ahat))
    return float(np.mean([sae(a[:, i], ahat[:, j]) for i, j in enumerate(perm)]))


def kruskal_msae(k: KruskalTensor, khat: KruskalTensor) -> float:
    """Mean SAE over all modes and columns, with one matching shared by all modes."""
    if k.rank != khat.rank or k.shape != khat.shape:
        raise ValueError("K-tensors differ in rank or shape")
    score = np.zeros((k.rank, k.rank))
    for f, g in zip(k.factors, khat.factors):
        score += np.log(np.maximum(_abs_cosines(f, g), 1e-300))
    perm = greedy_match(score)
    vals = [sae(f[:, i], g[:, j]) for f, g in zip(k.factors, khat.factors) for i, j in enumerate(perm)]
    return float(np.mean(vals))


# ------------------------------------------------------------- generators


def gen_random_kt(n_order: int, extents, r: int, seed: int, complex_valued: bool = False) -> KruskalTensor:
    """Gaussian factors, normalized; identical output for identical arguments."""
    if r < 1:
        raise ValueError("rank must be >= 1")
    if np.isscalar(extents):
        extents = (int(extents),) * n_order
    if len(extents) != n_order:
        raise ValueError("extents do not match the order")
    rng = np.random.default_rng(seed)
    factors = []
    for i in extents:
        f = rng.standard_normal((i, r))
        if complex_valued:
            f = f + 1j * rng.standard_normal((i, r))
        factors.append(f)
    return KruskalTensor(factors).normalize()


def add_noise(y, snr_db: float, seed):
    """``y + e`` with Gaussian ``e`` rescaled to hit ``snr_db`` exactly.

    ``snr_db = inf`` returns ``y`` unchanged. Complex ``y`` gets circular noise.
    """
    y = np.asarray(y)
    if math.isinf(snr_db) and snr_db > 0:
        return y.copy()
    if math.isnan(snr_db):
        raise ValueError("SNR must not be NaN")
    ny = fro_norm(y)
    if ny == 0:
        raise ValueError("cannot set an SNR for a zero tensor")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(y.shape)
    if np.iscomplexobj(y):
        e = e + 1j * rng.standard_normal(y.shape)
    e *= ny / fro_norm(e) * 10 ** (-snr_db / 20)
    return y + e


def snr_of(y, noisy) -> float:
    return 20 * math.log10(fro_norm(y) / fro_norm(np.asarray(noisy) - y))


def hilbert_tensor(n_order: int, extent: int) -> np.ndarray:
    """Entries ``1 / (i_1 + ... + i_N - N + 1)`` for 1-based indices."""
    if extent < 1 or n_order < 1:
        raise ValueError("extent and order must be >= 1")
    idx = np.indices((extent,) * n_order).sum(axis=0)
    return 1.0 / (idx + 1.0)


def hankel_tensorize(signal, extents) -> np.ndarray:
    """``T[i_1, ..., i_N] = signal[i_1 + ... + i_N]`` (0-based)."""
    signal = np.asarray(signal)
    extents = tuple(int(e) for e in extents)
    need = sum(extents) - len(extents) + 1
    if signal.ndim != 1 or signal.size != need:
        raise ValueError(f"extents {extents} need a signal of length {need}, got {signal.shape}")
    return signal[np.indices(extents).sum(axis=0)]


def dehankelize(t) -> np.ndarray:
    """Average ``t`` over every anti-diagonal hyperplane ``i_1 + ... + i_N = k``."""
    t = np.asarray(t)
    idx = np.indices(t.shape).sum(axis=0).ravel()
    counts = np.bincount(idx)
    vals = t.ravel()
    if np.iscomplexobj(t):
        s = np.bincount(idx, vals.real) + 1j * np.bincount(idx, vals.imag)
    else:
        s = np.bincount(idx, vals)
    return s / counts


def damped_exponentials(r: int, length: int, rate: float = 300.0) -> np.ndarray:
    """``r`` unit-norm damped complex exponentials, one per row.

    Component ``k = 1..r`` has angular frequency ``20 pi k``, damping ``2 k``
    and phase ``pi k / (2 r + 1)``, sampled at ``t = n / rate``.
    """
    t = np.arange(length) / rate
    rows = []
    for k in range(1, r + 1):
        x = np.exp(-1j * (20 * np.pi * k * t + np.pi * k / (2 * r + 1)) - 2 * k * t)
        rows.append(x / np.linalg.norm(x))
    return np.array(rows)


def component_signals(k: KruskalTensor) -> np.ndarray:
    """Signal behind each rank-one term of a Hankel-structured K-tensor."""
    out = []
    for c in range(k.rank):
        term = KruskalTensor([f[:, [c]] for f in k.factors], k.weights[[c]])
        out.append(dehankelize(kruskal_full(term)))
    return np.array(out)


# ------------------------------------------------------------ experiments


@dataclass
class ExperimentConfig:
    kind: str = "random"
    order: int = 5
    extents: List[int] = field(default_factory=lambda: [5] * 5)
    rank: int = 5
    tt: dict = field(default_factory=dict)
    fit: dict = field(default_factory=lambda: {"max_sweeps": 500, "tol": 1e-10})
    conversion: str = "exact"
    snr_db: List[float] = field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0, 40.0])
    trials: int = 10
    seed: int = 0
    output: Optional[str] = None
    dense_baseline: bool = True
    complex_valued: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.extents = [int(e) for e in self.extents]
        if len(self.extents) != self.order:
            raise ValueError("extents do not match the order")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.conversion not in ("exact", "sequential"):
            raise ValueError("conversion must be 'exact' or 'sequential'")
        self.snr_db = [float(s) for s in self.snr_db]
        if not self.snr_db or any(math.isnan(s) or s == -math.inf for s in self.snr_db):
            raise ValueError("SNR list must be non-empty; +inf is the only non-finite value allowed")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def tt_options(self) -> TTOptions:
        opts = {"max_rank": self.rank}
        opts.update(self.tt)
        return TTOptions(**opts)

    def fit_options(self) -> FitOptions:
        return FitOptions(**self.fit)


@dataclass
class MetricRow:
    trial: int
    snr_db: float
    algorithm: str
    msae_db: float
    rel_error: float
    sweeps: int
    wall_time: float = 0.0
    status: str = "ok"
    ktensor: Optional[KruskalTensor] = field(default=None, repr=False, compare=False)

    def csv_record(self) -> dict:
        return {
            "trial": self.trial,
            "snr_db": _fmt(self.snr_db),
            "algorithm": self.algorithm,
            "msae_db": _fmt(self.msae_db),
            "rel_error": _fmt(self.rel_error),
            "sweeps": self.sweeps,
            "status": self.status,
        }


def _fmt(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _parse_float(s: str) -> float:
    return float(s)


def _truth_and_data(cfg: ExperimentConfig, trial_seed: int):
    """Ground truth (or None), clean tensor and, for Hankel data, the source signals."""
    if cfg.kind == "random":
        k = gen_random_kt(cfg.order, cfg.extents, cfg.rank, trial_seed, cfg.complex_valued)
        return k, kruskal_full(k), None
    if cfg.kind == "hankel":
        length = sum(cfg.extents) - cfg.order + 1
        sigs = damped_exponentials(cfg.rank, length)
        return None, hankel_tensorize(sigs.sum(axis=0), cfg.extents), sigs
    return None, hilbert_tensor(cfg.order, cfg.extents[0]), None


def _score(cfg, truth, signals, clean, k: KruskalTensor) -> tuple:
    rel = fro_norm(clean - kruskal_full(k)) / fro_norm(clean)
    if truth is not None:
        return kruskal_msae(truth, k), rel
    if signals is not None:
        est = component_signals(k)
        return msae(signals.T, est.T), rel
    return math.nan, rel


def run_trial(cfg: ExperimentConfig, trial: int) -> List[MetricRow]:
    """All metric rows of one Monte-Carlo trial; failures become sentinel rows."""
    trial_seed = cfg.seed + trial
    truth, clean, signals = _truth_and_data(cfg, trial_seed)
    rows = []
    stage2 = "stage2_" + cfg.conversion
    for s_idx, snr in enumerate(cfg.snr_db):
        noisy = add_noise(clean, snr, seed=(trial_seed, s_idx))

        def record(name, fn):
            t0 = time.perf_counter()
            try:
                k, sweeps = fn()
                m, rel = _score(cfg, truth, signals, clean, k)
                rows.append(
                    MetricRow(trial, snr, name, m, rel, sweeps, time.perf_counter() - t0, ktensor=k)
                )
                return k
            except Exception as exc:  # a failed trial must not abort the batch
                rows.append(
                    MetricRow(trial, snr, name, math.nan, math.nan, 0, time.perf_counter() - t0,
                              f"failed: {type(exc).__name__}")
                )
                return None

        t0 = time.perf_counter()
        x = tt_svd(noisy, cfg.tt_options())
        tt_time = time.perf_counter() - t0

        def convert():
            if cfg.conversion == "exact":
                return tt_to_cp_exact(x, cfg.rank), 0
            return tt_to_cp_sequential(x, cfg.rank), 0

        k2 = record(stage2, convert)
        rows[-1].wall_time += tt_time
        fopts = cfg.fit_options()
        if k2 is not None:
            fopts = FitOptions(**{**cfg.fit, "init": "given", "initial": k2})
        else:
            fopts = FitOptions(**{**cfg.fit, "init": "random", "seed": trial_seed})

        def refine():
            k, rep = fit_tt2cp(x, cfg.rank, fopts)
            return k, rep.sweeps

        record("stage3_fit", refine)
        if cfg.dense_baseline and noisy.size <= DENSE_LIMIT:

            def dense():
                k, rep = cp_als(
                    noisy, cfg.rank, init="random", seed=trial_seed,
                    max_iters=fopts.max_sweeps, tol=fopts.tol,
                )
                return k, rep.sweeps

            record("dense_als", dense)
    return rows


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("TT2CP_THREADS", "1")))
    except ValueError:
        return 1


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> Iterator[MetricRow]:
    """Metric rows of every trial, in trial order regardless of scheduling."""
    threads = threads or _threads()
    trials = range(cfg.trials)
    if threads == 1:
        for t in trials:
            yield from run_trial(cfg, t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for rows in pool.map(lambda t: run_trial(cfg, t), trials):
            yield from rows


def write_metrics_csv(rows: Sequence[MetricRow], path_or_buf) -> None:
    """Deterministic CSV; wall times are left out so reruns are byte-identical."""
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row.csv_record())
    finally:
        if own:
            fh.close()


def read_metrics_csv(path_or_text) -> List[dict]:
    """Parse a metrics CSV back into typed dicts."""
    if isinstance(path_or_text, Path) or (
        isinstance(path_or_text, str) and "\n" not in path_or_text
    ):
        text = Path(path_or_text).read_text()
    else:
        text = path_or_text
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        if tuple(rec) != CSV_FIELDS:
            raise ValueError(f"unexpected columns {tuple(rec)}")
        out.append(
            {
                "trial": int(rec["trial"]),
                "snr_db": _parse_float(rec["snr_db"]),
                "algorithm": rec["algorithm"],
                "msae_db": _parse_float(rec["msae_db"]),
                "rel_error": _parse_float(rec["rel_error"]),
                "sweeps": int(rec["sweeps"]),
                "status": rec["status"],
            }
        )
    return out


def summarize(rows: Sequence[MetricRow]) -> dict:
    """Mean MSAE and relative error per (algorithm, SNR)."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.snr_db), []).append(r)
    out = []
    for (alg, snr), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        ok = [r for r in rs if r.status == "ok"]
        out.append(
            {
                "algorithm": alg,
                "snr_db": _fmt(snr),
                "trials": len(rs),
                "failed": len(rs) - len(ok),
                "mean_msae_db": float(np.mean([r.msae_db for r in ok])) if ok else None,
                "mean_rel_error": float(np.mean([r.rel_error for r in ok])) if ok else None,
            }
        )
    return {"groups": out}


def write_outputs(cfg: ExperimentConfig, rows: Sequence[MetricRow], outdir) -> Path:
    """``metrics.csv`` plus ``report.json`` (config, summary and wall times)."""
    outdir = ensure_dir(outdir)
    write_metrics_csv(rows, outdir / "metrics.csv")
    cfg_dict = asdict(cfg)
    cfg_dict["snr_db"] = [_fmt(s) for s in cfg.snr_db]
    report = {
        "config": cfg_dict,
        "summary": summarize(rows),
        "wall_time": [
            {"trial": r.trial, "snr_db": _fmt(r.snr_db), "algorithm": r.algorithm, "seconds": r.wall_time}
            for r in rows
        ],
    }
    (outdir / "report.json").write_text(json.dumps(report, indent=2))
    save_ktensors(
        {
            f"trial{r.trial}_snr{_fmt(r.snr_db)}_{r.algorithm}": r.ktensor
            for r in rows
            if r.ktensor is not None
        },
        outdir,
    )
    return outdir


def save_ktensors(ktensors: dict, outdir) -> None:
    """One TNSR file per K-tensor under ``outdir/ktensor``."""
    kdir = ensure_dir(Path(outdir) / "ktensor")
    for name, k in ktensors.items():
        save_ktensor(kdir / f"{name}.tnsr", k)
