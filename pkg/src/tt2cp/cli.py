"""``tt2cp`` command line: batch experiments, the Hilbert study and one-off decompositions."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .convert import tt_to_cp_exact, tt_to_cp_sequential
from .fit import FitOptions, fit_tt2cp
from .io import ensure_dir, load_tensor
from .tensor_core import fro_norm, kruskal_full
from .tt import TTOptions, tt_svd


def _cmd_run(args) -> int:
    cfg = bench.ExperimentConfig.from_json(args.config)
    outdir = args.output or cfg.output or "tt2cp_out"
    rows = list(bench.run_experiment(cfg, threads=args.threads))
    bench.write_outputs(cfg, rows, outdir)
    for g in bench.summarize(rows)["groups"]:
        print(
            f"{g['algorithm']:>18s}  snr={g['snr_db']:>6s}  msae={g['mean_msae_db']}  "
            f"rel_error={g['mean_rel_error']}  failed={g['failed']}"
        )
    print(f"wrote {Path(outdir) / 'metrics.csv'}")
    return 0


def _fit_options(args) -> FitOptions:
    return FitOptions(max_sweeps=args.max_sweeps, tol=args.tol)


def _cmd_hilbert(args) -> int:
    y = bench.hilbert_tensor(args.order, args.dim)
    t0 = time.perf_counter()
    x = tt_svd(y, TTOptions(max_rank=args.rank))
    k, rep = fit_tt2cp(x, args.rank, _fit_options(args))
    elapsed = time.perf_counter() - t0
    rel = fro_norm(y - kruskal_full(k)) / fro_norm(y)
    result = {
        "order": args.order,
        "dim": args.dim,
        "rank": args.rank,
        "tt_ranks": list(x.ranks),
        "rel_error": rel,
        "seconds": elapsed,
        "fit": rep.to_dict(),
    }
    if args.output:
        out = ensure_dir(args.output)
        (out / "report.json").write_text(json.dumps(result, indent=2))
        bench.save_ktensors({"hilbert": k}, out)
    print(f"rank {args.rank}: relative error {rel:.3e} after {rep.sweeps} sweeps ({rep.termination.value})")
    return 0


def _cmd_decompose(args) -> int:
    y = load_tensor(args.input)
    tt_opts = {"max_rank": args.rank}
    if args.rel_error is not None:
        tt_opts["rel_error"] = args.rel_error
    x = tt_svd(y, TTOptions(**tt_opts))
    t0 = time.perf_counter()
    sweeps = 0
    report = None
    if args.method == "exact":
        k = tt_to_cp_exact(x, args.rank)
    elif args.method == "sequential":
        k = tt_to_cp_sequential(x, args.rank)
    else:
        k, report = fit_tt2cp(x, args.rank, _fit_options(args))
        sweeps = report.sweeps
    elapsed = time.perf_counter() - t0
    rel = fro_norm(y - kruskal_full(k)) / fro_norm(y)
    out = ensure_dir(args.output)
    row = bench.MetricRow(0, float("inf"), args.method, float("nan"), rel, sweeps, elapsed)
    bench.write_metrics_csv([row], out / "metrics.csv")
    info = {
        "input": str(args.input),
        "method": args.method,
        "rank": args.rank,
        "tt_ranks": list(x.ranks),
        "rel_error": rel,
        "seconds": elapsed,
        "fit": report.to_dict() if report else None,
    }
    (out / "report.json").write_text(json.dumps(info, indent=2))
    bench.save_ktensors({args.method: k}, out)
    print(f"{args.method}: relative error {rel:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tt2cp", description="CP decomposition through tensor trains")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte-Carlo experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=None, help="defaults to $TT2CP_THREADS or 1")
    run.set_defaults(func=_cmd_run)

    def fit_args(sp):
        sp.add_argument("--max-sweeps", type=int, default=5000)
        sp.add_argument("--tol", type=float, default=1e-12)

    hil = sub.add_parser("hilbert", help="rank-R approximation of a Hilbert tensor")
    hil.add_argument("--order", type=int, default=4)
    hil.add_argument("--dim", type=int, default=20)
    hil.add_argument("--rank", type=int, default=7)
    hil.add_argument("--output")
    fit_args(hil)
    hil.set_defaults(func=_cmd_hilbert)

    dec = sub.add_parser("decompose", help="decompose a tensor stored as a TNSR file")
    dec.add_argument("--input", required=True)
    dec.add_argument("--rank", type=int, required=True)
    dec.add_argument("--method", choices=("exact", "sequential", "fit"), default="fit")
    dec.add_argument("--output", required=True)
    dec.add_argument("--rel-error", type=float, default=None, help="TT-SVD accuracy (rank capped at R)")
    fit_args(dec)
    dec.set_defaults(func=_cmd_decompose)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"tt2cp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
