"""Command-line harness: ``klnmf synth | solve | bench | plotdata | replay``.

Exit codes: 0 on success, 1 on runtime or domain errors, 2 on usage or
configuration errors. ``KLNMF_OUT_DIR`` supplies the default output
directory for ``synth`` and ``bench``.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import shlex
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, _ext
from .baselines import BASELINES, BaselineConfig, run_baseline
from .data import (
    SynthSpec,
    generate_synthetic,
    initial_point,
    load_movielens,
    read_matrix_csv,
    write_matrix_csv,
)
from .errors import ConfigError, KLNMFError, SolverDivergenceError
from .model import KLProblem, Regularizer
from .solvers import ALGORITHMS, SolverConfig, run_solver

ALL_ALGORITHMS = ALGORITHMS + BASELINES
OUT_ENV = "KLNMF_OUT_DIR"
AGGREGATE_COLUMNS = ("size", "algorithm", "runs", "failed", "iter", "rel", "kkt_w", "kkt_h", "time")


class UsageError(Exception):
    pass


# -- shared helpers ---------------------------------------------------------


def parse_size(text: str) -> tuple[int, int, int]:
    parts = text.lower().replace(",", "x").split("x")
    try:
        m, n, r = (int(v) for v in parts)
    except ValueError:
        raise UsageError(f"size must look like MxNxR, got {text!r}") from None
    return m, n, r


def parse_synth(text: str, default_seed: int) -> SynthSpec:
    """``M,N,R[,SPARSITY[,SEED]]``"""
    parts = [v.strip() for v in text.split(",")]
    if not 3 <= len(parts) <= 5:
        raise UsageError(f"--synth expects M,N,R[,SPARSITY[,SEED]], got {text!r}")
    try:
        m, n, r = (int(v) for v in parts[:3])
        sparsity = float(parts[3]) if len(parts) > 3 else 1.0
        seed = int(parts[4]) if len(parts) > 4 else default_seed
    except ValueError:
        raise UsageError(f"malformed --synth value {text!r}") from None
    return SynthSpec(m=m, n=n, r=r, sparsity=sparsity, seed=seed)


def make_config(algo: str, args) -> SolverConfig | BaselineConfig:
    """Build and validate the algorithm configuration before any compute."""
    if algo not in ALL_ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    if algo == "ccd" and args.reg != "none":
        raise ConfigError("ccd supports only --reg none")
    common = dict(
        max_iter=args.max_iter,
        tol=args.tol,
        trace_every=args.trace_every,
        rho=args.rho,
    )
    if algo in ALGORITHMS:
        scale = args.lambda_scale or [1.0]
        lw, lh = (scale[0], scale[0]) if len(scale) == 1 else (scale[0], scale[1])
        return SolverConfig(
            algorithm=algo,
            step_mode=args.step,
            lambda_scale_w=lw,
            lambda_scale_h=lh,
            strict_step=args.strict_step,
            seed=args.seed,
            **common,
        )
    return BaselineConfig(algorithm=algo, **common)


def make_regularizer(args) -> Regularizer:
    if args.reg == "none":
        if args.mu_w or args.mu_h:
            raise ConfigError("--mu-w/--mu-h require --reg l1 or --reg fro")
        return Regularizer()
    return Regularizer(args.reg, args.mu_w, args.mu_h)


def run_algorithm(p: KLProblem, Z0, cfg):
    if isinstance(cfg, SolverConfig):
        return run_solver(p, Z0, cfg)
    return run_baseline(p, Z0, cfg)


def git_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(path, argv: Sequence[str], entries: dict) -> None:
    """Flat ``key=value`` file. ``argv`` is enough to replay the run."""
    lines = {
        "argv": shlex.join(argv),
        "version": __version__,
        "backend": _ext.BACKEND,
        "build": git_revision(),
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    lines.update(entries)
    with open(path, "w") as fh:
        for k, v in lines.items():
            fh.write(f"{k}={v}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            k, sep, v = line.partition("=")
            if not sep:
                raise UsageError(f"{path}: malformed manifest line {line!r}")
            out[k] = v
    return out


def out_dir(arg: Optional[str]) -> Path:
    target = arg or os.environ.get(OUT_ENV)
    if not target:
        raise UsageError(f"--out is required (or set {OUT_ENV})")
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def summary_line(trace) -> str:
    return " ".join(f"{k}={_fmt(v)}" for k, v in trace.summary().items())


# -- subcommands ------------------------------------------------------------


def cmd_synth(args, argv) -> int:
    dest = out_dir(args.out)
    spec = SynthSpec(
        m=args.m, n=args.n, r=args.r, sparsity=args.sparsity, seed=args.seed,
        concentration=args.concentration,
    )
    p, truth = generate_synthetic(spec)
    write_matrix_csv(p.X, dest / "X.csv")
    write_matrix_csv(truth.W, dest / "W_true.csv")
    write_matrix_csv(truth.H, dest / "H_true.csv")
    write_matrix_csv(truth.H @ truth.H.T, dest / "HHt_true.csv")
    write_manifest(dest / "manifest.txt", argv, {"command": "synth", **{f"synth.{k}": v for k, v in asdict(spec).items()}})
    print(f"wrote X {p.X.shape}, W* {truth.W.shape}, H* {truth.H.shape} to {dest}")
    return 0


def _load_problem(args, reg: Regularizer) -> tuple[KLProblem, dict]:
    if args.synth:
        spec = parse_synth(args.synth, args.seed)
        p, _ = generate_synthetic(spec, reg)
        return p, {f"synth.{k}": v for k, v in asdict(spec).items()}
    if args.r is None:
        raise UsageError("--r is required with --x or --movielens")
    if args.x:
        return KLProblem(read_matrix_csv(args.x), args.r, reg), {"x": args.x}
    ratings = load_movielens(args.movielens)
    return KLProblem(ratings.X, args.r, reg), {"movielens": args.movielens}


def cmd_solve(args, argv) -> int:
    cfg = make_config(args.algo, args)
    reg = make_regularizer(args)
    p, problem_desc = _load_problem(args, reg)
    Z0 = initial_point(p, args.seed, scaled=args.scaled_init)

    manifest = args.manifest
    if manifest is None and args.trace:
        manifest = args.trace + ".manifest"
    if manifest:
        entries = {"command": "solve", "seed": args.seed, "scaled_init": args.scaled_init,
                   "reg.kind": reg.kind, "reg.mu_w": reg.mu_w, "reg.mu_h": reg.mu_h}
        entries.update(problem_desc)
        entries.update({f"config.{k}": v for k, v in asdict(cfg).items()})
        write_manifest(manifest, argv, entries)

    try:
        Z, trace = run_algorithm(p, Z0, cfg)
    except SolverDivergenceError as exc:
        if args.trace and exc.trace is not None and exc.trace.records:
            exc.trace.to_csv(args.trace)
        raise
    if args.trace:
        trace.to_csv(args.trace)
    if args.factors_out:
        write_matrix_csv(Z.W, args.factors_out + "W.csv")
        write_matrix_csv(Z.H, args.factors_out + "H.csv")
    print(summary_line(trace))
    return 0 if trace.status != "step_failed" else 1


def _bench_one(job: dict) -> dict:
    """Run one cell of the benchmark grid; never raises."""
    row = {"size": job["size"], "algorithm": job["algo"], "seed": job["seed"], "status": "failed",
           "iter": math.nan, "rel": math.nan, "kkt_w": math.nan, "kkt_h": math.nan, "time": math.nan,
           "restarts": math.nan, "message": ""}
    try:
        m, n, r = parse_size(job["size"])
        reg = Regularizer(job["reg"], job["mu_w"], job["mu_h"]) if job["reg"] != "none" else Regularizer()
        spec = SynthSpec(m=m, n=n, r=r, sparsity=job["sparsity"], seed=job["seed"])
        p, _ = generate_synthetic(spec, reg)
        Z0 = initial_point(p, job["seed"], scaled=job["scaled"])
        _, trace = run_algorithm(p, Z0, job["cfg"])
        trace.to_csv(job["trace"])
        s = trace.summary()
        row.update(status=trace.status, iter=s["iter"], rel=s["rel"], kkt_w=s["kkt_w"],
                   kkt_h=s["kkt_h"], time=s["time"], restarts=trace.total_restarts)
        if trace.status == "step_failed":
            row["message"] = trace.message
    except (KLNMFError, ArithmeticError, OSError) as exc:
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean metrics per (size, algorithm) over runs that did not fail."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["size"], row["algorithm"]), []).append(row)
    out = []
    for (size, algo), runs in groups.items():
        ok = [r for r in runs if r["status"] in ("converged", "max_iter")]
        agg = {"size": size, "algorithm": algo, "runs": len(runs), "failed": len(runs) - len(ok)}
        for key in ("iter", "rel", "kkt_w", "kkt_h", "time"):
            agg[key] = float(np.mean([r[key] for r in ok])) if ok else math.nan
        out.append(agg)
    return out


def cmd_bench(args, argv) -> int:
    dest = out_dir(args.out)
    (dest / "traces").mkdir(exist_ok=True)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    cfgs = {algo: make_config(algo, args) for algo in algos}
    if args.reg != "none":
        Regularizer(args.reg, args.mu_w, args.mu_h)
    sizes = args.sizes or ["200x200x30"]
    for s in sizes:
        parse_size(s)
    if args.instances < 1:
        raise UsageError("--instances must be positive")

    jobs = []
    for size in sizes:
        for i in range(args.instances):
            seed = args.seed_base + i
            for algo in algos:
                jobs.append(dict(
                    size=size, algo=algo, seed=seed, reg=args.reg, mu_w=args.mu_w, mu_h=args.mu_h,
                    sparsity=args.sparsity, scaled=args.scaled_init, cfg=cfgs[algo],
                    trace=str(dest / "traces" / f"{size}_{algo}_seed{seed}.csv"),
                ))
    write_manifest(dest / "manifest.txt", argv, {"command": "bench", "runs": len(jobs)})

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]

    run_cols = ("size", "algorithm", "seed", "status", "iter", "rel", "kkt_w", "kkt_h", "time", "restarts", "message")
    with open(dest / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=run_cols)
        w.writeheader()
        w.writerows(rows)
    agg = aggregate(rows)
    with open(dest / "aggregate.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        w.writerows(agg)
    for a in agg:
        print(" ".join(f"{k}={_fmt(a[k])}" for k in AGGREGATE_COLUMNS))
    failed = sum(a["failed"] for a in agg)
    return 1 if failed == len(rows) else 0


def cmd_plotdata(args, argv) -> int:
    from .trace import read_trace_csv

    rows = read_trace_csv(args.trace)
    cols = ("iter", "time_s", "objective", "potential", "rel_error", "kkt_w", "kkt_h")
    with open(args.out, "w") as fh:
        fh.write("# " + " ".join(cols) + "\n")
        for row in rows:
            fh.write(" ".join(repr(row[c]) if c != "iter" else str(row[c]) for c in cols) + "\n")
    return 0


def cmd_replay(args, argv) -> int:
    entries = read_manifest(args.manifest)
    if "argv" not in entries:
        raise UsageError(f"{args.manifest}: no argv entry")
    return main(shlex.split(entries["argv"]))


# -- parser -----------------------------------------------------------------


def _add_algo_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reg", choices=("none", "l1", "fro"), default="none")
    p.add_argument("--mu-w", type=float, default=0.0)
    p.add_argument("--mu-h", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.999)
    p.add_argument("--step", choices=("joint", "split"), default="joint")
    p.add_argument("--lambda-scale", type=float, nargs="+", metavar="S",
                   help="multiplier(s) on 1/L: one value for both blocks or W then H")
    p.add_argument("--strict-step", action="store_true", help="use lambda = 1/((1+eps) L)")
    p.add_argument("--max-iter", type=int, default=3000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--trace-every", type=int, default=10)
    p.add_argument("--scaled-init", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klnmf", description="KL-NMF solvers and benchmarks")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic instance")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=int, required=True)
    s.add_argument("--sparsity", type=float, default=1.0)
    s.add_argument("--concentration", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("solve", help="run one algorithm on one problem")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--x", help="dense matrix CSV")
    src.add_argument("--synth", help="inline synthetic spec M,N,R[,SPARSITY[,SEED]]")
    src.add_argument("--movielens", help="MovieLens ratings.csv")
    s.add_argument("--r", type=int)
    s.add_argument("--algo", choices=ALL_ALGORITHMS, default="mmbpge")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace")
    s.add_argument("--factors-out", help="prefix for the final W.csv and H.csv")
    s.add_argument("--manifest", help="manifest path (default: TRACE.manifest)")
    _add_algo_options(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("bench", help="run an instance x size x algorithm sweep")
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--sizes", nargs="+", help="sizes as MxNxR (default 200x200x30)")
    s.add_argument("--algos", default="mmbpg,mmbpge,mu,mue,ccd,agd")
    s.add_argument("--sparsity", type=float, default=1.0)
    s.add_argument("--seed-base", type=int, default=0)
    s.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    _add_algo_options(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("plotdata", help="convert a trace CSV to a gnuplot .dat file")
    s.add_argument("--trace", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plotdata)

    s = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, argv)
    except (UsageError, ConfigError) as exc:
        print(f"klnmf: error: {exc}", file=sys.stderr)
        return 2
    except (KLNMFError, OSError, ArithmeticError) as exc:
        print(f"klnmf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
