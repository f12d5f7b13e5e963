"""Command line experiment driver.

Subcommands::

    simvc run   --manifest d.json (--mask m.csv | --ratio 0.3) [options]
    simvc mask  --manifest d.json --ratio 0.3 --seed 0 --out m.csv
    simvc synth --spec s.json --out DIR
    simvc eval  --pred p.txt --truth t.txt

Exit status is 2 for configuration or input errors and 3 when the solver
aborts on a non-finite quantity.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import tempfile
import time

import numpy as np

from .core import (
    ConfigError,
    InvariantError,
    NumericalError,
    ShapeError,
    SolverConfig,
)
from .embed import cluster
from .ingest import (
    DataFormatError,
    DatasetManifest,
    SynthSpec,
    generate_mask,
    load_dataset,
    mask_stats,
    read_labels,
    read_mask,
    recode_labels,
    synth_dataset,
    write_dataset,
    write_mask,
)
from .metrics import evaluate
from .solver import solve

LAMBDA_GRID = (1e-4, 1e-2, 1.0, 1e2, 1e4)
MU_GRID = (0.0, 1e-4, 1e-2, 1.0, 1e2, 1e4)
ANCHOR_GRID = ("k", "2k", "5k")
METRICS = ("acc", "nmi", "purity", "fscore")
TRACE_COLUMNS = ("repeat", "iter", "objective", "term_reconstruction",
                 "term_alignment", "term_regularization", "wall_time_ms")


def parse_anchors(spec, k) -> int:
    """``k``, ``2k``, ``5k`` (any multiple of k) or a plain integer."""
    s = str(spec).strip()
    try:
        if s.endswith("k"):
            mult = s[:-1]
            return (int(mult) if mult else 1) * k
        return int(s)
    except ValueError:
        raise ConfigError(f"cannot parse anchor count {spec!r}; use k, 2k, 5k or an integer") from None


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_result(result) -> str:
    return json.dumps(result, indent=2, sort_keys=True) + "\n"


def load_result(path):
    with open(path) as fh:
        return json.load(fh)


def strip_timing(result):
    """Copy of a result (or list of results) without wall-clock fields."""
    if isinstance(result, list):
        return [strip_timing(r) for r in result]
    return {key: val for key, val in result.items() if key != "timing"}


def _summary(values):
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std())}


def run_experiment(data, labels, mask, config: SolverConfig, repeats=1, remask_ratio=None,
                   mask_seed=0):
    """Solve, cluster and score ``repeats`` times with seeds ``config.seed + r``.

    Returns a JSON-ready dict plus the raw per-repeat traces (with timings).
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if labels is None:
        raise ConfigError("the dataset has no labels to evaluate against")
    scores = {name: [] for name in METRICS}
    traces = []
    raw_traces = []
    timing = {"solve_ms": [], "cluster_ms": []}
    stats = []
    for r in range(repeats):
        cfg = config.with_(seed=config.seed + r)
        if remask_ratio is not None:
            mask = generate_mask(data.n, data.n_views, remask_ratio, mask_seed + r)
        stats.append(mask_stats(mask))
        t0 = time.perf_counter()
        state, trace = solve(data, mask, cfg)
        t1 = time.perf_counter()
        pred = cluster(state, cfg)
        t2 = time.perf_counter()
        for name, val in evaluate(pred, labels).items():
            scores[name].append(val)
        traces.append([rec.as_dict(timing=False) for rec in trace])
        raw_traces.append(trace)
        timing["solve_ms"].append((t1 - t0) * 1e3)
        timing["cluster_ms"].append((t2 - t1) * 1e3)
    result = {
        "config": config_echo(config, repeats),
        "metrics": {name: _summary(vals) for name, vals in scores.items()},
        "traces": traces,
        "mask_stats": stats[0] if remask_ratio is None else {"per_repeat": stats},
        "timing": timing,
    }
    return result, raw_traces


def config_echo(config: SolverConfig, repeats) -> dict:
    return {
        "m": config.m,
        "k": config.k,
        "lambda": config.lam,
        "mu": config.mu,
        "max_iters": config.max_iters,
        "tol": config.tol,
        "seed": config.seed,
        "align": config.align_enabled,
        "learn_anchors": config.learn_anchors,
        "init": config.init,
        "kmeans_restarts": config.kmeans_restarts,
        "repeats": repeats,
    }


def trace_csv(raw_traces) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r, trace in enumerate(raw_traces):
        for rec in trace:
            w.writerow([r, rec.iter, repr(rec.objective), repr(rec.term_reconstruction),
                        repr(rec.term_alignment), repr(rec.term_regularization),
                        f"{rec.wall_time_ms:.3f}"])
    return buf.getvalue()


# -- subcommands -----------------------------------------------------------

def _load_mask(args, data):
    if args.mask:
        mask = read_mask(args.mask)
        if mask.n != data.n or mask.n_views != data.n_views:
            raise DataFormatError(
                f"{args.mask}: mask is {mask.n} x {mask.n_views}, dataset is "
                f"{data.n} x {data.n_views}"
            )
        return mask
    return generate_mask(data.n, data.n_views, args.ratio, args.seed)


def cmd_run(args):
    manifest = DatasetManifest.load(args.manifest)
    data, labels = load_dataset(manifest)
    if args.mask is None and args.ratio is None:
        raise ConfigError("give either --mask or --ratio")
    if args.remask and args.ratio is None:
        raise ConfigError("--remask needs --ratio")
    mask = _load_mask(args, data)
    k = args.clusters or (int(labels.max()) + 1 if labels is not None else None)
    if k is None:
        raise ConfigError("no labels in manifest; pass --clusters")

    def make_config(anchors, lam, mu):
        return SolverConfig(
            m=parse_anchors(anchors, k), k=k, lam=lam, mu=mu,
            max_iters=args.max_iters, tol=args.tol, seed=args.seed,
            align_enabled=not args.no_align, learn_anchors=not args.fixed_anchors,
            init=args.init, kmeans_restarts=args.kmeans_restarts, workers=args.workers,
        )

    if args.grid:
        cells = list(itertools.product(ANCHOR_GRID, LAMBDA_GRID, MU_GRID))
    else:
        cells = [(args.anchors, args.lam, args.mu)]
    results = []
    all_traces = []
    for anchors, lam, mu in cells:
        cfg = make_config(anchors, lam, mu)
        res, raw = run_experiment(
            data, labels, mask, cfg, repeats=args.repeats,
            remask_ratio=args.ratio if args.remask else None, mask_seed=args.seed,
        )
        res["config"]["anchors"] = str(anchors)
        res["config"]["dataset"] = data.name
        results.append(res)
        all_traces.append(raw)
        m = res["metrics"]
        print(f"m={cfg.m} lambda={lam:g} mu={mu:g}: " + "  ".join(
            f"{name.upper()} {100 * m[name]['mean']:.2f}±{100 * m[name]['std']:.2f}"
            for name in METRICS))
    payload = results if args.grid else results[0]
    if args.out:
        atomic_write(args.out, dump_result(payload))
    if args.trace:
        atomic_write(args.trace, trace_csv([t for raw in all_traces for t in raw]))
    return 0


def cmd_mask(args):
    manifest = DatasetManifest.load(args.manifest)
    mask = generate_mask(manifest.n, len(manifest.views), args.ratio, args.seed)
    buf = io.StringIO()
    write_mask(buf, mask)
    atomic_write(args.out, buf.getvalue())
    print(json.dumps(mask_stats(mask), sort_keys=True))
    return 0


def cmd_synth(args):
    try:
        with open(args.spec) as fh:
            spec = SynthSpec.from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{args.spec}: line {exc.lineno}: {exc.msg}") from None
    except TypeError as exc:
        raise ConfigError(f"{args.spec}: {exc}") from None
    data, labels = synth_dataset(spec)
    path = write_dataset(data, args.out, labels)
    print(path)
    return 0


def cmd_eval(args):
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    if pred.size != truth.size:
        raise DataFormatError(f"{args.pred} has {pred.size} labels, {args.truth} has {truth.size}")
    print(json.dumps(evaluate(recode_labels(pred)[0], recode_labels(truth)[0]), sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="simvc", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve, cluster and score a dataset")
    run.add_argument("--manifest", required=True)
    src = run.add_mutually_exclusive_group()
    src.add_argument("--mask")
    src.add_argument("--ratio", type=float)
    run.add_argument("--anchors", default="2k", help="k, 2k, 5k or an integer")
    run.add_argument("--clusters", type=int, help="number of clusters (default: from labels)")
    run.add_argument("--lambda", dest="lam", type=float, default=1.0)
    run.add_argument("--mu", type=float, default=1e-2)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--repeats", type=int, default=10)
    run.add_argument("--max-iters", type=int, default=50)
    run.add_argument("--tol", type=float, default=1e-6)
    run.add_argument("--kmeans-restarts", type=int, default=10)
    run.add_argument("--init", choices=("uniform", "kmeans"), default="uniform")
    run.add_argument("--no-align", action="store_true", help="freeze alignment matrices")
    run.add_argument("--fixed-anchors", action="store_true", help="k-means anchors, never updated")
    run.add_argument("--remask", action="store_true", help="draw a fresh mask for every repeat")
    run.add_argument("--grid", action="store_true", help="sweep the default lambda/mu/anchor grid")
    run.add_argument("--workers", type=int, default=1, help="threads for per-view work")
    run.add_argument("--out")
    run.add_argument("--trace", help="CSV file for the convergence traces")
    run.set_defaults(func=cmd_run)

    mk = sub.add_parser("mask", help="write an incompleteness mask")
    mk.add_argument("--manifest", required=True)
    mk.add_argument("--ratio", type=float, required=True)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=cmd_mask)

    sy = sub.add_parser("synth", help="write a synthetic dataset from a JSON spec")
    sy.add_argument("--spec", required=True)
    sy.add_argument("--out", required=True, help="output directory")
    sy.set_defaults(func=cmd_synth)

    ev = sub.add_parser("eval", help="score predicted labels against the truth")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--truth", required=True)
    ev.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, DataFormatError, ShapeError, InvariantError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
