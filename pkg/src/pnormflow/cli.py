"""Command-line front end.

Exit codes: 0 ok, 2 parse/usage, 3 infeasible mass, 4 push budget exhausted,
5 file I/O. ``PNORMFLOW_OUTPUT_DIR`` sets the default output directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (
    METRIC_FIELDS,
    evaluate,
    metrics_record,
    sweep_cut,
)
from .diffusion import DEFAULT_EPS, make_problem, solve_general, solve_q2
from .errors import BudgetExceededError, ParseError, PNormFlowError
from .graph import Graph, load_edge_list, read_node_set, write_edge_list, write_node_set
from .synth import GeneratorSpec, read_blocks, write_blocks

log = logging.getLogger("pnormflow")

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4, 5
OUTPUT_DIR_ENV = "PNORMFLOW_OUTPUT_DIR"


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def format_records(records, fmt: str, fields) -> str:
    """TSV with a header row, or one flat JSON object per line."""
    if fmt == "json":
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v
        return "".join(json.dumps({k: clean(r.get(k)) for k in fields}) + "\n"
                       for r in records)
    lines = ["\t".join(fields)]
    lines += ["\t".join(_fmt(r.get(k, "")) for k in fields) for r in records]
    return "\n".join(lines) + "\n"


def _load_graph(args, seeds=None) -> Graph:
    with open(args.graph) as fh:
        return load_edge_list(fh, one_based=args.one_based,
                              seed_component=seeds if args.component else None)


def _dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(d) for d in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 7,5 or 7x5, got {text!r}")


def _seed_labels(args) -> list[int]:
    """Seed ids as stored in graph labels (zero-based)."""
    if args.seed is not None:
        return [args.seed - (1 if args.one_based else 0)]
    with open(args.seeds) as fh:
        return read_node_set(fh, one_based=args.one_based)


def _read_set(path, g: Graph, args) -> list[int]:
    with open(path) as fh:
        return read_node_set(fh, g, one_based=args.one_based)


def _delta(args, g: Graph, seeds) -> float:
    if args.delta is not None:
        return args.delta
    vol = int(g.degrees[seeds].sum())
    return args.mass_mult * args.target_vol / vol


def _solve(args, g: Graph, seeds, delta, p, rng_seed, trace=None, check=False):
    prob = make_problem(g, seeds, delta, p, eps=args.eps, mu=args.mu,
                        term_tol=args.term_tol, budget=args.budget)
    if prob.q == 2.0:
        try:
            return solve_q2(prob, trace=trace, check=check)
        except BudgetExceededError as exc:
            return exc.solution
    return solve_general(prob, seed=rng_seed, line_search=not args.fixed_step,
                         trace=trace, check=check)


# subcommands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = GeneratorSpec(args.kind, args.dims, args.p_in, args.p_out, args.rng_seed)
    g, blocks = spec.build()
    out = _out_dir(args)
    write_edge_list(g, out / args.graph_out, one_based=args.one_based)
    write_blocks(g, blocks, out / args.blocks_out, one_based=args.one_based)
    log.info("wrote n=%d m=%d to %s", g.n, g.m, out / args.graph_out)
    return EXIT_OK


def cmd_diffuse(args) -> int:
    labels = _seed_labels(args)
    g = _load_graph(args, [v + (1 if args.one_based else 0) for v in labels])
    seeds = g.to_dense(labels)
    delta = _delta(args, g, seeds)
    out = _out_dir(args)
    trace_records = [] if args.trace else None
    sol = _solve(args, g, seeds, delta, args.p, args.rng_seed,
                 trace=trace_records.append if args.trace else None)
    sweep = sweep_cut(g, sol)
    metrics = None
    if args.truth:
        metrics = evaluate(g, sweep.best_cut, _read_set(args.truth, g, args))
    rec = metrics_record(metrics, sweep, sol)

    supp = sol.support
    order = supp[np.argsort(-sol.x[supp], kind="stable")]
    shift = 1 if args.one_based else 0
    names = [v + shift for v in g.to_labels(order)]
    with open(out / "heights.tsv", "w") as fh:
        for name, v in zip(names, order):
            fh.write(f"{name}\t{float(sol.x[v])!r}\n")
    write_node_set(g, sweep.best_cut.members, out / "cluster.txt", args.one_based)
    ext = "json" if args.format == "json" else "tsv"
    with open(out / f"metrics.{ext}", "w") as fh:
        fh.write(format_records([rec], args.format, METRIC_FIELDS))
    if trace_records is not None:
        with open(out / "trace.jsonl", "w") as fh:
            for r in trace_records:
                fh.write(json.dumps(r) + "\n")
    if not sol.converged:
        print(f"budget: {sol.pushes} pushes used without convergence; outputs are "
              "from the partial solution", file=sys.stderr)
        return EXIT_OK if args.allow_partial else EXIT_BUDGET
    return EXIT_OK


def cmd_sweep(args) -> int:
    g = _load_graph(args)
    heights = {}
    with open(args.heights) as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                node, h = s.split()
                node = int(node) - (1 if args.one_based else 0)
                heights[g.to_dense([node])[0]] = float(h)
            except ValueError:
                raise ParseError(f"expected 'node<TAB>height', got {s!r}", lineno) from None
    sweep = sweep_cut(g, heights)
    metrics = None
    if args.truth:
        metrics = evaluate(g, sweep.best_cut, _read_set(args.truth, g, args))
    out = _out_dir(args)
    write_node_set(g, sweep.best_cut.members, out / "cluster.txt", args.one_based)
    sys.stdout.write(format_records([metrics_record(metrics, sweep, None)], args.format,
                                    METRIC_FIELDS))
    return EXIT_OK


def cmd_eval(args) -> int:
    g = _load_graph(args)
    found = _read_set(args.cluster, g, args)
    truth = _read_set(args.truth, g, args)
    rec = metrics_record(evaluate(g, found, truth), None, None)
    sys.stdout.write(format_records([rec], args.format, METRIC_FIELDS))
    return EXIT_OK


TRIAL_FIELDS = ("row", "p", "seed") + METRIC_FIELDS + ("converged",)
SUMMARY_KEYS = ("precision", "recall", "f1", "jaccard", "conductance", "pushes",
                "touched", "converged")


def run_trial(g: Graph, target, seed_node: int, p: float, args, rng_seed) -> dict:
    target_vol = args.target_vol or int(g.degrees[list(target)].sum())
    delta = args.mass_mult * target_vol / g.degree(seed_node)
    sol = _solve(args, g, [seed_node], delta, p, rng_seed)
    sweep = sweep_cut(g, sol)
    rec = metrics_record(evaluate(g, sweep.best_cut, target), sweep, sol)
    shift = 1 if args.one_based else 0
    rec.update(p=p, seed=g.to_labels([seed_node])[0] + shift, converged=int(sol.converged))
    return rec


def summarize(records) -> list[dict]:
    rows = []
    for p in sorted({r["p"] for r in records}):
        cell = [r for r in records if r["p"] == p]
        for stat, fn in (("mean", np.mean), ("std", np.std)):
            row = {"row": stat, "seed": "", **dict.fromkeys(METRIC_FIELDS, math.nan)}
            row.update(p=p, eps=cell[0]["eps"])
            for k in SUMMARY_KEYS:
                row[k] = float(fn([r[k] for r in cell]))
            rows.append(row)
    return rows


def experiment(g: Graph, target, ps, args) -> tuple[list[dict], list[dict]]:
    """Trials of single-seed diffusion, seeds drawn uniformly from ``target``.

    Returns ``(trial_records, summary_rows)``; records are ordered by
    ``(p, trial)`` regardless of worker completion order.
    """
    rng = np.random.default_rng(args.rng_seed)
    members = sorted(target)
    seeds = [int(s) for s in rng.choice(members, size=args.trials)]
    jobs = [(p, i, s) for p in ps for i, s in enumerate(seeds)]

    def work(job):
        p, i, s = job
        rec = run_trial(g, target, s, p, args, (args.rng_seed, i))
        rec["row"] = i
        return rec

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            records = list(pool.map(work, jobs))
    else:
        records = [work(j) for j in jobs]
    return records, summarize(records)


def cmd_experiment(args) -> int:
    g = _load_graph(args)
    if not args.blocks:
        raise ParseError("blocks: ground-truth blocks file is required")
    with open(args.blocks) as fh:
        blocks = read_blocks(fh, g, one_based=args.one_based)
    if not 0 <= args.block < len(blocks):
        raise ParseError(f"block: index {args.block} outside [0, {len(blocks)})")
    ps = [float(p) for p in args.p_values.split(",")]
    records, summary = experiment(g, set(blocks[args.block]), ps, args)
    text = format_records(records + summary, args.format, TRIAL_FIELDS)
    if args.output:
        with open(_out_dir(args) / args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# parser -----------------------------------------------------------------------

def _graph_opts(sp):
    sp.add_argument("--graph", required=True, help="edge list file")
    sp.add_argument("--one-based", action="store_true", help="node ids start at 1")
    sp.add_argument("--component", action="store_true",
                    help="restrict a disconnected graph to the seeds' component")


def _solver_opts(sp, p_default=None):
    sp.add_argument("--eps", type=float, default=DEFAULT_EPS,
                    help="target accuracy; sets the smoothing (eps/|mass|)^(1/q)")
    sp.add_argument("--mu", type=float, help="smoothing override (p > 2 only)")
    sp.add_argument("--term-tol", type=float, help="stop once no gradient is below -tol")
    sp.add_argument("--budget", type=int, help="maximum coordinate updates")
    sp.add_argument("--fixed-step", action="store_true",
                    help="fixed mu^(2-q)/deg steps instead of line search")
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--format", choices=("json", "tsv"), default="tsv")
    sp.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pnormflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen", help="write a synthetic graph and its blocks")
    sp.add_argument("kind", choices=("grid", "dumbbell", "planted-partition"))
    sp.add_argument("--dims", required=True, type=_dims,
                    help="rows,cols for grid/dumbbell; block sizes for planted-partition")
    sp.add_argument("--p-in", type=float)
    sp.add_argument("--p-out", type=float)
    sp.add_argument("--rng-seed", type=int, default=0)
    sp.add_argument("--graph-out", default="graph.txt")
    sp.add_argument("--blocks-out", default="blocks.txt")
    sp.add_argument("--one-based", action="store_true", help="write ids starting at 1")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("diffuse", help="diffuse from seeds and sweep")
    _graph_opts(sp)
    who = sp.add_mutually_exclusive_group(required=True)
    who.add_argument("--seed", type=int, help="single seed node id")
    who.add_argument("--seeds", help="file of newline-separated seed ids")
    mass = sp.add_mutually_exclusive_group(required=True)
    mass.add_argument("--delta", type=float, help="source density per seed")
    mass.add_argument("--mass-mult", type=float, help="total mass = t * --target-vol")
    sp.add_argument("--target-vol", type=float)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--truth", help="ground-truth cluster for metrics")
    sp.add_argument("--trace", action="store_true", help="write per-epoch trace.jsonl")
    sp.add_argument("--allow-partial", action="store_true",
                    help="exit 0 even when the push budget runs out")
    _solver_opts(sp)
    sp.set_defaults(func=cmd_diffuse)

    sp = sub.add_parser("sweep", help="sweep cut of a heights file")
    _graph_opts(sp)
    sp.add_argument("--heights", required=True, help="node<TAB>height lines")
    sp.add_argument("--truth")
    sp.add_argument("--format", choices=("json", "tsv"), default="tsv")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("eval", help="compare a cluster with ground truth")
    _graph_opts(sp)
    sp.add_argument("--cluster", required=True)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--format", choices=("json", "tsv"), default="tsv")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("experiment", help="repeated single-seed trials per p")
    _graph_opts(sp)
    sp.add_argument("--blocks", help="ground-truth blocks file, one block per line")
    sp.add_argument("--block", type=int, default=0, help="index of the target block")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--p-values", default="2,4,8")
    sp.add_argument("--mass-mult", type=float, default=3.0,
                    help="total mass = t * vol(target block)")
    sp.add_argument("--target-vol", type=float, help="override vol(target block)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--output", help="file name under the output directory")
    _solver_opts(sp)
    sp.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "diffuse":
        if args.mass_mult is not None and args.target_vol is None:
            ap.error("--mass-mult needs --target-vol")
        if args.mu is not None and args.p == 2:
            ap.error("--mu: smoothing only applies when p > 2")
    try:
        return args.func(args)
    except PNormFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
