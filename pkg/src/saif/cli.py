"""Benchmark command line: ``solve``, ``path``, ``fused``, ``gen`` and ``plot``.

Every flag can also be given in a ``key = value`` file passed with
``--config``; flags on the command line win. Each JSON output embeds the
full resolved configuration and a format version. Exit status is 0 when
every certificate passed, 1 on a solver or data failure (an error JSON is
written), and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, baselines, engine
from .datasets import (gen_chain_tree, gen_random_tree, gen_synthetic_classification,
                       gen_synthetic_regression, read_edge_list, read_libsvm, write_edge_list,
                       write_libsvm)
from .engine import SaifConfig
from .exceptions import ConvergenceError, ParameterError, SaifError
from .fused import fused_lambda_max, fused_problem, solve_fused
from .losses import Loss, Problem
from .plotting import (PLOT_KINDS, active_size_vs_time, dual_value_vs_time, heatmap_pt,
                       read_csv_rows, runtime_bars)
from .results import TRACE_COLUMNS

FORMAT_VERSION = 1
RESULT_COLUMNS = ("method", "lambda", "eps", "time_s", "base_ops", "weighted_ops", "support", "gap",
                  "certificate")
PATH_TRACE_COLUMNS = ("lambda", "lambda_ratio") + TRACE_COLUMNS + ("p_frac",)
METHODS = ("saif", "dynamic", "plain", "none")


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return int(text)


def _add_data_args(p):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="LibSVM file; omit to use the synthetic generator")
    g.add_argument("--relabel-gt4", type=_bool, default=False, help="map labels > 4 to +1, others to -1")
    g.add_argument("--normalize", type=_bool, default=False, help="scale columns to unit norm")
    g.add_argument("--n", type=int, default=100, help="generator: samples")
    g.add_argument("--p", type=int, default=5000, help="generator: features")
    g.add_argument("--active-fraction", type=float, default=0.2, help="generator: nonzero fraction")
    g.add_argument("--design", choices=("uniform", "gaussian"), default="uniform")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--loss", choices=[l.value for l in Loss], default="squared")


def _add_solver_args(p, methods=METHODS, default="saif"):
    g = p.add_argument_group("solver")
    g.add_argument("--method", choices=methods, default=default)
    g.add_argument("--eps", type=float, default=1e-6, help="duality-gap tolerance")
    g.add_argument("--c", type=float, default=1.0, help="recruiting-size constant")
    g.add_argument("--zeta", type=float, default=0.5, help="violation tolerance fraction")
    g.add_argument("--inner-k", type=_optional_int, default=None, help="CM passes per check (default: balanced)")
    g.add_argument("--delta-growth", type=float, default=10.0)
    g.add_argument("--ball-mode", choices=engine.BALL_MODES, default="gap_only")
    g.add_argument("--delete-rule", choices=engine.DELETE_RULES, default="hybrid")
    g.add_argument("--max-outer", type=int, default=200_000)


def _add_lambda_args(p):
    g = p.add_argument_group("penalty").add_mutually_exclusive_group()
    g.add_argument("--lam", type=float, default=None, help="absolute penalty")
    g.add_argument("--lam-ratio", type=float, default=None, help="penalty as a fraction of lambda_max")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saif", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file with defaults for any flag")
        p.add_argument("--out-dir", default=".", help="directory for outputs")
        p.add_argument("--tag", default=None, help="output file stem (default: the command name)")

    p = sub.add_parser("solve", help="solve one LASSO instance")
    common(p)
    _add_data_args(p)
    _add_solver_args(p)
    _add_lambda_args(p)

    p = sub.add_parser("path", help="solve along a log-spaced penalty grid")
    common(p)
    _add_data_args(p)
    _add_solver_args(p, baselines.PATH_METHODS + ("none",))
    p.add_argument("--grid-count", type=int, default=20)
    p.add_argument("--grid-ratio", type=float, default=1e-3, help="smallest lambda / lambda_max")

    p = sub.add_parser("fused", help="solve a tree fused LASSO")
    common(p)
    _add_data_args(p)
    _add_solver_args(p, ("saif", "dynamic", "plain", "none"))
    _add_lambda_args(p)
    p.add_argument("--tree", help="edge-list file (1-based 'a,b' lines)")
    p.add_argument("--tree-kind", choices=("chain", "random"), default="chain")
    p.add_argument("--tree-seed", type=int, default=0)
    p.add_argument("--root", type=_optional_int, default=None, help="1-based root node")

    p = sub.add_parser("gen", help="write a synthetic data set (and optionally a tree)")
    common(p)
    _add_data_args(p)
    p.add_argument("--tree-kind", choices=("none", "chain", "random"), default="none")
    p.add_argument("--tree-seed", type=int, default=0)

    p = sub.add_parser("plot", help="render SVG figures from CSV outputs")
    common(p)
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    p.add_argument("--inputs", nargs="+", required=True, help="results or trace CSV files")
    p.add_argument("--bins", type=int, default=20, help="heat-map time bins")
    return parser


def _load_config_file(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParameterError(f"{path}: line {lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = _load_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(values) - set(known))
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        defaults = {}
        for key, value in values.items():
            action = known[key]
            conv = action.type or str
            try:
                defaults[key] = conv(value)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"config key {key!r}: {exc}")
            if action.choices is not None and defaults[key] not in action.choices:
                parser.error(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def run_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def _config_obj(args) -> SaifConfig:
    return SaifConfig(epsilon=args.eps, c=args.c, zeta=args.zeta, inner_k=args.inner_k,
                      delta_growth=args.delta_growth, ball_mode=args.ball_mode,
                      delete_rule=args.delete_rule, max_outer=args.max_outer).validate()


def load_dataset(args):
    loss = Loss.coerce(args.loss)
    if args.data:
        ds = read_libsvm(args.data, relabel_gt4=args.relabel_gt4, normalize=args.normalize)
        return ds, None
    gen = gen_synthetic_classification if loss is Loss.LOGISTIC else gen_synthetic_regression
    return gen(args.n, args.p, args.active_fraction, args.seed, design=args.design,
               normalize=args.normalize)


def _resolve_lambda(args, lam_max):
    if args.lam is not None:
        return float(args.lam)
    if args.lam_ratio is not None:
        return float(args.lam_ratio) * lam_max
    raise ParameterError("one of --lam or --lam-ratio is required")


def _solver_for(method):
    method = "plain" if method == "none" else method
    return method, {"saif": engine.solve, "dynamic": baselines.solve_dynamic,
                    "plain": baselines.solve_plain}[method]


def _result_row(res, eps) -> dict:
    row = {"method": res.method, "lambda": res.lam, "eps": eps, "time_s": res.time_s,
           "base_ops": res.counters.base_ops, "weighted_ops": res.counters.weighted_ops,
           "support": int(res.support.size), "gap": res.gap, "certificate": bool(res.certificate)}
    if res.cum_time_s is not None:
        row["cum_time_s"] = res.cum_time_s
    return row


def _write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _envelope(args, **payload) -> dict:
    return {"format_version": FORMAT_VERSION, "command": args.command, "config": run_config(args), **payload}


def _out(args, suffix) -> Path:
    stem = args.tag or args.command
    return Path(args.out_dir) / f"{stem}{suffix}"


def cmd_solve(args) -> int:
    ds, _ = load_dataset(args)
    probe = Problem(ds.X, ds.y, args.loss, 1.0)
    lam_max = float(probe.null_scores().max())
    lam = _resolve_lambda(args, lam_max)
    problem = probe.with_lam(lam)
    method, solver = _solver_for(args.method)
    res = solver(problem, _config_obj(args))
    _write_csv(_out(args, "_trace.csv"), TRACE_COLUMNS, res.trace.to_rows())
    _write_csv(_out(args, "_results.csv"), RESULT_COLUMNS, [_result_row(res, args.eps)])
    _write_json(_out(args, ".json"), _envelope(args, lambda_max=lam_max, dataset=ds.provenance,
                                               result=res.summary()))
    return 0 if res.certificate else 1


def cmd_path(args) -> int:
    ds, _ = load_dataset(args)
    template = Problem(ds.X, ds.y, args.loss, 1.0)
    lam_max = float(template.null_scores().max())
    grid = baselines.log_lambda_grid(lam_max, args.grid_count, args.grid_ratio)
    method = "plain" if args.method == "none" else args.method
    results = baselines.solve_path(template, grid, method, _config_obj(args))
    rows, trace_rows = [], []
    for res in results:
        rows.append(_result_row(res, args.eps))
        for rec in res.trace.to_rows():
            trace_rows.append(dict(rec, **{"lambda": res.lam, "lambda_ratio": res.lam / lam_max,
                                           "p_frac": rec["p_t"] / ds.p}))
    _write_csv(_out(args, "_results.csv"), RESULT_COLUMNS + ("cum_time_s",), rows)
    _write_csv(_out(args, "_trace.csv"), PATH_TRACE_COLUMNS, trace_rows)
    _write_json(_out(args, ".json"), _envelope(args, lambda_max=lam_max, lambdas=grid,
                                               dataset=ds.provenance,
                                               results=[r.summary() for r in results]))
    return 0 if all(r.certificate for r in results) else 1


def _tree(args, p):
    root = None if args.root is None else args.root - 1
    if args.tree:
        tree = read_edge_list(args.tree, p)
        if root is not None:
            tree = type(tree)(p, tree.edges, root=root)
        return tree
    tree = gen_chain_tree(p) if args.tree_kind == "chain" else gen_random_tree(p, args.tree_seed)
    return tree if root is None else type(tree)(p, tree.edges, root=root)


def cmd_fused(args) -> int:
    ds, _ = load_dataset(args)
    tree = _tree(args, ds.p)
    _, _, Xt = fused_problem(ds.X, ds.y, tree, 1.0, args.loss)
    lam_max = fused_lambda_max(Xt, ds.y, args.loss)
    lam = _resolve_lambda(args, lam_max)
    _, solver = _solver_for(args.method)
    res = solve_fused(ds.X, ds.y, tree, lam, args.loss, _config_obj(args), solver=solver)
    _write_csv(_out(args, "_trace.csv"), TRACE_COLUMNS, res.trace.to_rows())
    summary = res.summary()
    summary["beta"] = res.beta.tolist()
    _write_json(_out(args, ".json"), _envelope(args, lambda_max=lam_max, dataset=ds.provenance,
                                               result=summary))
    return 0 if res.certificate else 1


def cmd_gen(args) -> int:
    ds, beta = load_dataset(args)
    write_libsvm(_out(args, ".libsvm"), ds)
    if beta is not None:
        np.savetxt(_out(args, "_beta.txt"), beta, fmt="%.17g")
    files = [str(_out(args, ".libsvm"))]
    if args.tree_kind != "none":
        tree = gen_chain_tree(ds.p) if args.tree_kind == "chain" else gen_random_tree(ds.p, args.tree_seed)
        write_edge_list(_out(args, "_tree.csv"), tree)
        files.append(str(_out(args, "_tree.csv")))
    _write_json(_out(args, ".json"), _envelope(args, dataset=ds.provenance, files=files,
                                               n=ds.n, p=ds.p))
    return 0


def cmd_plot(args) -> int:
    tables = {Path(f).stem: read_csv_rows(f) for f in args.inputs}
    out = _out(args, f"_{args.kind}.svg")
    if args.kind == "runtime_bars":
        rows = [r for t in tables.values() for r in t]
        header = next(iter(tables.values())).header
        from .plotting import _Rows

        runtime_bars(_Rows(rows, header), out)
    elif args.kind == "active_size_vs_time":
        active_size_vs_time(tables, out)
    elif args.kind == "dual_value_vs_time":
        dual_value_vs_time(tables, out)
    else:
        rows = [r for t in tables.values() for r in t]
        from .plotting import _Rows

        heatmap_pt(_Rows(rows, next(iter(tables.values())).header), out, n_bins=args.bins)
    return 0


COMMANDS = {"solve": cmd_solve, "path": cmd_path, "fused": cmd_fused, "gen": cmd_gen, "plot": cmd_plot}


def main(argv=None) -> int:
    args = parse_args(argv)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        return COMMANDS[args.command](args)
    except (SaifError, OSError) as exc:
        payload = {"type": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConvergenceError) and exc.result is not None:
            payload["best_iterate"] = exc.result.summary()
        if os.environ.get("SAIF_DEBUG"):
            payload["traceback"] = traceback.format_exc()
        _write_json(_out(args, "_error.json"), _envelope(args, error=payload))
        print(json.dumps({"error": payload}, default=_json_default), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
