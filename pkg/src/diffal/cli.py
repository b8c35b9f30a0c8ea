"""Command-line front end.

Exit codes: 0 success, 1 configuration problem (bad flags, config, inputs),
2 runtime failure.  All artifacts land under the directory given by --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import selfcheck as selfcheck_mod
from ._backend import backend_name
from .data import generate_checkerboard, load_embedding_file, write_embedding_file
from .errors import ConfigurationError, DiffalError
from .harness import ExperimentConfig, aggregate_seeds, emit_curves, run_comparison
from .knn_graph import build_knn_graph, connectivity_report, dump_graph_csv, suggest_params
from .query import CRITERIA


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """--set dotted.key=value edits, last one wins; values parse as JSON."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"--set path {key!r} crosses a non-object")
        node[parts[-1]] = parsed
    return raw


def _load_config(args) -> ExperimentConfig:
    path = Path(args.config)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config file {path} must hold a JSON object")
    raw = _apply_overrides(raw, args.set or [])
    if getattr(args, "seeds", None):
        raw["seeds"] = [int(s) for s in args.seeds.split(",")]
    return ExperimentConfig.from_dict(raw)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _zero_wall_times(curves) -> None:
    for curve in curves:
        for rec in curve.records:
            rec.wall_time = 0.0


def _cmd_gen_checkerboard(args) -> int:
    data = generate_checkerboard(args.n, grid=args.grid, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_embedding_file(data, out)
    print(f"wrote {out} (n={data.n}, d={data.dim}, C={data.num_classes})")
    return 0


def _run_and_emit(cfg: ExperimentConfig, criteria: list[str], args) -> int:
    curves = run_comparison(cfg, criteria)
    if args.timing == "zero":
        _zero_wall_times(curves)
    out = _out_dir(args)
    emit_curves(curves, out / "curves.csv")
    for criterion in criteria:
        agg = aggregate_seeds([c for c in curves if c.criterion == criterion])
        final = agg["mean"][-1]
        print(f"{criterion}: final mean accuracy {final:.4f} "
              f"over {len(cfg.seeds)} seed(s) at {int(agg['labels_used'][-1])} labels")
    print(f"wrote {out / 'curves.csv'}")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    return _run_and_emit(cfg, [cfg.query.criterion], args)


def _cmd_compare(args) -> int:
    cfg = _load_config(args)
    criteria = [c.strip() for c in args.criteria.split(",") if c.strip()]
    if not criteria:
        raise ConfigurationError("--criteria needs at least one name")
    for criterion in criteria:
        if criterion not in CRITERIA:
            raise ConfigurationError(
                f"unknown criterion {criterion!r}; choose from {', '.join(CRITERIA)}"
            )
    return _run_and_emit(cfg, criteria, args)


def _cmd_graph_report(args) -> int:
    data = load_embedding_file(args.emb)
    k = args.k
    if k is None:
        k, _ = suggest_params(data.n)
    graph = build_knn_graph(data, k, method=args.method)
    labels, count = connectivity_report(graph)
    sizes = np.bincount(labels)
    k_sugg, t_sugg = suggest_params(data.n, k)
    print(f"points={data.n} d={data.dim} K={k}")
    print(f"components={count} largest={int(sizes.max())}")
    print(f"suggested K={k_sugg} T={t_sugg}")
    if args.dump:
        dump_graph_csv(graph, args.dump)
        print(f"wrote {args.dump}")
    return 0


def _cmd_selfcheck(args) -> int:
    ok = selfcheck_mod.run_selfcheck(quick=args.quick)
    return 0 if ok else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffal",
        description="Graph-diffusion batch active learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-checkerboard", help="write a checkerboard pool as an EMB1 file")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output EMB1 path")
    p.set_defaults(func=_cmd_gen_checkerboard)

    for name, helptext in (("run", "run the configured criterion"),
                           ("compare", "run several criteria on one config")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (dotted path, repeatable)")
        p.add_argument("--seeds", help="comma-separated seed list override")
        p.add_argument("--timing", choices=("wall", "zero"), default="wall",
                       help="zero out wall times for byte-reproducible CSVs")
        if name == "compare":
            p.add_argument("--criteria", required=True,
                           help="comma-separated criterion names")
            p.set_defaults(func=_cmd_compare)
        else:
            p.set_defaults(func=_cmd_run)

    p = sub.add_parser("graph-report", help="connectivity and parameter report for an EMB1 file")
    p.add_argument("--emb", required=True, help="EMB1 file")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--method", choices=("auto", "brute", "tree"), default="auto")
    p.add_argument("--dump", help="optional CSV edge dump path")
    p.set_defaults(func=_cmd_graph_report)

    p = sub.add_parser("selfcheck", help="run the built-in solver/kernel verification suite")
    p.add_argument("--quick", action="store_true", help="fewer random instances")
    p.set_defaults(func=_cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"diffal: configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"diffal: configuration error: {exc}", file=sys.stderr)
        return 1
    except DiffalError as exc:
        print(f"diffal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"diffal: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
