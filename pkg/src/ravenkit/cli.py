"""Command-line entry points: gen, audit, solve, train, eval, render.

Exit codes: 0 success, 1 usage error, 2 data or schema error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from pathlib import Path

from .abt import STYLES
from .audit import AFFINE, SET_MLP, audit_dataset, summarize
from .generate import generate_puzzles
from .io import DatasetError, dumps, read_dataset, write_dataset
from .model import CONFIG_NAMES, get_configuration
from .oracle import solve
from .raster import DEFAULT_PX, MIN_PX, render_puzzles
from .rules import GenerationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _add_common(p):
    p.add_argument("--config-file", help="JSON object of flag values; command-line flags take precedence")


def build_parser() -> _Parser:
    parser = _Parser(prog="ravenkit", description="Symbolic Raven-style puzzle toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("--count", type=int, help="number of puzzles")
    g.add_argument("--config", default="all", help=f"configuration name or 'all' ({', '.join(CONFIG_NAMES)})")
    g.add_argument("--style", default="abt", choices=STYLES, help="answer-set generator")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--out", help="output directory")
    g.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes")

    a = sub.add_parser("audit", help="answer-set fairness report")
    a.add_argument("--in", dest="input", help="dataset directory")
    a.add_argument("--probe-epochs", type=int, default=10, help="context-blind probe epochs (negative skips it)")
    a.add_argument("--probe-kind", default=SET_MLP, choices=(SET_MLP, AFFINE))
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--report", default="report.json", help="JSON report path")

    s = sub.add_parser("solve", help="run the symbolic oracle on every record")
    s.add_argument("--in", dest="input", help="dataset directory")
    s.add_argument("--report", default="report.json")

    t = sub.add_parser("train", help="train the rule-embedding network")
    t.add_argument("--in", dest="input", help="dataset directory")
    t.add_argument("--d", type=int, default=64, help="embedding width")
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--mask", default="cell,ind,eco", help="active hierarchies, comma separated")
    t.add_argument("--orderless", action="store_true", help="sum cell embeddings within a row")
    t.add_argument("--columns", action="store_true", help="add the column branch")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--ckpt", help="checkpoint output path")

    e = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    e.add_argument("--in", dest="input", help="dataset directory")
    e.add_argument("--ckpt", help="checkpoint path")
    e.add_argument("--split", default="test", choices=("train", "val", "test"))
    e.add_argument("--report", default="report.json")

    r = sub.add_parser("render", help="rasterize panels to PGM files")
    r.add_argument("--in", dest="input", help="dataset directory")
    r.add_argument("--px", type=int, default=DEFAULT_PX)
    r.add_argument("--out", help="output directory")
    r.add_argument("--limit", type=int, default=None, help="render only the first N puzzles")

    for p in (g, a, s, t, e, r):
        _add_common(p)
    return parser


_REQUIRED = {
    "gen": ("count", "out"),
    "audit": ("input",),
    "solve": ("input",),
    "train": ("input", "ckpt"),
    "eval": ("input", "ckpt"),
    "render": ("input", "out"),
}


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage())
    if args.config_file:
        try:
            overrides = json.loads(Path(args.config_file).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        if not isinstance(overrides, dict):
            raise UsageError("config file must hold a JSON object")
        overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
        overrides = {("input" if k == "in" else k): v for k, v in overrides.items()}
        unknown = set(overrides) - set(vars(args)) - {"command"}
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        subparser.set_defaults(**overrides)
        args = parser.parse_args(argv)
    missing = [k for k in _REQUIRED[args.command] if getattr(args, k) is None]
    if missing:
        flags = ", ".join("--" + ("in" if k == "input" else k.replace("_", "-")) for k in missing)
        raise UsageError(f"ravenkit {args.command}: missing required {flags}")
    return args


def _write_report(path, report: dict) -> None:
    Path(path).write_text(dumps(report) + "\n")


def cmd_gen(args) -> int:
    if args.count < 0:
        raise UsageError("--count must be non-negative")
    if args.config == "all":
        configs = CONFIG_NAMES
    else:
        try:
            configs = tuple(get_configuration(c.strip()).name for c in args.config.split(","))
        except KeyError as exc:
            raise UsageError(str(exc)) from exc
    puzzles = generate_puzzles(args.count, configs, args.style, args.seed, jobs=args.jobs)
    manifest = write_dataset(puzzles, args.out, master_seed=args.seed, configs=configs, style=args.style)
    print(f"wrote {args.count} puzzles to {args.out} {manifest['counts']}")
    return EXIT_OK


def cmd_audit(args) -> int:
    ds = read_dataset(args.input, strict=False)
    if not ds.all():
        raise DatasetError("dataset has no readable records")
    report = audit_dataset(ds, seed=args.seed, probe_epochs=args.probe_epochs, probe_kind=args.probe_kind)
    _write_report(args.report, report)
    print(summarize(report))
    return EXIT_OK


def cmd_solve(args) -> int:
    ds = read_dataset(args.input)
    statuses = Counter()
    hits = 0
    wrong = []
    for p in ds.all():
        res = solve(p)
        statuses[res.status] += 1
        if res.index == p.target:
            hits += 1
        else:
            wrong.append(p.id)
    n = len(ds.all())
    report = {
        "n_records": n,
        "oracle_accuracy": hits / n if n else None,
        "oracle_status": dict(sorted(statuses.items())),
        "unsolved_ids": wrong,
    }
    _write_report(args.report, report)
    acc = "n/a" if not n else f"{hits / n:.4f}"
    print(f"oracle accuracy {acc} over {n} records {dict(sorted(statuses.items()))}")
    return EXIT_OK


def _encoded_splits(ds):
    from .sran.train import encode_puzzles

    return {k: encode_puzzles(v) for k, v in ds.splits.items() if v}


def cmd_train(args) -> int:
    from .sran.network import HierarchyMask, init_params
    from .sran.train import TrainConfig, accuracy, config_dict, save_checkpoint, train

    try:
        mask = HierarchyMask.parse(args.mask)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = read_dataset(args.input)
    data = _encoded_splits(ds)
    if "train" not in data:
        raise DatasetError("train split is empty")
    params = init_params(args.d, mask, args.orderless, args.columns, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed)
    trace = train(params, data["train"], cfg, data.get("val"), log=print)
    extra = {
        "train_config": config_dict(cfg),
        "epoch_loss": trace.epoch_loss,
        "val_accuracy": trace.val_accuracy,
        "dataset_manifest": ds.manifest,
    }
    save_checkpoint(params, args.ckpt, extra)
    if "test" in data:
        print(f"test accuracy {accuracy(params, *data['test']):.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .sran.train import accuracy, load_checkpoint

    try:
        params = load_checkpoint(args.ckpt)
    except (OSError, ValueError, KeyError) as exc:
        raise DatasetError(f"cannot load checkpoint: {exc}") from exc
    ds = read_dataset(args.input)
    data = _encoded_splits(ds)
    if args.split not in data:
        raise DatasetError(f"split {args.split!r} is empty")
    acc = accuracy(params, *data[args.split])
    report = {"split": args.split, "n_records": len(ds.splits[args.split]), "accuracy": acc}
    _write_report(args.report, report)
    print(f"{args.split} accuracy {acc:.4f} over {report['n_records']} records")
    return EXIT_OK


def cmd_render(args) -> int:
    if args.px < MIN_PX:
        raise UsageError(f"--px must be at least {MIN_PX}")
    ds = read_dataset(args.input)
    puzzles = ds.all()[: args.limit] if args.limit is not None else ds.all()
    render_puzzles(puzzles, args.out, args.px)
    print(f"rendered {len(puzzles)} puzzles to {args.out}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "audit": cmd_audit,
    "solve": cmd_solve,
    "train": cmd_train,
    "eval": cmd_eval,
    "render": cmd_render,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc).rstrip(), file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GenerationError, InvariantError, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
