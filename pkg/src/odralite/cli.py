"""Command-line interface for the odralite object store and query engine.

Commands operate on a working database snapshot (``--db``, default
``$ODRALITE_DB`` or ``./odralite.snap``). ``load`` installs a snapshot as the
working database and ``save`` writes the working database out.

Exit status: 0 success, 1 user error, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from . import bench, engine, fusion, store as store_mod, xmlio
from .query import ParseError, parse
from .store import Collection, Store, StoreError, escape_string, format_payload

DEFAULT_DB = "odralite.snap"


class UserError(Exception):
    pass


def _read_store(path: str, missing_ok: bool = False) -> Store:
    if not os.path.exists(path):
        if missing_ok:
            return Store()
        raise UserError(f"no such snapshot: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        return store_mod.load_snapshot(fh)


def _write_store(store: Store, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        store_mod.save_snapshot(store, fh)
    os.replace(tmp, path)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return escape_string(value)
    if isinstance(value, Collection):
        return format_payload(value)
    return repr(value) if isinstance(value, float) else str(value)


def format_result(result, top: bool = True) -> str:
    """Tuple components are tab-separated; nested tuples print as ``(a, b)``."""
    if isinstance(result, engine.TupleR):
        parts = [format_result(item, top=False) for item in result.items]
        return "\t".join(parts) if top else "(" + ", ".join(parts) + ")"
    if isinstance(result, engine.RefR):
        return f"ref:{result.oid}"
    return format_value(result.value)


def format_results(results) -> str:
    lines = sorted(format_result(r) for r in results)
    return "".join(line + "\n" for line in lines)


def _cmd_load(args, out):
    store = _read_store(args.snapshot)
    _write_store(store, args.db)
    out.write(f"loaded {len(store)} objects into {args.db}\n")


def _cmd_save(args, out):
    store = _read_store(args.db)
    _write_store(store, args.snapshot)
    out.write(f"saved {len(store)} objects to {args.snapshot}\n")


def _cmd_import_xml(args, out):
    store = _read_store(args.db, missing_ok=True)
    try:
        with open(args.file, encoding="utf-8") as fh:
            document = fh.read()
    except FileNotFoundError:
        raise UserError(f"no such file: {args.file}") from None
    for oid in xmlio.import_xml(document, store, args.root_class):
        out.write(f"{oid}\n")
    _write_store(store, args.db)


def _cmd_export_xml(args, out):
    store = _read_store(args.db)
    text = xmlio.export_xml(args.oid, store)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)


def _cmd_query(args, out):
    store = _read_store(args.db)
    node = parse(args.text)
    results = engine.execute(node, store, args.strategy, args.mode, args.partitions, args.threads)
    out.write(format_results(results))


def _cmd_explain(args, out):
    store = _read_store(args.db)
    out.write(engine.explain(parse(args.text), store, args.mode, args.partitions))


def _cmd_gen(args, out):
    store = bench.gen_dataset(args.left, args.right, args.len, args.alphabet, args.kind, args.seed)
    _write_store(store, args.out)
    out.write(f"wrote {len(store)} objects to {args.out}\n")


def _cmd_bench(args, out):
    if args.data:
        store = _read_store(args.data)
    else:
        store = bench.gen_dataset(args.left, args.right, args.len, args.alphabet, args.kind, args.seed)
    rows = bench.run_bench(store, args.mode, args.partitions, args.reps, args.threads, args.seed)
    if args.csv:
        bench.append_csv(args.csv, rows)
    out.write(",".join(bench.CSV_HEADER) + "\n")
    for row in rows:
        out.write(",".join(str(v) for v in vars(row).values()) + "\n")


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--db", default=os.environ.get("ODRALITE_DB", DEFAULT_DB),
                        help="working database snapshot")
    parser = argparse.ArgumentParser(prog="odralite", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("load", parents=[common], help="install a snapshot as the working database")
    p.add_argument("snapshot")
    p.set_defaults(func=_cmd_load)

    p = sub.add_parser("save", parents=[common], help="write the working database to a snapshot")
    p.add_argument("snapshot")
    p.set_defaults(func=_cmd_save)

    p = sub.add_parser("import-xml", parents=[common], help="import an XML document")
    p.add_argument("file")
    p.add_argument("--root-class", default=None, help="rename the imported root objects")
    p.set_defaults(func=_cmd_import_xml)

    p = sub.add_parser("export-xml", parents=[common], help="export an object subtree as XML")
    p.add_argument("oid", type=int)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_export_xml)

    for name, func, help_text in (
        ("query", _cmd_query, "run a query and print one sorted line per result"),
        ("explain", _cmd_explain, "show whether a query is rewritten into a hash-trie join"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("text")
        if name == "query":
            p.add_argument("--strategy", choices=engine.STRATEGIES, default="auto")
            p.add_argument("--threads", type=_positive, default=1)
        p.add_argument("--mode", choices=fusion.MODES, default=fusion.SEQ)
        p.add_argument("--partitions", type=_positive, default=1)
        p.set_defaults(func=func)

    def dataset_args(p, required):
        p.add_argument("--left", type=int, required=required, default=0)
        p.add_argument("--right", type=int, required=required, default=0)
        p.add_argument("--len", type=int, required=required, default=0)
        p.add_argument("--alphabet", type=int, required=required, default=1)
        p.add_argument("--kind", choices=store_mod.COLLECTION_KINDS, required=required, default="list")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gen", help="generate a synthetic join dataset")
    dataset_args(p, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("bench", help="time naive vs fusion joins")
    dataset_args(p, required=False)
    p.add_argument("--data", default=None, help="snapshot with L/R classes instead of generating")
    p.add_argument("--mode", choices=fusion.MODES, default=fusion.SEQ)
    p.add_argument("--partitions", type=_positive, default=1)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--threads", type=_positive, default=1)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_bench)
    return parser


USER_ERRORS = (
    UserError,
    ParseError,
    engine.EvalError,
    fusion.JoinKeyError,
    StoreError,
    xmlio.XmlError,
    bench.InvalidParams,
    OSError,
    ValueError,
)
INTERNAL_ERRORS = (engine.StackDisciplineError, bench.StrategyMismatch, AssertionError)


def run_command(argv: Sequence[str], out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        args.func(args, out)
    except INTERNAL_ERRORS as exc:
        err.write(f"odralite: internal error: {' '.join(str(exc).split())}\n")
        return 2
    except engine.NoFusionPlan as exc:
        err.write(f"odralite: no fusion plan ({exc.reason})\n")
        return 1
    except USER_ERRORS as exc:
        err.write(f"odralite: {' '.join(str(exc).split())}\n")
        return 1
    return 0


def main(argv: Optional[Sequence[str]] = None) -> None:
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))
