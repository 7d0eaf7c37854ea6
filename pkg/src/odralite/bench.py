"""Synthetic datasets and the naive-vs-fusion join benchmark."""
from __future__ import annotations

import csv
import os
import random
import statistics
import time
from dataclasses import astuple, dataclass

from . import fusion
from .store import COLLECTION_KINDS, Collection, Complex, Store

CSV_HEADER = [
    "n_left", "n_right", "coll_len", "kind", "mode", "strategy",
    "build_ms", "probe_ms", "total_ms", "pairs", "seed",
]


class InvalidParams(ValueError):
    pass


class StrategyMismatch(AssertionError):
    """Strategies disagreed on the pair count: a correctness bug."""


@dataclass
class BenchRow:
    n_left: int
    n_right: int
    coll_len: int
    kind: str
    mode: str
    strategy: str
    build_ms: float
    probe_ms: float
    total_ms: float
    pairs: int
    seed: int


def gen_dataset(n_left: int, n_right: int, coll_len: int, alphabet: int, kind: str, seed: int) -> Store:
    """Roots ``L`` and ``R``, each with a collection attribute ``k``.

    Elements are drawn uniformly from ``range(alphabet)``; sets draw without
    replacement. Output depends only on the arguments.
    """
    if min(n_left, n_right, coll_len) < 0:
        raise InvalidParams("counts must be non-negative")
    if alphabet < 1:
        raise InvalidParams("alphabet must be at least 1")
    if kind not in COLLECTION_KINDS:
        raise InvalidParams(f"kind must be one of {COLLECTION_KINDS}")
    if kind == "set" and alphabet < coll_len:
        raise InvalidParams(f"a set of {coll_len} distinct elements needs alphabet >= {coll_len}")
    rng = random.Random(seed)
    population = range(alphabet)
    store = Store()
    for name, count in (("L", n_left), ("R", n_right)):
        for _ in range(count):
            if kind == "set":
                elements = rng.sample(population, coll_len)
            else:
                elements = [rng.randrange(alphabet) for _ in range(coll_len)]
            root = store.insert_object(None, name, Complex())
            store.insert_object(root, "k", Collection(kind, tuple(elements)))
    return store


def join_inputs(store: Store, class_name: str, attr: str = "k") -> list[tuple]:
    items = []
    for oid in store.roots(class_name):
        (child,) = store.resolve_child(oid, attr)
        items.append((oid, store.get_object(child).payload))
    return items


def _time_fusion(left, right, mode, partitions, threads):
    t0 = time.perf_counter()
    build_items = fusion.canonicalize_items(left, mode)
    if threads > 1 and partitions > 1:
        probe_items = fusion.canonicalize_items(right, mode)
        t1 = time.perf_counter()
        pairs = fusion.parallel_join(build_items, probe_items, partitions, mode, threads)
    else:
        index = fusion.build_index(build_items, partitions, mode)
        t1 = time.perf_counter()
        probe_items = fusion.canonicalize_items(right, mode)
        pairs = fusion.probe_all(index, probe_items)
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1, t2 - t0, len(pairs)


def _time_naive(left, right, mode):
    t0 = time.perf_counter()
    left_items = fusion.canonicalize_items(left, mode)
    t1 = time.perf_counter()
    right_items = fusion.canonicalize_items(right, mode)
    pairs = fusion.nested_loop_pairs(left_items, right_items)
    t2 = time.perf_counter()
    return t1 - t0, t2 - t1, t2 - t0, len(pairs)


def run_bench(
    store: Store,
    mode: str = fusion.SEQ,
    partitions: int = 1,
    repetitions: int = 5,
    threads: int = 1,
    seed: int = 0,
    strategies=("naive", "fusion"),
) -> list[BenchRow]:
    """Median-of-``repetitions`` timings for joining ``L.k`` with ``R.k``."""
    if repetitions < 3:
        raise InvalidParams("at least 3 repetitions are required")
    left, right = join_inputs(store, "L"), join_inputs(store, "R")
    lengths = {len(c) for _, c in left + right}
    kinds = {c.kind for _, c in left + right}
    coll_len = lengths.pop() if len(lengths) == 1 else -1
    kind = kinds.pop() if len(kinds) == 1 else "mixed"

    rows = []
    for strategy in strategies:
        samples = []
        for _ in range(repetitions):
            if strategy == "naive":
                samples.append(_time_naive(left, right, mode))
            else:
                samples.append(_time_fusion(left, right, mode, partitions, threads))
        pair_counts = {s[3] for s in samples}
        if len(pair_counts) != 1:
            raise StrategyMismatch(f"{strategy} pair count varies across repetitions: {pair_counts}")
        build, probe, total = (statistics.median(s[i] * 1000.0 for s in samples) for i in range(3))
        rows.append(BenchRow(
            len(left), len(right), coll_len, kind, mode, strategy,
            round(build, 3), round(probe, 3), round(total, 3), pair_counts.pop(), seed,
        ))
    if len({row.pairs for row in rows}) > 1:
        raise StrategyMismatch(
            "strategies disagree on pairs: " + ", ".join(f"{r.strategy}={r.pairs}" for r in rows)
        )
    return rows


def append_csv(path: str, rows: list[BenchRow]) -> None:
    """Append rows; the header is written only when the file is new or empty."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if fresh:
            writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(astuple(row))

