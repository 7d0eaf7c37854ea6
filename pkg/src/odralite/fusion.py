"""Hash-trie join over collection-valued attributes.

Each object's collection is reduced to a canonical key sequence. Build-side
objects are routed to one of ``P`` partitions by their first key (for sets, the
minimum element), then threaded into a trie whose nodes are hash tables keyed
by element. A probe walks the trie one element per level and only reports
objects whose key ends exactly at the final depth.

Element keys are ``(rank, value)`` tuples with rank 0 for bool, 1 for int and
2 for str, so the natural tuple order gives Bool < Int < Str and ``True`` never
collides with ``1`` inside a hash table.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import compress, repeat
from operator import eq
from typing import Hashable, Optional, Sequence

from .store import Collection

SEQ = "seq"
BAG = "bag"
MODES = (SEQ, BAG)

BOOL_RANK, INT_RANK, STR_RANK = 0, 1, 2
_HASH_TAG = {INT_RANK: 0x01, STR_RANK: 0x02, BOOL_RANK: 0x03}

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1

ElementKey = tuple
KeySequence = tuple


class JoinKeyError(ValueError):
    def __init__(self, message: str, oid=None):
        super().__init__(message)
        self.oid = oid

    def __str__(self):
        msg = super().__str__()
        return msg if self.oid is None else f"{msg} (oid {self.oid})"


class FloatJoinKey(JoinKeyError):
    pass


class NonScalarElement(JoinKeyError):
    pass


@dataclass
class OpCounter:
    """Instrumentation for the linear-work checks."""

    element_hashes: int = 0
    comparisons: int = 0


def element_key(value) -> ElementKey:
    if isinstance(value, bool):
        return (BOOL_RANK, value)
    if isinstance(value, int):
        return (INT_RANK, value)
    if isinstance(value, str):
        return (STR_RANK, value)
    if isinstance(value, float):
        raise FloatJoinKey(f"float element {value!r} cannot be a join key")
    raise NonScalarElement(f"element {value!r} is not a scalar")


def canonical_key(payload: Collection, mode: str = SEQ) -> KeySequence:
    """Canonical key sequence of a collection.

    Sets are always sorted. Lists and arrays keep their stored order in
    ``seq`` mode and are sorted in ``bag`` mode, which turns key equality into
    multiset equality.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if not isinstance(payload, Collection):
        raise NonScalarElement(f"join attribute is not a collection: {payload!r}")
    keys = tuple(element_key(e) for e in payload.elements)
    if payload.kind == "set" or mode == BAG:
        keys = tuple(sorted(keys))
    return keys


def _fnv1a(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def encode_key(key: ElementKey) -> bytes:
    rank, value = key
    tag = bytes((_HASH_TAG[rank],))
    if rank == INT_RANK:
        return tag + value.to_bytes(8, "big", signed=True)
    if rank == STR_RANK:
        return tag + value.encode("utf-8")
    return tag + (b"\x01" if value else b"\x00")


@lru_cache(maxsize=1 << 16)
def element_hash(key: ElementKey) -> int:
    """64-bit FNV-1a over tag byte ++ payload bytes."""
    return _fnv1a(encode_key(key))


def partition_of(keys: KeySequence, partitions: int) -> int:
    if partitions < 1:
        raise ValueError("partition count must be >= 1")
    if not keys or partitions == 1:
        return 0
    return element_hash(keys[0]) % partitions


class TrieNode:
    __slots__ = ("edges", "terminals")

    def __init__(self):
        self.edges: dict[ElementKey, TrieNode] = {}
        self.terminals: list = []

    def walk(self, depth=0):
        """Yield ``(depth, node)`` for every node below and including this one."""
        stack = [(depth, self)]
        while stack:
            d, node = stack.pop()
            yield d, node
            stack.extend((d + 1, child) for child in node.edges.values())


@dataclass
class FusionIndex:
    partitions: list
    mode: str = SEQ
    size: int = field(default=0)

    @property
    def partition_count(self) -> int:
        return len(self.partitions)


def _insert(root: TrieNode, oid, keys: KeySequence) -> None:
    node = root
    for k in keys:
        child = node.edges.get(k)
        if child is None:
            child = node.edges[k] = TrieNode()
        node = child
    node.terminals.append(oid)


def build_index(
    items: Sequence[tuple[Hashable, KeySequence]],
    partitions: int = 1,
    mode: str = SEQ,
    counter: Optional[OpCounter] = None,
) -> FusionIndex:
    """Index already-canonicalized ``(oid, keys)`` pairs."""
    roots = [TrieNode() for _ in range(partitions)]
    hashed = 0
    for oid, keys in items:
        _insert(roots[partition_of(keys, partitions)], oid, keys)
        hashed += len(keys) + 1
    if counter is not None:
        counter.element_hashes += hashed
    return FusionIndex(roots, mode, len(items))


def hashsearch(node: TrieNode, keys: KeySequence, pos: int = 0, counter: Optional[OpCounter] = None) -> list:
    """Search ``keys[pos:]`` below ``node``; return the objects ending there.

    Each step hashes the current element into the current table. A miss ends
    the search with no match; a hit advances both the element cursor and the
    table (one trie level). Reaching the end of the key is a match only for
    objects whose own key also ends at this depth.

    The recursion is unrolled into a loop so long collections do not hit the
    interpreter's recursion limit.
    """
    if not 0 <= pos <= len(keys):
        raise IndexError(f"probe position {pos} outside key of length {len(keys)}")
    lookups = 0
    try:
        while pos < len(keys):
            lookups += 1
            node = node.edges.get(keys[pos])
            if node is None:
                return []
            pos += 1
        return list(node.terminals)
    finally:
        if counter is not None:
            counter.element_hashes += lookups


def probe(index: FusionIndex, keys: KeySequence, counter: Optional[OpCounter] = None) -> list:
    if counter is not None:
        counter.element_hashes += 1
    root = index.partitions[partition_of(keys, index.partition_count)]
    return hashsearch(root, keys, 0, counter)


def canonicalize_items(items, mode: str) -> list[tuple]:
    out = []
    for oid, payload in items:
        try:
            out.append((oid, canonical_key(payload, mode)))
        except JoinKeyError as exc:
            exc.oid = oid
            raise
    return out


def probe_all(index: FusionIndex, probe_items, counter: Optional[OpCounter] = None) -> list[tuple]:
    """Probe with canonicalized ``(oid, keys)`` items; pairs are (build, probe)."""
    pairs = []
    for right_oid, keys in probe_items:
        for left_oid in probe(index, keys, counter):
            pairs.append((left_oid, right_oid))
    return pairs


def parallel_join(build_items, probe_items, partitions, mode, threads):
    buckets = [([], []) for _ in range(partitions)]
    for item in build_items:
        buckets[partition_of(item[1], partitions)][0].append(item)
    for item in probe_items:
        buckets[partition_of(item[1], partitions)][1].append(item)

    def run(bucket):
        # every item of this bucket routes to the same partition root
        index = build_index(bucket[0], 1, mode)
        return probe_all(index, bucket[1], None)

    pairs = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(run, buckets):
            pairs.extend(part)
    return pairs


def fusion_join(
    left,
    right,
    mode: str = SEQ,
    partitions: int = 1,
    threads: int = 1,
    counter: Optional[OpCounter] = None,
) -> list[tuple]:
    """Join ``(oid, Collection)`` sequences on canonical key equality.

    The left side is the build side. Output pairs are ``(left_oid, right_oid)``
    in probe order; compare against other strategies as multisets.
    """
    build_items = canonicalize_items(left, mode)
    probe_items = canonicalize_items(right, mode)
    if not build_items or not probe_items:
        return []
    if threads > 1 and partitions > 1 and counter is None:
        return parallel_join(build_items, probe_items, partitions, mode, threads)
    index = build_index(build_items, partitions, mode, counter)
    return probe_all(index, probe_items, counter)


def nested_loop_pairs(left_items, right_items, counter: Optional[OpCounter] = None) -> list[tuple]:
    """Pairwise comparison of canonicalized items, left-major order."""
    right_oids = [oid for oid, _ in right_items]
    right_keys = [keys for _, keys in right_items]
    pairs = []
    for left_oid, lk in left_items:
        # one equality test per right item, run at C speed
        for right_oid in compress(right_oids, map(eq, repeat(lk), right_keys)):
            pairs.append((left_oid, right_oid))
    if counter is not None:
        counter.comparisons += len(left_items) * len(right_items)
    return pairs


def nested_loop_join(left, right, mode: str = SEQ, counter: Optional[OpCounter] = None) -> list[tuple]:
    """Reference join by direct pairwise comparison, left-major order."""
    return nested_loop_pairs(canonicalize_items(left, mode), canonicalize_items(right, mode), counter)
