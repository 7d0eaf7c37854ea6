import random
from collections import Counter
from functools import reduce

import pytest
from hypothesis import given, strategies as st

from generators import independent_equal, random_join_case
from odralite import fusion
from odralite.fusion import (
    BAG,
    SEQ,
    FloatJoinKey,
    NonScalarElement,
    OpCounter,
    build_index,
    canonical_key,
    element_hash,
    element_key,
    fusion_join,
    hashsearch,
    nested_loop_join,
    partition_of,
    probe,
)
from odralite.store import Collection, Complex, Store


def K(*values):
    return tuple(element_key(v) for v in values)


def fnv1a_reference(data: bytes) -> int:
    return reduce(lambda h, b: ((h ^ b) * 1099511628211) % 2 ** 64, data, 14695981039346656037)


# canonical_key


def test_set_sorted_in_either_mode():
    s = Collection("set", (3, 1, 2))
    assert canonical_key(s, SEQ) == canonical_key(s, BAG) == K(1, 2, 3)


def test_list_seq_keeps_order_bag_sorts():
    lst = Collection("list", (2, 1, 2))
    assert canonical_key(lst, SEQ) == K(2, 1, 2)
    assert canonical_key(lst, BAG) == K(1, 2, 2)


def test_array_follows_list_rules():
    arr = Collection("array", ("b", "a"))
    assert canonical_key(arr, SEQ) == K("b", "a")
    assert canonical_key(arr, BAG) == K("a", "b")


def test_empty_collection_is_empty_key():
    assert canonical_key(Collection("set", ()), SEQ) == ()


def test_float_collections_rejected():
    with pytest.raises(FloatJoinKey):
        canonical_key(Collection("list", (1.0, 2.0)))


def test_non_collection_rejected():
    with pytest.raises(NonScalarElement):
        canonical_key(Complex())
    with pytest.raises(NonScalarElement):
        element_key((1, 2))


def test_element_key_order_bool_int_str():
    keys = sorted([element_key("a"), element_key(5), element_key(True), element_key(-3), element_key(False)])
    assert keys == [element_key(False), element_key(True), element_key(-3), element_key(5), element_key("a")]
    assert element_key(1) != element_key(True)


# element_hash


def test_hash_of_int_zero_matches_reference_bytes():
    assert element_hash(element_key(0)) == fnv1a_reference(bytes([1, 0, 0, 0, 0, 0, 0, 0, 0]))


@pytest.mark.parametrize(
    "value, payload",
    [
        (-1, bytes([1]) + b"\xff" * 8),
        (258, bytes([1, 0, 0, 0, 0, 0, 0, 1, 2])),
        ("", bytes([2])),
        ("é", bytes([2, 0xC3, 0xA9])),
        (True, bytes([3, 1])),
        (False, bytes([3, 0])),
    ],
)
def test_hash_tag_and_payload_encoding(value, payload):
    assert element_hash(element_key(value)) == fnv1a_reference(payload)


def test_hash_known_vector():
    # FNV-1a 64 of the empty input is the offset basis; of b"a" it is a published test vector
    assert fnv1a_reference(b"") == 0xCBF29CE484222325
    assert fnv1a_reference(b"a") == 0xAF63DC4C8601EC8C
    assert fusion._fnv1a(b"a") == 0xAF63DC4C8601EC8C


@given(st.one_of(st.integers(-(2 ** 63), 2 ** 63 - 1), st.text(), st.booleans()))
def test_equal_keys_hash_equal(value):
    assert element_hash(element_key(value)) == element_hash(element_key(value))
    assert 0 <= element_hash(element_key(value)) < 2 ** 64


def test_hash_distribution_over_buckets():
    rng = random.Random(1234)
    buckets = Counter(element_hash(element_key(rng.randint(-(2 ** 63), 2 ** 63 - 1))) % 1024 for _ in range(10 ** 5))
    mean = 10 ** 5 / 1024
    assert max(buckets.values()) < 3 * mean


# partition_of


def test_partition_single():
    assert partition_of(K(5, 6), 1) == 0


@pytest.mark.parametrize("p", [1, 4, 16, 7])
def test_partition_of_empty_key(p):
    assert partition_of((), p) == 0


def test_equal_first_element_same_partition():
    assert partition_of(K(3, 9), 16) == partition_of(K(3, 1, 1), 16)
    assert partition_of(K(3), 16) == element_hash(element_key(3)) % 16


def test_set_partitions_on_minimum():
    key = canonical_key(Collection("set", (9, 4, 7)))
    assert partition_of(key, 16) == element_hash(element_key(4)) % 16


def test_partition_count_must_be_positive():
    with pytest.raises(ValueError):
        partition_of(K(1), 0)


# build_index / hashsearch / probe


def test_build_index_shape():
    index = build_index([("o1", K(1, 2)), ("o2", K(1, 3))], 1)
    root = index.partitions[0]
    assert list(root.edges) == [element_key(1)]
    mid = root.edges[element_key(1)]
    assert set(mid.edges) == {element_key(2), element_key(3)}
    assert mid.terminals == []
    assert mid.edges[element_key(2)].terminals == ["o1"]
    assert mid.edges[element_key(3)].terminals == ["o2"]
    depths = {oid: d for d, node in root.walk() for oid in node.terminals}
    assert depths == {"o1": 2, "o2": 2}


def test_build_index_empty_items():
    index = build_index([], 4)
    assert index.partition_count == 4
    assert all(not r.edges and not r.terminals for r in index.partitions)


def test_empty_key_terminates_at_partition_zero_root():
    index = build_index([("o3", ())], 4)
    assert index.partitions[0].terminals == ["o3"]


def test_hashsearch_full_match_and_prefix_rejection():
    index = build_index([("o1", K(1, 2)), ("o2", K(1, 3))], 1)
    root = index.partitions[0]
    assert hashsearch(root, K(1, 3)) == ["o2"]
    assert hashsearch(root, K(1)) == []
    assert hashsearch(root, K(1, 3, 4)) == []
    assert hashsearch(root, K(9)) == []
    assert hashsearch(root.edges[element_key(1)], K(1, 2), 1) == ["o1"]
    with pytest.raises(IndexError):
        hashsearch(root, K(1), 2)


def test_hashsearch_on_empty_root():
    assert hashsearch(fusion.TrieNode(), K(1, 2)) == []
    assert hashsearch(fusion.TrieNode(), ()) == []


def test_probe_empty_key_returns_only_empty_keyed_items():
    index = build_index([("e1", ()), ("x", K(1)), ("e2", ())], 4)
    assert probe(index, ()) == ["e1", "e2"]


def test_probe_results_come_from_one_partition():
    rng = random.Random(5)
    items = [(i, K(*[rng.randrange(3) for _ in range(rng.randint(0, 3))])) for i in range(200)]
    index = build_index(items, 16)
    for _, key in items:
        hits = set(probe(index, key))
        part = partition_of(key, 16)
        assert hits <= {oid for oid, k in items if partition_of(k, 16) == part}


def test_jeddah_branches():
    # build side: the branches located in Jeddah; probe side: every student's branch city
    store = Store()
    branches = []
    for name, city in (("North", "Jeddah"), ("Corniche", "Jeddah"), ("Main", "Rabigh")):
        b = store.insert_object(None, "Branch", Complex())
        store.insert_object(b, "city", Collection("list", (city,)))
        branches.append((b, city))
    jeddah = [(b, Collection("list", (city,))) for b, city in branches if city == "Jeddah"]
    index = build_index(fusion.canonicalize_items(jeddah, SEQ), 2)
    students = {"Ali": "Jeddah", "Sara": "Rabigh", "Omar": "Jeddah"}
    matched = {name for name, city in students.items() if probe(index, K(city))}
    assert matched == {"Ali", "Omar"}
    assert sorted(probe(index, K("Jeddah"))) == sorted(b for b, _ in jeddah)


# fusion_join / nested_loop_join


def test_set_equality_ignores_order():
    left = [("a", Collection("set", (1, 2)))]
    right = [("b", Collection("set", (2, 1)))]
    assert fusion_join(left, right) == [("a", "b")]


def test_list_join_depends_on_mode():
    left = [("a", Collection("list", (1, 2)))]
    right = [("b", Collection("list", (2, 1)))]
    assert fusion_join(left, right, SEQ) == []
    assert fusion_join(left, right, BAG) == [("a", "b")]
    assert nested_loop_join(left, right, SEQ) == []
    assert nested_loop_join(left, right, BAG) == [("a", "b")]


@pytest.mark.parametrize("join", [fusion_join, nested_loop_join])
def test_either_side_empty(join):
    side = [("a", Collection("list", (1,)))]
    assert join([], side) == []
    assert join(side, []) == []


def test_nested_loop_singleton_and_duplicates():
    one = Collection("list", (5,))
    assert nested_loop_join([("a", one)], [("b", one)]) == [("a", "b")]
    left = [("l1", one), ("l2", one)]
    right = [("r1", one), ("r2", Collection("list", (6,))), ("r3", one), ("r4", one)]
    pairs = nested_loop_join(left, right)
    assert len(pairs) == 6
    assert pairs == [(l, r) for l in ("l1", "l2") for r in ("r1", "r3", "r4")]


def test_float_key_error_carries_oid():
    with pytest.raises(FloatJoinKey) as info:
        fusion_join([("a", Collection("list", (1,)))], [("bad", Collection("list", (0.5,)))])
    assert info.value.oid == "bad"
    assert "bad" in str(info.value)


def test_empty_collections_join_each_other():
    left = [("a", Collection("set", ())), ("b", Collection("list", (1,)))]
    right = [("x", Collection("array", ())), ("y", Collection("list", ()))]
    assert sorted(fusion_join(left, right, partitions=16)) == [("a", "x"), ("a", "y")]


def test_bool_and_int_keys_do_not_collide():
    left = [("a", Collection("list", (1,)))]
    right = [("b", Collection("list", (True,)))]
    assert fusion_join(left, right) == nested_loop_join(left, right) == []


@pytest.mark.parametrize("case", range(120))
def test_fusion_matches_oracle_randomized(case):
    left, right, mode, p = random_join_case(random.Random(case))
    got = Counter(fusion_join(left, right, mode, p))
    assert got == Counter(nested_loop_join(left, right, mode))
    expected = Counter(
        (lo, ro) for lo, lc in left for ro, rc in right if independent_equal(lc, rc, mode)
    )
    assert got == expected


@pytest.mark.parametrize("case", range(20))
def test_partition_count_does_not_change_output(case):
    left, right, mode, _ = random_join_case(random.Random(1000 + case))
    outs = [Counter(fusion_join(left, right, mode, p)) for p in (1, 2, 4, 16, 33)]
    assert all(o == outs[0] for o in outs)


@pytest.mark.parametrize("case", range(10))
def test_threaded_partitions_match_serial(case):
    left, right, mode, _ = random_join_case(random.Random(2000 + case))
    serial = Counter(fusion_join(left, right, mode, 8))
    assert Counter(fusion_join(left, right, mode, 8, threads=4)) == serial


@given(
    st.lists(st.lists(st.integers(0, 4), max_size=6), max_size=40),
    st.sampled_from([SEQ, BAG]),
    st.sampled_from([1, 4, 16]),
)
def test_build_probe_consistency(keysets, mode, p):
    items = [(i, canonical_key(Collection("list", tuple(k)), mode)) for i, k in enumerate(keysets)]
    index = build_index(items, p, mode)
    for oid, key in items:
        assert oid in probe(index, key)
    terminals = [oid for root in index.partitions for _, node in root.walk() for oid in node.terminals]
    assert sorted(terminals) == [oid for oid, _ in items]
    depth_of = {oid: d for root in index.partitions for d, node in root.walk() for oid in node.terminals}
    assert all(depth_of[oid] == len(key) for oid, key in items)


@given(st.lists(st.integers(0, 5), min_size=1, max_size=6), st.integers(0, 5))
def test_prefix_never_matches(key, extra):
    short = Collection("list", tuple(key))
    long = Collection("list", tuple(key) + (extra,))
    assert fusion_join([("s", short)], [("l", long)]) == []
    assert fusion_join([("l", long)], [("s", short)]) == []


@given(st.sets(st.integers(-3, 3), max_size=6), st.randoms(use_true_random=False))
def test_set_permutation_invariance(elems, rng):
    elems = list(elems)
    other = elems[:]
    rng.shuffle(other)
    left = [("a", Collection("set", tuple(elems)))]
    right = [("b", Collection("set", tuple(other)))]
    assert fusion_join(left, right) == [("a", "b")]


def _distinct_inputs(n, offset):
    return [(i, Collection("list", (offset, i, i + 1, i * 7))) for i in range(n)]


def test_operation_counts_scale():
    counts = {}
    for n in (500, 1000, 2000):
        c = OpCounter()
        fusion_join(_distinct_inputs(n, 0), _distinct_inputs(n, 0), counter=c)
        n_c = OpCounter()
        nested_loop_join(_distinct_inputs(n, 0), _distinct_inputs(n, 0), counter=n_c)
        counts[n] = (c.element_hashes, n_c.comparisons)
    assert counts[1000][0] == 2 * counts[500][0]
    assert counts[2000][1] == 16 * counts[500][1]
