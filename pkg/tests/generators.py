"""Seeded random generators shared by property and acceptance tests."""
from __future__ import annotations

import random
import struct

from odralite import query as q
from odralite.store import (
    INT64_MAX,
    INT64_MIN,
    AtomBool,
    AtomFloat,
    AtomInt,
    AtomStr,
    Collection,
    Complex,
    Reference,
    Store,
)

NAMES = ["Student", "course", "fName", "name", "x", "_t", "a.b", "n-1", "ns:tag", "@attr", "Ü", "k"]
TEXT_CHARS = 'ab Z09"\\\n\t\r<>&\'é€  '


def rand_text(rng: random.Random, max_len=8) -> str:
    return "".join(rng.choice(TEXT_CHARS) for _ in range(rng.randint(0, max_len)))


def rand_int(rng):
    return rng.choice([0, 1, -1, INT64_MIN, INT64_MAX, rng.randint(INT64_MIN, INT64_MAX), rng.randint(-50, 50)])


def rand_float(rng):
    if rng.random() < 0.3:
        return rng.choice([0.0, -0.0, float("inf"), float("-inf"), float("nan"), 1e-310])
    return struct.unpack(">d", rng.getrandbits(64).to_bytes(8, "big"))[0]


def rand_elements(rng, kind, length):
    elem_type = rng.choice(["int", "float", "str", "bool"])
    make = {
        "int": lambda: rng.randint(-5, 5),
        "float": lambda: rng.choice([0.5, 1.5, -2.25, 3.0, float("inf")]),
        "str": lambda: rng.choice(["", "a", "b c", 'q"', "\\", "é"]),
        "bool": lambda: rng.random() < 0.5,
    }[elem_type]
    if kind != "set":
        return tuple(make() for _ in range(length))
    out = []
    for _ in range(length * 3):
        v = make()
        if v not in out and len(out) < length:
            out.append(v)
    return tuple(out)


def random_store(rng: random.Random, size: int) -> Store:
    store = Store()
    complex_oids = []
    all_oids = []
    for _ in range(size):
        parent = rng.choice(complex_oids) if complex_oids and rng.random() < 0.7 else None
        roll = rng.random()
        if roll < 0.3:
            payload = Complex()
        elif roll < 0.4:
            payload = AtomInt(rand_int(rng))
        elif roll < 0.5:
            payload = AtomFloat(rand_float(rng))
        elif roll < 0.62:
            payload = AtomStr(rand_text(rng))
        elif roll < 0.68:
            payload = AtomBool(rng.random() < 0.5)
        elif roll < 0.78 and all_oids:
            payload = Reference(rng.choice(all_oids))
        else:
            kind = rng.choice(["set", "list", "array"])
            payload = Collection(kind, rand_elements(rng, kind, rng.randint(0, 5)))
        oid = store.insert_object(parent, rng.choice(NAMES), payload)
        all_oids.append(oid)
        if isinstance(payload, Complex):
            complex_oids.append(oid)
    return store


# --- XML ---------------------------------------------------------------------

TAGS = ["Student", "fName", "address", "city", "a", "b-c", "d.e", "ns:f", "_g", "é"]
XML_VALUE_CHARS = "ab 1<>&\"'\t\né"


def _xml_escape(text, attr=False):
    text = text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    return text.replace('"', "&quot;") if attr else text.replace("'", "&apos;")


def random_xml(rng: random.Random, depth=0):
    """Return ``(document, expected)`` where ``expected`` is the object mapping."""
    tag = rng.choice(TAGS)
    attrs = []
    for name in rng.sample(["id", "x", "y-z", "k.l", "m:n"], rng.randint(0, 3)):
        value = "".join(rng.choice(XML_VALUE_CHARS) for _ in range(rng.randint(0, 6)))
        attrs.append((name, value))
    children = []
    if depth < 4:
        children = [random_xml(rng, depth + 1) for _ in range(rng.randint(0, 3))]
    texts = ["".join(rng.choice(XML_VALUE_CHARS) for _ in range(rng.randint(0, 5))) for _ in range(len(children) + 1)]
    comment = "<!-- note -->" if rng.random() < 0.1 else ""

    head = f"<{tag}" + "".join(f' {n}="{_xml_escape(v, attr=True)}"' for n, v in attrs)
    if not children and not any(texts) and rng.random() < 0.5:
        doc = head + (" " if rng.random() < 0.5 else "") + "/>"
        texts = [""]
    else:
        body = _xml_escape(texts[0]) + comment
        for (child_doc, _), text in zip(children, texts[1:]):
            body += child_doc + _xml_escape(text)
        doc = f"{head}>{body}</{tag}>"
    joined = "".join(texts).strip(" \t\r\n")
    expected = (
        tag,
        [("@" + n, v) for n, v in attrs] + ([("_text", joined)] if joined else []),
        [exp for _, exp in children],
    )
    return doc, expected


def subtree_shape(store: Store, oid):
    """Oid-free description of a subtree: ``(name, payload-or-None, children)``."""
    obj = store.get_object(oid)
    if isinstance(obj.payload, Complex):
        return (obj.name, None, [subtree_shape(store, c) for c in obj.payload.children])
    return (obj.name, obj.payload, [])


def expected_shape(expected):
    tag, leaves, children = expected
    kids = [(name, AtomStr(value), []) for name, value in leaves]
    return (tag, None, kids + [expected_shape(c) for c in children])


# --- query ASTs ----------------------------------------------------------------

IDENTS = ["Student", "course", "fName", "name", "marks", "learns", "faculty", "x_1", "onions", "joiner"]


def random_ast(rng: random.Random, depth=6):
    if depth <= 1 or rng.random() < 0.25:
        roll = rng.randrange(5)
        if roll == 0:
            return q.Name(rng.choice(IDENTS))
        if roll == 1:
            return q.LitInt(rng.choice([0, 7, 200, 10 ** 20]))
        if roll == 2:
            return q.LitFloat(rng.choice([0.5, 1e-05, 3.25, 1e300, 0.0]))
        if roll == 3:
            return q.LitStr(rand_text(rng, 5).replace("\r", "").replace(" ", ""))
        return q.LitBool(rng.random() < 0.5)
    sub = lambda: random_ast(rng, depth - 1)  # noqa: E731
    kind = rng.randrange(9)
    if kind == 0:
        return q.Compare(rng.choice(q.COMPARE_OPS), sub(), sub())
    if kind == 1:
        return q.Arith(rng.choice(q.ARITH_OPS), sub(), sub())
    if kind == 2:
        return q.And(sub(), sub())
    if kind == 3:
        return q.Or(sub(), sub())
    if kind == 4:
        return q.Where(sub(), sub())
    if kind == 5:
        return q.Dot(sub(), sub())
    if kind == 6:
        return q.Join(sub(), sub(), sub() if rng.random() < 0.5 else None)
    return q.Tuple(tuple(sub() for _ in range(rng.randint(2, 3))))


# --- join inputs ---------------------------------------------------------------


def random_join_case(rng: random.Random):
    """One randomized fusion-vs-oracle case over the documented parameter ranges."""
    alphabet = rng.randint(1, 10)
    elem_type = rng.choice(["int", "int", "str", "bool"])
    if elem_type == "bool":
        values = [False, True][: min(alphabet, 2)]
    elif elem_type == "str":
        values = [chr(ord("a") + i) for i in range(alphabet)]
    else:
        values = list(range(alphabet))

    def side(prefix):
        items = []
        for i in range(rng.randint(0, 200)):
            kind = rng.choice(["set", "list", "array"])
            length = rng.randint(0, 8)
            if kind == "set":
                elems = rng.sample(values, min(length, len(values)))
            else:
                elems = [rng.choice(values) for _ in range(length)]
            items.append((f"{prefix}{i}", Collection(kind, tuple(elems))))
        return items

    return side("l"), side("r"), rng.choice(["seq", "bag"]), rng.choice([1, 4, 16])


def independent_equal(a: Collection, b: Collection, mode: str) -> bool:
    """Key equality written without the library's canonicalization."""
    def norm(c):
        typed = [(type(e).__name__, e) for e in c.elements]
        if c.kind == "set" or mode == "bag":
            order = {"bool": 0, "int": 1, "str": 2}
            typed.sort(key=lambda t: (order[t[0]], t[1]))
        return typed

    return norm(a) == norm(b)
