"""In-memory object store with textual snapshot persistence.

Objects follow the stack-based-architecture model: every object is a triple
``(oid, name, payload)``; complex objects own an ordered list of children,
root objects are grouped by name into classes.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import IO, Iterator, Optional, Union

Oid = int

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
SNAPSHOT_HEADER = "ODRALITE 1"
COLLECTION_KINDS = ("set", "list", "array")

# letters/underscore first; "@" prefix is reserved for imported XML attributes
NAME_RE = re.compile(r"@?[^\W\d][\w.\-:]*\Z")


class StoreError(Exception):
    pass


class UnknownOid(StoreError, KeyError):
    def __init__(self, oid):
        super().__init__(oid)
        self.oid = oid

    def __str__(self):
        return f"unknown oid {self.oid}"


class UnknownParent(StoreError):
    pass


class ParentNotComplex(StoreError):
    pass


class MalformedCollection(StoreError, ValueError):
    pass


class InvalidPayload(StoreError, ValueError):
    pass


class DanglingReference(StoreError):
    pass


class SnapshotSyntax(StoreError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _float_bits(value: float) -> bytes:
    return struct.pack(">d", value)


def _strict(value):
    """Equality key that separates bool from int and floats by bit pattern."""
    if isinstance(value, float):
        return (float, _float_bits(value))
    return (type(value), value)


@dataclass(frozen=True)
class AtomInt:
    value: int


@dataclass(frozen=True, eq=False)
class AtomFloat:
    value: float

    def __eq__(self, other):
        if not isinstance(other, AtomFloat):
            return NotImplemented
        return _float_bits(self.value) == _float_bits(other.value)

    def __hash__(self):
        return hash(_float_bits(self.value))


@dataclass(frozen=True)
class AtomStr:
    value: str


@dataclass(frozen=True)
class AtomBool:
    value: bool


@dataclass(frozen=True)
class Reference:
    target: Oid


@dataclass(frozen=True, eq=False)
class Collection:
    """Collection-valued attribute: a set, list or array of scalars.

    ``declared_len`` only applies to arrays and defaults to the number of
    elements given.
    """

    kind: str
    elements: tuple = ()
    declared_len: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.kind == "array" and self.declared_len is None:
            object.__setattr__(self, "declared_len", len(self.elements))

    def __eq__(self, other):
        if not isinstance(other, Collection):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.declared_len == other.declared_len
            and [_strict(e) for e in self.elements] == [_strict(e) for e in other.elements]
        )

    def __hash__(self):
        return hash((self.kind, tuple(_strict(e) for e in self.elements)))

    def __len__(self):
        return len(self.elements)


@dataclass
class Complex:
    children: list = field(default_factory=list)


ATOMS = (AtomInt, AtomFloat, AtomStr, AtomBool)
Payload = Union[AtomInt, AtomFloat, AtomStr, AtomBool, Reference, Collection, Complex]


@dataclass
class StoredObject:
    oid: Oid
    name: str
    payload: Payload
    parent: Optional[Oid] = None

    @property
    def is_root(self) -> bool:
        return self.parent is None


def _check_int(value, what="integer"):
    if type(value) is not int or not INT64_MIN <= value <= INT64_MAX:
        raise InvalidPayload(f"{what} must be a 64-bit signed int, got {value!r}")


def check_collection(coll: Collection) -> None:
    if coll.kind not in COLLECTION_KINDS:
        raise MalformedCollection(f"unknown collection kind {coll.kind!r}")
    types = {type(e) for e in coll.elements}
    bad = types - {int, float, str, bool}
    if bad:
        raise MalformedCollection(f"non-scalar collection element of type {bad.pop().__name__}")
    if len(types) > 1:
        raise MalformedCollection("heterogeneous collection elements")
    for e in coll.elements:
        if type(e) is int and not INT64_MIN <= e <= INT64_MAX:
            raise MalformedCollection(f"collection element {e} exceeds 64 bits")
    if coll.kind == "set":
        seen = set()
        for e in coll.elements:
            k = _strict(e)
            if k in seen or (isinstance(e, float) and e == 0.0 and (float, _float_bits(-e)) in seen):
                raise MalformedCollection(f"duplicate set element {e!r}")
            seen.add(k)
    if coll.kind == "array":
        if coll.declared_len != len(coll.elements):
            raise MalformedCollection(
                f"array declares {coll.declared_len} elements but holds {len(coll.elements)}"
            )
    elif coll.declared_len is not None:
        raise MalformedCollection("declared length only applies to arrays")


def check_payload(payload) -> None:
    if isinstance(payload, AtomInt):
        _check_int(payload.value)
    elif isinstance(payload, AtomFloat):
        if type(payload.value) is not float:
            raise InvalidPayload(f"float atom holds {payload.value!r}")
    elif isinstance(payload, AtomStr):
        if not isinstance(payload.value, str):
            raise InvalidPayload(f"string atom holds {payload.value!r}")
    elif isinstance(payload, AtomBool):
        if type(payload.value) is not bool:
            raise InvalidPayload(f"bool atom holds {payload.value!r}")
    elif isinstance(payload, Reference):
        _check_int(payload.target, "reference target")
    elif isinstance(payload, Collection):
        check_collection(payload)
    elif isinstance(payload, Complex):
        if payload.children:
            raise InvalidPayload("complex payloads start empty; add children with insert_object")
    else:
        raise InvalidPayload(f"not a payload: {payload!r}")


def check_name(name) -> None:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise InvalidPayload(f"invalid object name {name!r}")


class Store:
    """Single-writer object store. Reads may run concurrently between writes."""

    def __init__(self):
        self._objects: dict[Oid, StoredObject] = {}
        self._roots: dict[str, list[Oid]] = {}
        self._next_oid = 1

    def __len__(self):
        return len(self._objects)

    def __contains__(self, oid):
        return oid in self._objects

    def insert_object(self, parent: Optional[Oid], name: str, payload: Payload) -> Oid:
        check_name(name)
        check_payload(payload)
        container = None
        if parent is not None:
            try:
                container = self._objects[parent]
            except KeyError:
                raise UnknownParent(f"parent {parent} does not exist") from None
            if not isinstance(container.payload, Complex):
                raise ParentNotComplex(f"parent {parent} ({container.name}) is not complex")
        oid = self._next_oid
        self._next_oid += 1
        self._attach(StoredObject(oid, name, payload, parent), container)
        return oid

    def _attach(self, obj: StoredObject, container: Optional[StoredObject]):
        self._objects[obj.oid] = obj
        if container is None:
            self._roots.setdefault(obj.name, []).append(obj.oid)
        else:
            container.payload.children.append(obj.oid)

    def get_object(self, oid: Oid) -> StoredObject:
        try:
            return self._objects[oid]
        except KeyError:
            raise UnknownOid(oid) from None

    def roots(self, name: str) -> list[Oid]:
        return list(self._roots.get(name, ()))

    def class_names(self) -> list[str]:
        return list(self._roots)

    def resolve_child(self, oid: Oid, name: str) -> list[Oid]:
        payload = self.get_object(oid).payload
        if not isinstance(payload, Complex):
            return []
        return [c for c in payload.children if self._objects[c].name == name]

    def children(self, oid: Oid) -> list[StoredObject]:
        payload = self.get_object(oid).payload
        if not isinstance(payload, Complex):
            return []
        return [self._objects[c] for c in payload.children]

    def objects(self) -> Iterator[StoredObject]:
        """All objects in oid order."""
        for oid in sorted(self._objects):
            yield self._objects[oid]

    @property
    def next_oid(self) -> Oid:
        return self._next_oid

    def attribute_names(self, class_name: str) -> set[str]:
        """Union of child names over the roots of one class."""
        names = set()
        for oid in self._roots.get(class_name, ()):
            names.update(c.name for c in self.children(oid))
        return names


# --- snapshot format -------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}
_TOKEN_RE = re.compile(r'(?:s:)?"(?:[^"\\]|\\.)*"|[^ ]+')


def escape_string(text: str) -> str:
    return '"' + "".join(_ESCAPES.get(ch, ch) for ch in text) + '"'


def unescape_string(token: str) -> str:
    if len(token) < 2 or token[0] != '"' or token[-1] != '"':
        raise ValueError(f"expected quoted string, got {token!r}")
    out = []
    body = iter(token[1:-1])
    for ch in body:
        if ch == "\\":
            nxt = next(body, None)
            if nxt not in _UNESCAPES:
                raise ValueError(f"bad escape \\{nxt}")
            out.append(_UNESCAPES[nxt])
        elif ch == '"':
            raise ValueError("unescaped quote inside string")
        else:
            out.append(ch)
    return "".join(out)


def _format_element(value) -> str:
    if isinstance(value, bool):
        return "b:true" if value else "b:false"
    if isinstance(value, int):
        return f"i:{value}"
    if isinstance(value, float):
        return "f:" + _float_bits(value).hex()
    return "s:" + escape_string(value)


def _parse_element(token: str):
    tag, _, body = token.partition(":")
    if tag == "i":
        return _parse_int(body)
    if tag == "f":
        return _parse_float_bits(body)
    if tag == "s":
        return unescape_string(body)
    if tag == "b" and body in ("true", "false"):
        return body == "true"
    raise ValueError(f"bad collection element {token!r}")


def _parse_int(text: str) -> int:
    if not re.fullmatch(r"-?\d+", text):
        raise ValueError(f"bad integer {text!r}")
    value = int(text)
    _check_int(value)
    return value


def _parse_float_bits(text: str) -> float:
    if not re.fullmatch(r"[0-9a-f]{16}", text):
        raise ValueError(f"bad float bits {text!r}")
    return struct.unpack(">d", bytes.fromhex(text))[0]


def format_payload(payload: Payload) -> str:
    if isinstance(payload, AtomInt):
        return f"INT {payload.value}"
    if isinstance(payload, AtomFloat):
        return "FLT " + _float_bits(payload.value).hex()
    if isinstance(payload, AtomStr):
        return "STR " + escape_string(payload.value)
    if isinstance(payload, AtomBool):
        return "BOOL " + ("true" if payload.value else "false")
    if isinstance(payload, Reference):
        return f"REF {payload.target}"
    if isinstance(payload, Complex):
        return "CPLX"
    parts = [payload.kind.upper(), str(len(payload.elements))]
    parts.extend(_format_element(e) for e in payload.elements)
    return " ".join(parts)


def _parse_payload(kind: str, args: list[str]) -> Payload:
    def arity(n):
        if len(args) != n:
            raise ValueError(f"{kind} takes {n} argument(s), got {len(args)}")

    if kind == "INT":
        arity(1)
        return AtomInt(_parse_int(args[0]))
    if kind == "FLT":
        arity(1)
        return AtomFloat(_parse_float_bits(args[0]))
    if kind == "STR":
        arity(1)
        return AtomStr(unescape_string(args[0]))
    if kind == "BOOL":
        arity(1)
        if args[0] not in ("true", "false"):
            raise ValueError(f"bad bool {args[0]!r}")
        return AtomBool(args[0] == "true")
    if kind == "REF":
        arity(1)
        return Reference(_parse_int(args[0]))
    if kind == "CPLX":
        arity(0)
        return Complex()
    if kind in ("SET", "LIST", "ARRAY"):
        if not args:
            raise ValueError(f"{kind} needs an element count")
        count = _parse_int(args[0])
        elements = [_parse_element(t) for t in args[1:]]
        if count != len(elements):
            raise ValueError(f"{kind} declares {count} elements, found {len(elements)}")
        coll = Collection(kind.lower(), tuple(elements))
        check_collection(coll)
        return coll
    raise ValueError(f"unknown kind tag {kind!r}")


def save_snapshot(store: Store, sink: IO[str]) -> None:
    """Write ``store`` to a text sink. Open files with ``newline=""``."""
    for obj in store.objects():
        if isinstance(obj.payload, Reference) and obj.payload.target not in store:
            raise DanglingReference(
                f"object {obj.oid} ({obj.name}) references missing oid {obj.payload.target}"
            )
    sink.write(SNAPSHOT_HEADER + "\n")
    for obj in store.objects():
        parent = "-" if obj.parent is None else str(obj.parent)
        sink.write(f"OBJ {obj.oid} {parent} {obj.name} {format_payload(obj.payload)}\n")


def dumps(store: Store) -> str:
    import io

    buf = io.StringIO(newline="")
    save_snapshot(store, buf)
    return buf.getvalue()


def loads(text: str) -> Store:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != SNAPSHOT_HEADER:
        raise SnapshotSyntax(1, f"expected header {SNAPSHOT_HEADER!r}")

    records = []
    seen: set[Oid] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = _TOKEN_RE.findall(line)
        if " ".join(tokens) != line:
            raise SnapshotSyntax(lineno, "malformed spacing or unterminated string")
        if len(tokens) < 5 or tokens[0] != "OBJ":
            raise SnapshotSyntax(lineno, "expected 'OBJ <oid> <parent|-> <name> <KIND> ...'")
        try:
            oid = _parse_int(tokens[1])
            parent = None if tokens[2] == "-" else _parse_int(tokens[2])
            name = tokens[3]
            check_name(name)
            payload = _parse_payload(tokens[4], tokens[5:])
        except (ValueError, StoreError) as exc:
            raise SnapshotSyntax(lineno, str(exc)) from None
        if oid < 1:
            raise SnapshotSyntax(lineno, f"oid must be positive, got {oid}")
        if oid in seen:
            raise SnapshotSyntax(lineno, f"duplicate oid {oid}")
        seen.add(oid)
        records.append((lineno, StoredObject(oid, name, payload, parent)))

    store = Store()
    by_oid = {obj.oid: obj for _, obj in records}
    for lineno, obj in records:
        container = None
        if obj.parent is not None:
            container = by_oid.get(obj.parent)
            if container is None:
                raise SnapshotSyntax(lineno, f"parent {obj.parent} not in snapshot")
            if not isinstance(container.payload, Complex):
                raise SnapshotSyntax(lineno, f"parent {obj.parent} is not CPLX")
        if isinstance(obj.payload, Reference) and obj.payload.target not in by_oid:
            raise SnapshotSyntax(lineno, f"reference to missing oid {obj.payload.target}")
        store._attach(obj, container)
    _check_acyclic(store, records)
    store._next_oid = max(seen, default=0) + 1
    return store


def _check_acyclic(store: Store, records) -> None:
    for lineno, obj in records:
        hops = 0
        cur = obj
        while cur.parent is not None:
            cur = store._objects[cur.parent]
            hops += 1
            if hops > len(records):
                raise SnapshotSyntax(lineno, f"parent cycle through oid {obj.oid}")


def load_snapshot(source: IO[str]) -> Store:
    return loads(source.read())
