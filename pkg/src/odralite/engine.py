"""Stack-based evaluation of SBQL queries and the equi-join rewrite.

The interpreter keeps the two classic stacks: ENVS, a stack of binder frames
used for name resolution, and QRES, which receives the result bag of every
evaluated sub-query. Non-algebraic operators (``where``, ``.``, ``join``)
evaluate their right operand once per left element, inside a frame holding
that element's ``nested`` binders.
"""
from __future__ import annotations

import operator
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

from . import fusion
from .fusion import BAG, SEQ, FloatJoinKey, JoinKeyError
from .query import (
    And,
    Arith,
    Compare,
    Dot,
    Join,
    LitBool,
    LitFloat,
    LitInt,
    LitStr,
    Name,
    Or,
    QueryNode,
    Tuple,
    Where,
    names_in,
    unparse,
)
from .store import Collection, Complex, Reference, Store, _strict

STRATEGIES = ("naive", "fusion", "auto")


class EvalError(Exception):
    pass


class UnboundName(EvalError):
    def __init__(self, name):
        super().__init__(f"unbound name {name!r}")
        self.name = name


class NonBooleanPredicate(EvalError):
    pass


class NonSingletonInPredicate(EvalError):
    pass


class NonSingletonOperand(EvalError):
    pass


class TypeMismatch(EvalError):
    pass


class DivisionByZero(EvalError):
    pass


class NoFusionPlan(EvalError):
    def __init__(self, reason):
        super().__init__(f"no fusion plan: {reason}")
        self.reason = reason


class StackDisciplineError(AssertionError):
    """An operator left ENVS or QRES at the wrong depth (an interpreter bug)."""


# --- runtime results --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AtomR:
    value: object

    def __eq__(self, other):
        if not isinstance(other, AtomR):
            return NotImplemented
        if isinstance(self.value, Collection) or isinstance(other.value, Collection):
            return self.value == other.value
        return _strict(self.value) == _strict(other.value)

    def __hash__(self):
        if isinstance(self.value, Collection):
            return hash(self.value)
        return hash(_strict(self.value))


@dataclass(frozen=True)
class RefR:
    oid: int


@dataclass(frozen=True)
class TupleR:
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 2:
            raise ValueError("a tuple result needs at least two components")


@dataclass(frozen=True)
class Binder:
    name: str
    value: object


class EnvFrame:
    __slots__ = ("binders", "_index")

    def __init__(self, binders):
        self.binders = list(binders)
        self._index: dict[str, list] = {}
        for b in self.binders:
            self._index.setdefault(b.name, []).append(b)

    def lookup(self, name: str) -> list:
        return self._index.get(name, [])

    def __len__(self):
        return len(self.binders)


def nested(result, store: Store) -> list:
    """Binders opened by ``result`` when it becomes the current element."""
    if isinstance(result, RefR):
        obj = store.get_object(result.oid)
        if not isinstance(obj.payload, Complex):
            return []
        binders = []
        for child in store.children(obj.oid):
            p = child.payload
            if isinstance(p, Reference):
                binders.append(Binder(child.name, RefR(p.target)))
            elif isinstance(p, Complex):
                binders.append(Binder(child.name, RefR(child.oid)))
            elif isinstance(p, Collection):
                binders.append(Binder(child.name, AtomR(p)))
            else:
                binders.append(Binder(child.name, AtomR(p.value)))
        return binders
    if isinstance(result, TupleR):
        out = []
        for item in result.items:
            out.extend(nested(item, store))
        return out
    return []


def _flatten(result) -> tuple:
    return result.items if isinstance(result, TupleR) else (result,)


def collection_key(coll: Collection, mode: str) -> tuple:
    try:
        return fusion.canonical_key(coll, mode)
    except FloatJoinKey:
        # floats compare numerically, ranked alongside ints
        keys = tuple((fusion.INT_RANK, e) for e in coll.elements)
        return tuple(sorted(keys)) if coll.kind == "set" or mode == BAG else keys


_ORDER_OPS = {"<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


class Interpreter:
    """One ENVS/QRES pair evaluating queries against a store."""

    def __init__(self, store: Store, mode: str = SEQ):
        if mode not in fusion.MODES:
            raise ValueError(f"mode must be one of {fusion.MODES}")
        self.store = store
        self.mode = mode
        base = [Binder(name, RefR(oid)) for name in store.class_names() for oid in store.roots(name)]
        self.envs: list[EnvFrame] = [EnvFrame(base)]
        self.qres: list[list] = []
        self.boundary_checks = 0

    # -- driver --

    def run(self, node: QueryNode) -> list:
        envs_depth, qres_depth = len(self.envs), len(self.qres)
        try:
            self.eval(node)
            return self.qres.pop()
        finally:
            del self.envs[envs_depth:]
            del self.qres[qres_depth:]

    def eval(self, node: QueryNode) -> None:
        """Evaluate ``node`` and push its result bag onto QRES."""
        envs_depth, qres_depth = len(self.envs), len(self.qres)
        handler = self._handlers.get(type(node))
        if handler is None:
            raise TypeError(f"not a query node: {node!r}")
        self.qres.append(handler(self, node))
        self.boundary_checks += 1
        if len(self.envs) != envs_depth or len(self.qres) != qres_depth + 1:
            raise StackDisciplineError(
                f"{type(node).__name__}: ENVS {envs_depth}->{len(self.envs)}, "
                f"QRES {qres_depth}->{len(self.qres)}"
            )

    def _sub(self, node) -> list:
        self.eval(node)
        return self.qres.pop()

    @contextmanager
    def scope(self, result):
        self.envs.append(EnvFrame(nested(result, self.store)))
        try:
            yield
        finally:
            self.envs.pop()

    # -- helpers --

    def deref(self, result):
        """Scalar or collection value behind a result; complex objects stay RefR."""
        seen = 0
        while isinstance(result, RefR):
            payload = self.store.get_object(result.oid).payload
            if isinstance(payload, Reference):
                result = RefR(payload.target)
                seen += 1
                if seen > len(self.store):
                    raise TypeMismatch("reference cycle")
                continue
            if isinstance(payload, Complex):
                return result
            if isinstance(payload, Collection):
                return payload
            return payload.value
        if isinstance(result, AtomR):
            return result.value
        raise TypeMismatch(f"expected a single value, got {result!r}")

    def _single_value(self, node, what="operand"):
        bag = self._sub(node)
        if len(bag) != 1:
            raise NonSingletonOperand(f"{what} {unparse(node)} yields {len(bag)} results")
        return self.deref(bag[0])

    def _truth(self, node, error=NonBooleanPredicate):
        bag = self._sub(node)
        if len(bag) != 1:
            raise NonSingletonInPredicate(f"predicate {unparse(node)} yields {len(bag)} results")
        value = self.deref(bag[0])
        if not isinstance(value, bool):
            raise error(f"predicate {unparse(node)} is not boolean: {value!r}")
        return value

    def compare(self, op: str, a, b) -> bool:
        if isinstance(a, RefR) or isinstance(b, RefR):
            if isinstance(a, RefR) and isinstance(b, RefR) and op in ("==", "!="):
                return (a.oid == b.oid) == (op == "==")
            raise TypeMismatch(f"cannot compare {a!r} {op} {b!r}")
        if isinstance(a, Collection) or isinstance(b, Collection):
            if not (isinstance(a, Collection) and isinstance(b, Collection)) or op not in ("==", "!="):
                raise TypeMismatch("collections only support == and != against collections")
            equal = collection_key(a, self.mode) == collection_key(b, self.mode)
            return equal == (op == "==")
        both_numbers = _is_number(a) and _is_number(b)
        both_strings = isinstance(a, str) and isinstance(b, str)
        both_bools = isinstance(a, bool) and isinstance(b, bool)
        if not (both_numbers or both_strings or both_bools):
            raise TypeMismatch(f"cannot compare {type(a).__name__} {op} {type(b).__name__}")
        if both_bools and op not in ("==", "!="):
            raise TypeMismatch("booleans only support == and !=")
        if op == "==":
            return a == b
        if op == "!=":
            return a != b
        return _ORDER_OPS[op](a, b)

    # -- node handlers --

    def _name(self, node: Name):
        for frame in reversed(self.envs):
            found = frame.lookup(node.ident)
            if found:
                return [b.value for b in found]
        raise UnboundName(node.ident)

    def _literal(self, node):
        return [AtomR(node.value)]

    def _compare(self, node: Compare):
        a = self._single_value(node.lhs)
        b = self._single_value(node.rhs)
        return [AtomR(self.compare(node.op, a, b))]

    def _arith(self, node: Arith):
        a = self._single_value(node.lhs)
        b = self._single_value(node.rhs)
        if node.op == "+" and isinstance(a, str) and isinstance(b, str):
            return [AtomR(a + b)]
        if not (_is_number(a) and _is_number(b)):
            raise TypeMismatch(f"cannot apply {node.op} to {type(a).__name__} and {type(b).__name__}")
        if node.op == "+":
            return [AtomR(a + b)]
        if node.op == "-":
            return [AtomR(a - b)]
        if node.op == "*":
            return [AtomR(a * b)]
        if b == 0:
            raise DivisionByZero(f"division by zero in {unparse(node)}")
        return [AtomR(a / b)]

    def _and(self, node: And):
        return [AtomR(self._truth(node.lhs, TypeMismatch) and self._truth(node.rhs, TypeMismatch))]

    def _or(self, node: Or):
        return [AtomR(self._truth(node.lhs, TypeMismatch) or self._truth(node.rhs, TypeMismatch))]

    def where_over(self, bag: list, pred: QueryNode) -> list:
        out = []
        for x in bag:
            with self.scope(x):
                if self._truth(pred):
                    out.append(x)
        return out

    def dot_over(self, bag: list, expr: QueryNode) -> list:
        out = []
        for x in bag:
            with self.scope(x):
                out.extend(self._sub(expr))
        return out

    def _where(self, node: Where):
        return self.where_over(self._sub(node.src), node.pred)

    def _dot(self, node: Dot):
        return self.dot_over(self._sub(node.src), node.expr)

    def _join(self, node: Join):
        out = []
        for x in self._sub(node.src):
            with self.scope(x):
                for y in self._sub(node.expr):
                    if node.on is not None:
                        with self.scope(y):
                            if not self._truth(node.on):
                                continue
                    out.append(TupleR(_flatten(x) + _flatten(y)))
        return out

    def _tuple(self, node: Tuple):
        parts = []
        for item in node.items:
            bag = self._sub(item)
            if len(bag) != 1:
                raise NonSingletonOperand(f"tuple item {unparse(item)} yields {len(bag)} results")
            parts.append(bag[0])
        return [TupleR(parts)]

    _handlers = {
        Name: _name,
        LitInt: _literal,
        LitFloat: _literal,
        LitStr: _literal,
        LitBool: _literal,
        Compare: _compare,
        Arith: _arith,
        And: _and,
        Or: _or,
        Where: _where,
        Dot: _dot,
        Join: _join,
        Tuple: _tuple,
    }


def evaluate(node: QueryNode, store: Store, mode: str = SEQ) -> list:
    return Interpreter(store, mode).run(node)


# --- equi-join detection ----------------------------------------------------


@dataclass(frozen=True)
class EquiJoinPlan:
    left_class: str
    left_filter: Optional[QueryNode]
    left_path: tuple
    right_class: str
    right_filter: Optional[QueryNode]
    right_path: tuple
    mode: str = SEQ
    partitions: int = 1


def _split_pipeline(node):
    """Peel ``where``/``.`` wrappers off the join at the bottom of the left spine."""
    wrappers = []
    while isinstance(node, (Dot, Where)):
        wrappers.append(node)
        node = node.src
    wrappers.reverse()
    return node, wrappers


def _side(node):
    if isinstance(node, Name):
        return node.ident, None
    if isinstance(node, Where) and isinstance(node.src, Name):
        return node.src.ident, node.pred
    return None


def _path(node):
    if isinstance(node, Name):
        return (node.ident,)
    if isinstance(node, Dot) and isinstance(node.expr, Name):
        head = _path(node.src)
        return None if head is None else head + (node.expr.ident,)
    return None


def _path_node(path) -> QueryNode:
    node = Name(path[0])
    for ident in path[1:]:
        node = Dot(node, Name(ident))
    return node


def diagnose(node: QueryNode, store: Store, mode: str = SEQ, partitions: int = 1):
    """Return ``(plan, reason)``; ``plan`` is None when the rewrite does not apply."""
    join, _ = _split_pipeline(node)
    if not isinstance(join, Join):
        return None, "no join at the base of the query"
    if join.on is None:
        return None, "join has no 'on' clause (navigational join)"
    if not (isinstance(join.on, Compare) and join.on.op == "=="):
        return None, "'on' predicate is not a single equality"
    left, right = _side(join.src), _side(join.expr)
    if left is None or right is None:
        return None, "join operands are not 'Class' or '(Class where filter)'"
    (lclass, lfilter), (rclass, rfilter) = left, right
    classes = set(store.class_names())
    for cls in (lclass, rclass):
        if cls not in classes:
            return None, f"{cls!r} is not a root class in the store"
    lattrs, rattrs = store.attribute_names(lclass), store.attribute_names(rclass)
    if rclass in lattrs:
        return None, f"{rclass!r} is also an attribute of {lclass!r} (dependent join)"
    if lfilter is not None and rclass in names_in(lfilter):
        return None, f"left filter references {rclass!r}"
    if rfilter is not None:
        leaks = names_in(rfilter) & ((lattrs - rattrs) | {lclass})
        if leaks:
            return None, f"right filter references left-side names {sorted(leaks)}"
    paths = [_path(join.on.lhs), _path(join.on.rhs)]
    if None in paths:
        return None, "equality operands are not attribute paths"
    # inside 'on', the right element's frame sits above the left element's
    roots = ["right" if p[0] in rattrs else "left" if p[0] in lattrs else None for p in paths]
    if None in roots:
        missing = [p[0] for p, r in zip(paths, roots) if r is None]
        return None, f"path root {missing[0]!r} is not an attribute of either class"
    if roots[0] == roots[1]:
        return None, f"ambiguous path rooting: both operands resolve to the {roots[0]} element"
    lpath, rpath = paths if roots[0] == "left" else paths[::-1]
    plan = EquiJoinPlan(lclass, lfilter, lpath, rclass, rfilter, rpath, mode, partitions)
    return plan, "independent equi-join on collection attributes"


def detect_equi_join(node: QueryNode, store: Store, mode: str = SEQ, partitions: int = 1):
    return diagnose(node, store, mode, partitions)[0]


# --- execution --------------------------------------------------------------


def _join_keys(interp: Interpreter, bag: list, path) -> list:
    path_node = _path_node(path)
    items = []
    for i, x in enumerate(bag):
        with interp.scope(x):
            values = interp._sub(path_node)
        if len(values) != 1:
            raise NonSingletonOperand(f"join path {unparse(path_node)} yields {len(values)} results")
        value = interp.deref(values[0])
        if not isinstance(value, Collection):
            raise fusion.NonScalarElement(
                f"join path {unparse(path_node)} is not collection-valued", getattr(x, "oid", None)
            )
        items.append((i, value))
    return items


def _run_fusion(node: QueryNode, plan: EquiJoinPlan, store: Store, threads: int = 1) -> list:
    interp = Interpreter(store, plan.mode)
    left_src = Name(plan.left_class) if plan.left_filter is None else Where(Name(plan.left_class), plan.left_filter)
    right_src = Name(plan.right_class) if plan.right_filter is None else Where(Name(plan.right_class), plan.right_filter)
    xs = interp.run(left_src)
    ys = interp.run(right_src) if xs else []
    pairs = fusion.fusion_join(
        _join_keys(interp, xs, plan.left_path),
        _join_keys(interp, ys, plan.right_path),
        plan.mode,
        plan.partitions,
        threads,
    )
    pairs.sort()  # left-major, right-minor: the interpreter's own order
    bag = [TupleR(_flatten(xs[i]) + _flatten(ys[j])) for i, j in pairs]
    _, wrappers = _split_pipeline(node)
    for w in wrappers:
        bag = interp.where_over(bag, w.pred) if isinstance(w, Where) else interp.dot_over(bag, w.expr)
    return bag


def execute(
    node: QueryNode,
    store: Store,
    strategy: str = "auto",
    mode: str = SEQ,
    partitions: int = 1,
    threads: int = 1,
) -> list:
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if strategy == "naive":
        return evaluate(node, store, mode)
    plan, reason = diagnose(node, store, mode, partitions)
    if plan is None:
        if strategy == "fusion":
            raise NoFusionPlan(reason)
        return evaluate(node, store, mode)
    if strategy == "fusion":
        return _run_fusion(node, plan, store, threads)
    try:
        return _run_fusion(node, plan, store, threads)
    except JoinKeyError:
        # non-collection or float keys: the interpreter still compares these
        return evaluate(node, store, mode)


def explain(node: QueryNode, store: Store, mode: str = SEQ, partitions: int = 1) -> str:
    plan, reason = diagnose(node, store, mode, partitions)
    lines = [f"query: {unparse(node)}", f"fusion: {'yes' if plan else 'no'}", f"reason: {reason}"]
    if plan is not None:
        lines += [
            f"left_class: {plan.left_class}",
            f"left_filter: {'-' if plan.left_filter is None else unparse(plan.left_filter)}",
            f"left_path: {'.'.join(plan.left_path)}",
            f"right_class: {plan.right_class}",
            f"right_filter: {'-' if plan.right_filter is None else unparse(plan.right_filter)}",
            f"right_path: {'.'.join(plan.right_path)}",
            f"mode: {plan.mode}",
            f"partitions: {plan.partitions}",
        ]
    return "\n".join(lines) + "\n"
