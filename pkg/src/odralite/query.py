"""Tokenizer, recursive-descent parser and unparser for the SBQL subset.

Grammar, loosest binding first::

    query    := pipeline ("," pipeline)*
    pipeline := disj (("where" disj) | ("join" disj ("on" disj)?) | ("." disj))*
    disj     := conj ("or" conj)*
    conj     := rel ("and" rel)*
    rel      := sum (("=="|"="|"!="|"<"|"<="|">"|">=") sum)?
    sum      := term (("+"|"-") term)*
    term     := factor (("*"|"/") factor)*
    factor   := NAME | INT | FLOAT | STRING | "true" | "false" | "(" query ")"
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

KEYWORDS = frozenset({"where", "join", "on", "and", "or", "true", "false"})
COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class LitInt:
    value: int


@dataclass(frozen=True)
class LitFloat:
    value: float


@dataclass(frozen=True)
class LitStr:
    value: str


@dataclass(frozen=True)
class LitBool:
    value: bool


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: "QueryNode"
    rhs: "QueryNode"


@dataclass(frozen=True)
class Arith:
    op: str
    lhs: "QueryNode"
    rhs: "QueryNode"


@dataclass(frozen=True)
class And:
    lhs: "QueryNode"
    rhs: "QueryNode"


@dataclass(frozen=True)
class Or:
    lhs: "QueryNode"
    rhs: "QueryNode"


@dataclass(frozen=True)
class Where:
    src: "QueryNode"
    pred: "QueryNode"


@dataclass(frozen=True)
class Dot:
    src: "QueryNode"
    expr: "QueryNode"


@dataclass(frozen=True)
class Join:
    src: "QueryNode"
    expr: "QueryNode"
    on: Optional["QueryNode"] = None


@dataclass(frozen=True)
class Tuple:
    items: tuple

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 2:
            raise ValueError("a tuple needs at least two items")


QueryNode = Union[
    Name, LitInt, LitFloat, LitStr, LitBool, Compare, Arith, And, Or, Where, Dot, Join, Tuple
]


class ParseError(Exception):
    def __init__(self, message: str, pos: int, line: int, column: int, expected=()):
        self.message = message
        self.pos = pos
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        super().__init__(str(self))

    def __str__(self):
        text = f"{self.line}:{self.column}: {self.message}"
        if self.expected:
            text += " (expected " + ", ".join(sorted(self.expected)) + ")"
        return text


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, KEYWORD, INT, FLOAT, STRING, OP, EOF
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<FLOAT>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<INT>\d+)
  | (?P<NAME>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<OP>==|!=|<=|>=|[=<>+\-*/().,])
    """,
    re.VERBOSE,
)
_STR_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}
_STR_ESCAPES_OUT = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def _position(source: str, pos: int) -> tuple[int, int]:
    line = source.count("\n", 0, pos) + 1
    column = pos - (source.rfind("\n", 0, pos) + 1) + 1
    return line, column


def _error(source, pos, message, expected=()):
    line, col = _position(source, pos)
    return ParseError(message, pos, line, col, expected)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            if source[pos] == '"':
                raise _error(source, pos, "unterminated string literal")
            raise _error(source, pos, f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            if kind == "NAME" and text in KEYWORDS:
                kind = "KEYWORD"
            tokens.append(Token(kind, text, pos))
        pos = m.end()
    tokens.append(Token("EOF", "", len(source)))
    return tokens


def _unquote(source: str, tok: Token) -> str:
    out = []
    body = tok.text[1:-1]
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            esc = body[i + 1]
            if esc not in _STR_ESCAPES:
                raise _error(source, tok.pos + i + 1, f"unknown escape \\{esc}")
            out.append(_STR_ESCAPES[esc])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


_FACTOR_START = {"NAME", "INT", "FLOAT", "STRING", "true", "false", "("}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("OP", "KEYWORD") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, expected):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise _error(self.source, t.pos, f"unexpected {found}", expected)

    def parse(self) -> QueryNode:
        node = self.query()
        if self.tok.kind != "EOF":
            self.fail({",", "where", "join", "on", ".", "or", "and", "EOF"} | set(COMPARE_OPS) | set(ARITH_OPS))
        return node

    def query(self):
        items = [self.pipeline()]
        while self.at(","):
            self.advance()
            items.append(self.pipeline())
        return items[0] if len(items) == 1 else Tuple(tuple(items))

    def pipeline(self):
        node = self.disj()
        while True:
            if self.at("where"):
                self.advance()
                node = Where(node, self.disj())
            elif self.at("join"):
                self.advance()
                right = self.disj()
                on = None
                if self.at("on"):
                    self.advance()
                    on = self.disj()
                node = Join(node, right, on)
            elif self.at("."):
                self.advance()
                node = Dot(node, self.disj())
            else:
                return node

    def disj(self):
        node = self.conj()
        while self.at("or"):
            self.advance()
            node = Or(node, self.conj())
        return node

    def conj(self):
        node = self.rel()
        while self.at("and"):
            self.advance()
            node = And(node, self.rel())
        return node

    def rel(self):
        node = self.sum()
        if self.at("==", "=", "!=", "<", "<=", ">", ">="):
            op = self.advance().text
            node = Compare("==" if op == "=" else op, node, self.sum())
        return node

    def sum(self):
        node = self.term()
        while self.at("+", "-"):
            op = self.advance().text
            node = Arith(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at("*", "/"):
            op = self.advance().text
            node = Arith(op, node, self.factor())
        return node

    def factor(self):
        t = self.tok
        if t.kind == "NAME":
            self.advance()
            return Name(t.text)
        if t.kind == "INT":
            self.advance()
            return LitInt(int(t.text))
        if t.kind == "FLOAT":
            self.advance()
            return LitFloat(float(t.text))
        if t.kind == "STRING":
            self.advance()
            return LitStr(_unquote(self.source, t))
        if self.at("true", "false"):
            self.advance()
            return LitBool(t.text == "true")
        if self.at("("):
            self.advance()
            node = self.query()
            if not self.at(")"):
                self.fail({")", ","})
            self.advance()
            return node
        self.fail(_FACTOR_START)


def parse(source: str) -> QueryNode:
    return _Parser(source).parse()


def _quote(text: str) -> str:
    return '"' + "".join(_STR_ESCAPES_OUT.get(ch, ch) for ch in text) + '"'


def unparse(node: QueryNode) -> str:
    """Fully parenthesized source text; ``parse(unparse(n)) == n``."""
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, LitBool):
        return "true" if node.value else "false"
    if isinstance(node, LitInt):
        return str(node.value)
    if isinstance(node, LitFloat):
        return repr(node.value)
    if isinstance(node, LitStr):
        return _quote(node.value)
    if isinstance(node, (Compare, Arith)):
        return f"({unparse(node.lhs)} {node.op} {unparse(node.rhs)})"
    if isinstance(node, And):
        return f"({unparse(node.lhs)} and {unparse(node.rhs)})"
    if isinstance(node, Or):
        return f"({unparse(node.lhs)} or {unparse(node.rhs)})"
    if isinstance(node, Where):
        return f"({unparse(node.src)} where {unparse(node.pred)})"
    if isinstance(node, Dot):
        return f"({unparse(node.src)} . {unparse(node.expr)})"
    if isinstance(node, Join):
        on = "" if node.on is None else f" on {unparse(node.on)}"
        return f"({unparse(node.src)} join {unparse(node.expr)}{on})"
    if isinstance(node, Tuple):
        return "(" + ", ".join(unparse(item) for item in node.items) + ")"
    raise TypeError(f"not a query node: {node!r}")


def names_in(node: QueryNode) -> set[str]:
    """Every identifier mentioned anywhere in ``node``."""
    if isinstance(node, Name):
        return {node.ident}
    out: set[str] = set()
    if isinstance(node, Tuple):
        for item in node.items:
            out |= names_in(item)
        return out
    for attr in ("lhs", "rhs", "src", "pred", "expr", "on"):
        child = getattr(node, attr, None)
        if child is not None:
            out |= names_in(child)
    return out
