"""XML import/export for a restricted XML subset.

Mapping: an element becomes a complex object named by its tag; attribute
``x`` becomes a string child ``@x``; trimmed non-empty character data becomes a
string child ``_text``. Children are stored attributes first, then text, then
sub-elements in document order, which keeps export the inverse of import.

Supported: elements, attributes, comments, an optional ``<?xml ...?>``
declaration and the five predefined entities. DTDs, processing instructions
and CDATA sections are rejected.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .store import (
    AtomBool,
    AtomFloat,
    AtomInt,
    AtomStr,
    Collection,
    Complex,
    Reference,
    Store,
    format_payload,
)

ATTR_PREFIX = "@"
TEXT_NAME = "_text"
VALUE_NAME = "_value"

_NAME_RE = re.compile(r"[^\W\d][\w.\-:]*")
_ENTITIES = {"lt": "<", "gt": ">", "amp": "&", "quot": '"', "apos": "'"}
_ENTITY_RE = re.compile(r"&([^;&\s]*);?")


class XmlError(Exception):
    def __init__(self, message: str, pos: int, source: str = ""):
        self.pos = pos
        self.line = source.count("\n", 0, pos) + 1
        self.column = pos - (source.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{self.line}:{self.column}: {message}")


class XmlSyntax(XmlError):
    pass


class UnsupportedFeature(XmlError):
    pass


@dataclass
class XmlNode:
    tag: str
    attributes: list = field(default_factory=list)  # (name, value) pairs
    children: list = field(default_factory=list)
    text: Optional[str] = None


class _XmlParser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message, pos=None, cls=XmlSyntax):
        return cls(message, self.pos if pos is None else pos, self.src)

    def startswith(self, s):
        return self.src.startswith(s, self.pos)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos] in " \t\r\n":
            self.pos += 1

    def expect(self, s):
        if not self.startswith(s):
            raise self.error(f"expected {s!r}")
        self.pos += len(s)

    def name(self):
        m = _NAME_RE.match(self.src, self.pos)
        if m is None:
            raise self.error("expected a name")
        self.pos = m.end()
        return m.group()

    def decode(self, text, start):
        def repl(m):
            ent = m.group(1)
            if not m.group().endswith(";") or ent not in _ENTITIES:
                raise self.error(f"unsupported entity {m.group()!r}", start + m.start())
            return _ENTITIES[ent]

        return _ENTITY_RE.sub(repl, text)

    def comment(self):
        end = self.src.find("-->", self.pos + 4)
        if end < 0:
            raise self.error("unterminated comment")
        self.pos = end + 3

    def misc(self, allow_decl=False):
        """Skip whitespace, comments and (at the start) the XML declaration."""
        while True:
            self.skip_ws()
            if self.startswith("<!--"):
                self.comment()
            elif self.startswith("<?"):
                if allow_decl and re.match(r"<\?xml[\s?]", self.src[self.pos:self.pos + 6]):
                    end = self.src.find("?>", self.pos)
                    if end < 0:
                        raise self.error("unterminated XML declaration")
                    self.pos = end + 2
                    allow_decl = False
                else:
                    raise self.error("processing instructions are not supported", cls=UnsupportedFeature)
            elif self.startswith("<!DOCTYPE") or self.startswith("<!ENTITY"):
                raise self.error("DTDs are not supported", cls=UnsupportedFeature)
            elif self.startswith("<![CDATA["):
                raise self.error("CDATA sections are not supported", cls=UnsupportedFeature)
            else:
                return
            allow_decl = False

    def document(self) -> list[XmlNode]:
        roots = []
        self.misc(allow_decl=True)
        while self.pos < len(self.src):
            if not self.startswith("<"):
                raise self.error("text outside the root element")
            roots.append(self.element())
            self.misc()
        if not roots:
            raise self.error("document has no root element")
        return roots

    def element(self) -> XmlNode:
        self.expect("<")
        node = XmlNode(self.name())
        seen = set()
        while True:
            had_ws = self.pos < len(self.src) and self.src[self.pos] in " \t\r\n"
            self.skip_ws()
            if self.startswith("/>"):
                self.pos += 2
                return node
            if self.startswith(">"):
                self.pos += 1
                break
            if not had_ws:
                raise self.error("expected whitespace, '>' or '/>'")
            at = self.pos
            attr = self.name()
            if attr in seen:
                raise self.error(f"duplicate attribute {attr!r}", at)
            seen.add(attr)
            self.skip_ws()
            self.expect("=")
            self.skip_ws()
            quote = self.src[self.pos:self.pos + 1]
            if quote not in ('"', "'"):
                raise self.error("expected a quoted attribute value")
            end = self.src.find(quote, self.pos + 1)
            if end < 0:
                raise self.error("unterminated attribute value")
            raw = self.src[self.pos + 1:end]
            if "<" in raw:
                raise self.error("'<' in attribute value", self.pos + 1 + raw.index("<"))
            node.attributes.append((attr, self.decode(raw, self.pos + 1)))
            self.pos = end + 1

        chunks = []
        while True:
            start = self.pos
            lt = self.src.find("<", self.pos)
            if lt < 0:
                raise self.error(f"unclosed element <{node.tag}>", len(self.src))
            raw = self.src[start:lt]
            if ">" in raw and "]]>" in raw:
                raise self.error("']]>' in character data", start + raw.index("]]>"))
            chunks.append(self.decode(raw, start))
            self.pos = lt
            if self.startswith("</"):
                self.pos += 2
                at = self.pos
                closing = self.name()
                if closing != node.tag:
                    raise self.error(f"mismatched </{closing}>, expected </{node.tag}>", at)
                self.skip_ws()
                self.expect(">")
                break
            if self.startswith("<!--"):
                self.comment()
                continue
            if self.startswith("<!") or self.startswith("<?"):
                self.misc()
                raise self.error("unrecognized markup declaration")
            node.children.append(self.element())
        text = "".join(chunks).strip(" \t\r\n")
        node.text = text or None
        return node


def parse_xml(document: str) -> list[XmlNode]:
    """Parse a document (or a sequence of top-level elements) into nodes."""
    return _XmlParser(document).document()


def _store_node(store: Store, parent, node: XmlNode, name: Optional[str] = None):
    oid = store.insert_object(parent, name or node.tag, Complex())
    for attr, value in node.attributes:
        store.insert_object(oid, ATTR_PREFIX + attr, AtomStr(value))
    if node.text is not None:
        store.insert_object(oid, TEXT_NAME, AtomStr(node.text))
    for child in node.children:
        _store_node(store, oid, child)
    return oid


def import_xml(document: str, store: Store, root_class: Optional[str] = None) -> list[int]:
    """Import every top-level element as a root object; returns their oids.

    ``root_class`` renames the top-level objects (the class they join).
    """
    nodes = parse_xml(document)
    return [_store_node(store, None, node, root_class) for node in nodes]


# --- export -----------------------------------------------------------------

_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;"}
_ATTR_ESCAPES = {**_TEXT_ESCAPES, '"': "&quot;"}


def _escape(text: str, table) -> str:
    return "".join(table.get(ch, ch) for ch in text)


def _value_text(payload) -> str:
    if isinstance(payload, AtomBool):
        return "true" if payload.value else "false"
    if isinstance(payload, (AtomInt, AtomStr)):
        return str(payload.value)
    if isinstance(payload, AtomFloat):
        return repr(payload.value)
    if isinstance(payload, Reference):
        return f"ref:{payload.target}"
    if isinstance(payload, Collection):
        return format_payload(payload)
    raise TypeError(payload)


def _tag(name: str) -> str:
    tag = name[1:] if name.startswith(ATTR_PREFIX) else name
    if not _NAME_RE.fullmatch(tag):
        raise ValueError(f"object name {name!r} is not a valid XML tag")
    return tag


def _export(store: Store, oid: int, out: list, depth: int, indent: str):
    obj = store.get_object(oid)
    pad = indent * depth if indent else ""
    tag = _tag(obj.name)
    if not isinstance(obj.payload, Complex):
        value = _escape(_value_text(obj.payload), _TEXT_ESCAPES)
        out.append(f"{pad}<{tag}><{VALUE_NAME}>{value}</{VALUE_NAME}></{tag}>")
        return
    attrs, text, elements = [], None, []
    for child in store.children(oid):
        if child.name.startswith(ATTR_PREFIX) and isinstance(child.payload, AtomStr):
            attrs.append(f' {_tag(child.name)}="{_escape(child.payload.value, _ATTR_ESCAPES)}"')
        elif child.name == TEXT_NAME and isinstance(child.payload, AtomStr) and text is None:
            text = child.payload.value
        else:
            elements.append(child.oid)
    head = f"{pad}<{tag}{''.join(attrs)}"
    if text is None and not elements:
        out.append(head + "/>")
        return
    body = "" if text is None else _escape(text, _TEXT_ESCAPES)
    if not elements:
        out.append(f"{head}>{body}</{tag}>")
        return
    out.append(f"{head}>{body}")
    for child in elements:
        _export(store, child, out, depth + 1, indent)
    out.append(f"{pad}</{tag}>")


def export_xml(root: int, store: Store, indent: str = "  ") -> str:
    """Serialize the subtree at ``root``. Raises UnknownOid for missing roots."""
    out: list[str] = []
    _export(store, root, out, 0, indent)
    return "\n".join(out) + "\n"
