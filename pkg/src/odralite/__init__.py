"""In-memory object database with an SBQL-subset query engine.

Joins on collection-valued attributes are rewritten into a partitioned
hash-trie join when the query is an independent equi-join.
"""
from .engine import Interpreter, detect_equi_join, evaluate, execute, explain
from .fusion import fusion_join, nested_loop_join
from .query import parse, unparse
from .store import Store, dumps, loads
from .xmlio import export_xml, import_xml

__version__ = "0.1.0"

__all__ = [
    "Interpreter",
    "Store",
    "detect_equi_join",
    "dumps",
    "evaluate",
    "execute",
    "explain",
    "export_xml",
    "fusion_join",
    "import_xml",
    "loads",
    "nested_loop_join",
    "parse",
    "unparse",
]
