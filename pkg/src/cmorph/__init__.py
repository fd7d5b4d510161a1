"""cmorph: semantics-preserving C source transformations, graph/complexity
measurement, and black-box detector evasion evaluation."""

__version__ = "0.1.0"

from .parser import Ast, AstNode, Edit, ParseError, SourceUnit, parse, rewrite
from .rules import TransformRule

__all__ = [
    "Ast", "AstNode", "Edit", "ParseError", "SourceUnit", "parse", "rewrite",
    "TransformRule", "__version__",
]
