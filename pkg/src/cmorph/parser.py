"""Span-anchored parsing and byte-exact rewriting for single C functions.

One source unit holds exactly one function definition, optionally preceded
by an opaque preamble (directives, typedefs, globals) that is never parsed
or modified. Every AST node carries a half-open byte span into the original
text; analyses and rewrites are span-based, so untouched bytes survive
byte-for-byte. Constructs outside the supported subset degrade to
OpaqueStmt spans (balanced delimiters required) instead of failing the
whole parse.

Subset notes:
  - `T * x;` at statement start is read as a pointer declaration; a bare
    multiply expression statement of that shape is treated the same way.
  - Casts are recognized only for builtin type keywords; `(name)expr` with
    a typedef'd name degrades the enclosing statement to OpaqueStmt.
  - `sizeof expr` is a pure unary expression; `sizeof(type)` is opaque.
  - Array declarators keep their dimensions in the entry's typeText
    (e.g. "int []"); the size expression is not part of the tree.
  - Parenthesized expressions are explicit nodes (UnaryExpr, op "()").
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Optional

# ---------------------------------------------------------------------------
# errors

class ParseError(Exception):
    """Parse failure; `reason` is one of the REASONS constants."""

    UNBALANCED = "UnbalancedDelimiters"
    MULTIPLE_FUNCTIONS = "MultipleFunctions"
    DIRECTIVE_IN_BODY = "DirectiveInBody"
    NOT_A_FUNCTION = "NotAFunction"
    REASONS = (UNBALANCED, MULTIPLE_FUNCTIONS, DIRECTIVE_IN_BODY, NOT_A_FUNCTION)

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class OverlappingEdits(Exception):
    pass


class SpanOutOfBounds(Exception):
    pass


# ---------------------------------------------------------------------------
# domain types

LABELS = ("vulnerable", "non-vulnerable", "unknown")


@dataclass(frozen=True)
class SourceUnit:
    """One C function (plus optional opaque preamble) and its ground truth."""

    id: str
    text: str
    label: str = "unknown"


@dataclass(frozen=True)
class Edit:
    """Replace text[span[0]:span[1]] with `replacement`."""

    span: tuple[int, int]
    replacement: str


KINDS = frozenset({
    "FunctionDef", "ParamList", "CompoundStmt", "IfStmt", "WhileStmt",
    "ForStmt", "DoWhileStmt", "SwitchStmt", "CaseLabel", "ReturnStmt",
    "BreakStmt", "ContinueStmt", "GotoStmt", "LabelStmt", "DeclStmt",
    "ExprStmt", "AssignExpr", "CompoundAssignExpr", "BinaryExpr",
    "UnaryExpr", "TernaryExpr", "CallExpr", "IndexExpr", "MemberExpr",
    "CastExpr", "Identifier", "Literal", "OpaqueStmt",
})

STATEMENT_KINDS = frozenset({
    "CompoundStmt", "IfStmt", "WhileStmt", "ForStmt", "DoWhileStmt",
    "SwitchStmt", "CaseLabel", "ReturnStmt", "BreakStmt", "ContinueStmt",
    "GotoStmt", "LabelStmt", "DeclStmt", "ExprStmt", "OpaqueStmt",
})

# pseudo-operator marking an explicit parenthesized expression node
PAREN_OP = "()"


@dataclass
class AstNode:
    id: int
    kind: str
    span: tuple[int, int]
    children: list[int] = field(default_factory=list)
    op: str = ""
    type_text: str = ""


@dataclass
class Ast:
    """Tree over `source_text`; `nodes` is dense, `root` is the FunctionDef."""

    nodes: list[AstNode]
    root: int
    source_text: str

    def node(self, nid: int) -> AstNode:
        return self.nodes[nid]

    def text_of(self, nid: int) -> str:
        s, e = self.nodes[nid].span
        return self.source_text[s:e]

    def walk(self, nid: Optional[int] = None) -> Iterator[int]:
        """Preorder node ids of the subtree rooted at nid (default: root)."""
        stack = [self.root if nid is None else nid]
        while stack:
            cur = stack.pop()
            yield cur
            stack.extend(reversed(self.nodes[cur].children))

    def find(self, kind: str, under: Optional[int] = None) -> list[int]:
        return [n for n in self.walk(under) if self.nodes[n].kind == kind]

    def parent_map(self) -> dict[int, int]:
        parents: dict[int, int] = {}
        for n in self.nodes:
            for c in n.children:
                parents[c] = n.id
        return parents

    def preamble(self) -> str:
        return self.source_text[: self.nodes[self.root].span[0]]


def is_paren(ast: Ast, nid: int) -> bool:
    n = ast.nodes[nid]
    return n.kind == "UnaryExpr" and n.op == PAREN_OP


def unwrap_parens(ast: Ast, nid: int) -> int:
    while is_paren(ast, nid):
        nid = ast.nodes[nid].children[0]
    return nid


def function_name(ast: Ast) -> str:
    return ast.text_of(ast.nodes[ast.root].children[0])


def param_entries(ast: Ast) -> list[AstNode]:
    """Named parameter nodes of the function (Identifier nodes with typeText)."""
    plist = ast.nodes[ast.nodes[ast.root].children[1]]
    return [ast.nodes[c] for c in plist.children
            if ast.nodes[c].kind == "Identifier"]


def decl_entries(ast: Ast, decl_id: int) -> list[tuple[int, Optional[int]]]:
    """(name node id, initializer node id or None) per declarator of a DeclStmt."""
    out = []
    for c in ast.nodes[decl_id].children:
        node = ast.nodes[c]
        if node.kind == "Identifier":
            out.append((c, None))
        elif node.kind == "AssignExpr":
            out.append((node.children[0], node.children[1]))
    return out


# ---------------------------------------------------------------------------
# tokenizer

TYPE_KEYWORDS = frozenset({
    "void", "char", "short", "int", "long", "float", "double",
    "signed", "unsigned", "_Bool",
})
QUALIFIER_KEYWORDS = frozenset({
    "const", "volatile", "static", "register", "extern", "inline", "restrict",
})
TAG_KEYWORDS = frozenset({"struct", "union", "enum"})
STMT_KEYWORDS = frozenset({
    "if", "else", "while", "for", "do", "switch", "case", "default",
    "return", "break", "continue", "goto", "sizeof", "typedef",
})
KEYWORDS = TYPE_KEYWORDS | QUALIFIER_KEYWORDS | TAG_KEYWORDS | STMT_KEYWORDS


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | char | punct | directive | unknown
    text: str
    start: int
    end: int


_TOKEN_RE = re.compile(
    r"""
      (?P<line_comment>//[^\n]*)
    | (?P<block_comment>/\*.*?\*/)
    | (?P<number>(?:0[xX][0-9a-fA-F]+|\d+\.\d*(?:[eE][+-]?\d+)?
                  |\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)[uUlLfF]*)
    | (?P<string>"(?:[^"\\\n]|\\.)*")
    | (?P<char>'(?:[^'\\\n]|\\.)*')
    | (?P<ident>[A-Za-z_]\w*)
    | (?P<punct><<=|>>=|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\|
                |[+\-*/%&|^!~<>=?]=?|[;,.()\[\]{}:])
    """,
    re.VERBOSE | re.DOTALL,
)

_WS_RE = re.compile(r"\s+")


def tokenize(text: str) -> list[Token]:
    """Lex into tokens; comments are skipped, directives become single tokens."""
    tokens: list[Token] = []
    pos, n = 0, len(text)
    while pos < n:
        m = _WS_RE.match(text, pos)
        if m:
            pos = m.end()
            continue
        ch = text[pos]
        if ch == "#":
            line_start = text.rfind("\n", 0, pos) + 1
            if text[line_start:pos].strip() == "":
                end = pos
                while True:
                    nl = text.find("\n", end)
                    if nl == -1:
                        end = n
                        break
                    if text[nl - 1] == "\\":  # line continuation
                        end = nl + 1
                        continue
                    end = nl
                    break
                tokens.append(Token("directive", text[pos:end], pos, end))
                pos = end
                continue
        if text.startswith("/*", pos) and text.find("*/", pos + 2) == -1:
            raise ParseError(ParseError.UNBALANCED, "unterminated comment")
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            tokens.append(Token("unknown", ch, pos, pos + 1))
            pos += 1
            continue
        kind = m.lastgroup
        if kind in ("line_comment", "block_comment"):
            pos = m.end()
            continue
        if kind in ("string", "char") and "\n" in m.group():
            raise ParseError(ParseError.UNBALANCED, "unterminated literal")
        tokens.append(Token(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    return tokens


_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {v: k for k, v in _OPEN.items()}


def _locate_function(tokens: list[Token]) -> tuple[int, int, int]:
    """Indices of (signature start, body '{', matching '}') in `tokens`."""
    stack: list[str] = []
    candidates: list[tuple[int, int]] = []  # (body open idx, body close idx)
    pending_open: Optional[int] = None
    for i, tok in enumerate(tokens):
        if tok.kind != "punct":
            continue
        t = tok.text
        if t in _OPEN:
            if t == "{" and not stack:
                prev = tokens[i - 1] if i > 0 else None
                if prev is not None and prev.kind == "punct" and prev.text == ")":
                    pending_open = i
            stack.append(t)
        elif t in _CLOSE:
            if not stack or stack[-1] != _CLOSE[t]:
                raise ParseError(ParseError.UNBALANCED, f"stray {t!r}")
            stack.pop()
            if t == "}" and not stack and pending_open is not None:
                candidates.append((pending_open, i))
                pending_open = None
    if stack:
        raise ParseError(ParseError.UNBALANCED, f"unclosed {stack[-1]!r}")
    if len(candidates) > 1:
        raise ParseError(ParseError.MULTIPLE_FUNCTIONS,
                         f"{len(candidates)} top-level function bodies")
    if not candidates:
        raise ParseError(ParseError.NOT_A_FUNCTION, "no top-level function body")
    body_open, body_close = candidates[0]
    if body_close != len(tokens) - 1:
        raise ParseError(ParseError.NOT_A_FUNCTION,
                         "trailing tokens after function body")

    # walk back over ( params ) to the function name, then over specifiers
    depth = 0
    j = body_open - 1
    while j >= 0:
        t = tokens[j]
        if t.kind == "punct" and t.text == ")":
            depth += 1
        elif t.kind == "punct" and t.text == "(":
            depth -= 1
            if depth == 0:
                break
        j -= 1
    if j <= 0 or tokens[j - 1].kind != "ident":
        raise ParseError(ParseError.NOT_A_FUNCTION, "no function name")
    name_idx = j - 1
    if tokens[name_idx].text in KEYWORDS:
        raise ParseError(ParseError.NOT_A_FUNCTION,
                         f"keyword {tokens[name_idx].text!r} in name position")
    sig = name_idx
    k = name_idx - 1
    while k >= 0:
        t = tokens[k]
        if t.kind == "ident" and (t.text in TYPE_KEYWORDS
                                  or t.text in QUALIFIER_KEYWORDS
                                  or t.text in TAG_KEYWORDS
                                  or t.text not in KEYWORDS):
            sig = k
        elif t.kind == "punct" and t.text == "*":
            sig = k
        else:
            break
        k -= 1
    return sig, body_open, body_close


# ---------------------------------------------------------------------------
# recursive descent parser

class _Fail(Exception):
    """Internal: statement-local parse failure, recovered as OpaqueStmt."""


_ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
                         "<<=", ">>="})
COMPOUND_ASSIGN_OPS = frozenset(_ASSIGN_OPS - {"="})

# binding powers; higher binds tighter
_BINARY_BP = {
    ",": 1,
    "||": 4, "&&": 5, "|": 6, "^": 7, "&": 8,
    "==": 9, "!=": 9,
    "<": 10, "<=": 10, ">": 10, ">=": 10,
    "<<": 11, ">>": 11,
    "+": 12, "-": 12,
    "*": 13, "/": 13, "%": 13,
}
_ASSIGN_BP = 2
_TERNARY_BP = 3
_UNARY_OPS = frozenset({"+", "-", "!", "~", "*", "&", "++", "--"})

COMPARISON_OPS = frozenset({"<", "<=", ">", ">=", "==", "!="})


class _Parser:
    def __init__(self, text: str, tokens: list[Token]):
        self.text = text
        self.toks = tokens
        self.pos = 0
        self.nodes: list[AstNode] = []

    # --- token helpers

    def peek(self, off: int = 0) -> Optional[Token]:
        i = self.pos + off
        return self.toks[i] if i < len(self.toks) else None

    def at(self, text: str, off: int = 0) -> bool:
        t = self.peek(off)
        return t is not None and t.text == text

    def at_kind(self, kind: str, off: int = 0) -> bool:
        t = self.peek(off)
        return t is not None and t.kind == kind

    def take(self) -> Token:
        if self.pos >= len(self.toks):
            raise _Fail("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t is None or t.text != text:
            raise _Fail(f"expected {text!r}")
        return self.take()

    def make(self, kind: str, span: tuple[int, int], children: list[int] = None,
             op: str = "", type_text: str = "") -> int:
        nid = len(self.nodes)
        self.nodes.append(AstNode(nid, kind, span, children or [], op, type_text))
        return nid

    def span_of(self, nid: int) -> tuple[int, int]:
        return self.nodes[nid].span

    # --- function definition

    def parse_function(self, sig_tok: int, open_tok: int, close_tok: int) -> int:
        name_idx = None
        depth = 0
        for i in range(open_tok - 1, sig_tok - 1, -1):
            t = self.toks[i]
            if t.kind == "punct" and t.text == ")":
                depth += 1
            elif t.kind == "punct" and t.text == "(":
                depth -= 1
                if depth == 0:
                    name_idx = i - 1
                    break
        assert name_idx is not None
        name_tok = self.toks[name_idx]
        name = self.make("Identifier", (name_tok.start, name_tok.end))
        ret_type = self.text[self.toks[sig_tok].start:name_tok.start].strip()

        self.pos = name_idx + 1
        params = self.parse_param_list()
        self.pos = open_tok
        body = self.parse_compound()
        span = (self.toks[sig_tok].start, self.toks[close_tok].end)
        return self.make("FunctionDef", span, [name, params, body],
                         type_text=ret_type)

    def parse_param_list(self) -> int:
        lparen = self.expect("(")
        children: list[int] = []
        if self.at(")"):
            rparen = self.take()
            return self.make("ParamList", (lparen.start, rparen.end), children)
        if self.at("void") and self.at(")", 1):
            self.take()
            rparen = self.take()
            return self.make("ParamList", (lparen.start, rparen.end), children)
        while True:
            children.append(self.parse_param())
            if self.at(","):
                self.take()
                continue
            break
        rparen = self.expect(")")
        return self.make("ParamList", (lparen.start, rparen.end), children)

    def parse_param(self) -> int:
        """One parameter; unnamed or unsupported shapes become OpaqueStmt."""
        start_pos = self.pos
        start_byte = self.peek().start if self.peek() else 0
        try:
            specs = self.parse_specifiers()
            if not specs:
                raise _Fail("no specifiers")
            stars = 0
            while self.at("*"):
                self.take()
                stars += 1
            if not self.at_kind("ident") or self.peek().text in KEYWORDS:
                raise _Fail("unnamed parameter")
            name_tok = self.take()
            suffix = ""
            while self.at("["):
                self.take()
                while not self.at("]"):
                    self.take()
                self.take()
                suffix = " []"
            if not (self.at(",") or self.at(")")):
                raise _Fail("unsupported parameter shape")
            type_text = specs + (" " + "*" * stars if stars else "") + suffix
            return self.make("Identifier", (name_tok.start, name_tok.end),
                             type_text=type_text)
        except _Fail:
            self.pos = start_pos
            depth = 0
            end_byte = start_byte
            while self.peek() is not None:
                t = self.peek()
                if t.kind == "punct" and t.text in "([":
                    depth += 1
                elif t.kind == "punct" and t.text in ")]":
                    if depth == 0:
                        break
                    depth -= 1
                elif t.kind == "punct" and t.text == "," and depth == 0:
                    break
                end_byte = t.end
                self.take()
            return self.make("OpaqueStmt", (start_byte, end_byte))

    def parse_specifiers(self) -> str:
        """Consume declaration specifiers; returns their normalized text."""
        parts: list[str] = []
        saw_type = False
        while True:
            t = self.peek()
            if t is None or t.kind != "ident":
                break
            w = t.text
            if w in QUALIFIER_KEYWORDS:
                parts.append(w)
                self.take()
            elif w in TYPE_KEYWORDS:
                parts.append(w)
                saw_type = True
                self.take()
            elif w in TAG_KEYWORDS:
                self.take()
                if not self.at_kind("ident"):
                    raise _Fail("anonymous aggregate")
                parts.append(w + " " + self.take().text)
                saw_type = True
            elif not saw_type and w not in KEYWORDS and self._looks_like_decl_name():
                parts.append(w)  # typedef'd type name, taken verbatim
                saw_type = True
                self.take()
            else:
                break
        return " ".join(parts)

    def _looks_like_decl_name(self) -> bool:
        """After a candidate typedef name: `* ident` or `ident` follows."""
        i = 1
        while self.at("*", i):
            i += 1
        t = self.peek(i)
        return (t is not None and t.kind == "ident" and t.text not in KEYWORDS
                and (i > 0 or True))

    # --- statements

    def parse_statement(self) -> int:
        start_pos = self.pos
        try:
            return self.parse_statement_strict()
        except _Fail:
            self.pos = start_pos
            return self.parse_opaque()

    def parse_opaque(self) -> int:
        start = self.peek()
        if start is None:
            raise ParseError(ParseError.UNBALANCED, "empty statement region")
        depth = 0
        end = start.end
        saw_block = False
        while self.peek() is not None:
            t = self.peek()
            if t.kind == "punct":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]":
                    if depth == 0:
                        break
                    depth -= 1
                elif t.text == "}":
                    if depth == 0:
                        break
                    depth -= 1
                    if depth == 0:
                        saw_block = True
                        end = t.end
                        self.take()
                        if self.at(";"):
                            end = self.take().end
                        return self.make("OpaqueStmt", (start.start, end))
                elif t.text == ";" and depth == 0:
                    end = t.end
                    self.take()
                    return self.make("OpaqueStmt", (start.start, end))
            end = t.end
            self.take()
        if not saw_block and end == start.end and self.pos == 0:
            raise ParseError(ParseError.UNBALANCED, "cannot recover statement")
        return self.make("OpaqueStmt", (start.start, end))

    def parse_statement_strict(self) -> int:
        t = self.peek()
        if t is None:
            raise _Fail("eof")
        if t.kind == "directive":
            raise _Fail("directive")
        if t.kind == "punct" and t.text == "{":
            return self.parse_compound()
        if t.kind == "punct" and t.text == ";":
            tok = self.take()
            return self.make("OpaqueStmt", (tok.start, tok.end))
        if t.kind == "ident":
            w = t.text
            if w == "if":
                return self.parse_if()
            if w == "while":
                return self.parse_while()
            if w == "do":
                return self.parse_do()
            if w == "for":
                return self.parse_for()
            if w == "switch":
                return self.parse_switch()
            if w == "return":
                return self.parse_return()
            if w == "break":
                tok = self.take()
                end = self.expect(";")
                return self.make("BreakStmt", (tok.start, end.end))
            if w == "continue":
                tok = self.take()
                end = self.expect(";")
                return self.make("ContinueStmt", (tok.start, end.end))
            if w == "goto":
                tok = self.take()
                if not self.at_kind("ident"):
                    raise _Fail("goto target")
                label_tok = self.take()
                label = self.make("Identifier", (label_tok.start, label_tok.end))
                end = self.expect(";")
                return self.make("GotoStmt", (tok.start, end.end), [label])
            if w in ("case", "default"):
                return self.parse_case()
            if w == "typedef":
                raise _Fail("typedef in body")
            if w not in KEYWORDS and self.at(":", 1):
                return self.parse_label()
            if self.starts_declaration():
                return self.parse_declaration()
        if t.kind == "ident" and (t.text in TYPE_KEYWORDS
                                  or t.text in QUALIFIER_KEYWORDS
                                  or t.text in TAG_KEYWORDS):
            return self.parse_declaration()
        return self.parse_expr_statement()

    def starts_declaration(self) -> bool:
        t = self.peek()
        if t is None or t.kind != "ident" or t.text in KEYWORDS:
            return False
        i = 1
        while self.at("*", i):
            i += 1
        nxt = self.peek(i)
        if nxt is None or nxt.kind != "ident" or nxt.text in KEYWORDS:
            return False
        after = self.peek(i + 1)
        return after is not None and after.kind == "punct" and \
            after.text in (";", "=", ",", "[")

    def parse_compound(self) -> int:
        lbrace = self.expect("{")
        children: list[int] = []
        while not self.at("}"):
            if self.peek() is None:
                raise _Fail("unterminated block")
            children.append(self.parse_statement())
        rbrace = self.take()
        return self.make("CompoundStmt", (lbrace.start, rbrace.end), children)

    def parse_if(self) -> int:
        kw = self.take()
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_statement()
        children = [cond, then]
        end = self.span_of(then)[1]
        if self.at("else"):
            self.take()
            other = self.parse_statement()
            children.append(other)
            end = self.span_of(other)[1]
        return self.make("IfStmt", (kw.start, end), children)

    def parse_while(self) -> int:
        kw = self.take()
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        body = self.parse_statement()
        return self.make("WhileStmt", (kw.start, self.span_of(body)[1]),
                         [cond, body])

    def parse_do(self) -> int:
        kw = self.take()
        body = self.parse_statement()
        self.expect("while")
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        end = self.expect(";")
        return self.make("DoWhileStmt", (kw.start, end.end), [body, cond])

    def parse_for(self) -> int:
        kw = self.take()
        self.expect("(")
        children: list[int] = []
        mask = ""
        if self.at(";"):
            self.take()
        else:
            if self.starts_declaration() or (
                    self.at_kind("ident") and self.peek().text in
                    (TYPE_KEYWORDS | QUALIFIER_KEYWORDS | TAG_KEYWORDS)):
                children.append(self.parse_declaration())
            else:
                init = self.parse_expr()
                self.expect(";")
                children.append(init)
            mask += "i"
        if self.at(";"):
            self.take()
        else:
            children.append(self.parse_expr())
            self.expect(";")
            mask += "c"
        if self.at(")"):
            self.take()
        else:
            children.append(self.parse_expr())
            self.expect(")")
            mask += "u"
        body = self.parse_statement()
        children.append(body)
        return self.make("ForStmt", (kw.start, self.span_of(body)[1]),
                         children, op=mask)

    def parse_switch(self) -> int:
        kw = self.take()
        self.expect("(")
        ctrl = self.parse_expr()
        self.expect(")")
        body = self.parse_statement()
        return self.make("SwitchStmt", (kw.start, self.span_of(body)[1]),
                         [ctrl, body])

    def parse_case(self) -> int:
        kw = self.take()
        if kw.text == "case":
            value = self.parse_expr(min_bp=_TERNARY_BP)
            self.expect(":")
            stmt = self.parse_statement()
            return self.make("CaseLabel", (kw.start, self.span_of(stmt)[1]),
                             [value, stmt])
        self.expect(":")
        stmt = self.parse_statement()
        return self.make("CaseLabel", (kw.start, self.span_of(stmt)[1]),
                         [stmt], op="default")

    def parse_label(self) -> int:
        name_tok = self.take()
        name = self.make("Identifier", (name_tok.start, name_tok.end))
        self.expect(":")
        stmt = self.parse_statement()
        return self.make("LabelStmt", (name_tok.start, self.span_of(stmt)[1]),
                         [name, stmt])

    def parse_return(self) -> int:
        kw = self.take()
        children: list[int] = []
        if not self.at(";"):
            children.append(self.parse_expr())
        end = self.expect(";")
        return self.make("ReturnStmt", (kw.start, end.end), children)

    def parse_declaration(self) -> int:
        start = self.peek()
        specs = self.parse_specifiers()
        if not specs:
            raise _Fail("no declaration specifiers")
        children: list[int] = []
        while True:
            stars = 0
            while self.at("*"):
                self.take()
                stars += 1
            if not self.at_kind("ident") or self.peek().text in KEYWORDS:
                raise _Fail("missing declarator name")
            name_tok = self.take()
            suffix = ""
            while self.at("["):
                self.take()
                depth = 1
                while depth:
                    t = self.take()
                    if t.text == "[":
                        depth += 1
                    elif t.text == "]":
                        depth -= 1
                suffix = " []"
            type_text = specs + (" " + "*" * stars if stars else "") + suffix
            name = self.make("Identifier", (name_tok.start, name_tok.end),
                             type_text=type_text)
            if self.at("="):
                self.take()
                init = self.parse_expr(stop_comma=True)
                span = (name_tok.start, self.span_of(init)[1])
                children.append(self.make("AssignExpr", span, [name, init],
                                          op="="))
            else:
                children.append(name)
            if self.at(","):
                self.take()
                continue
            break
        end = self.expect(";")
        return self.make("DeclStmt", (start.start, end.end), children,
                         type_text=specs)

    def parse_expr_statement(self) -> int:
        start = self.peek()
        expr = self.parse_expr()
        end = self.expect(";")
        return self.make("ExprStmt", (start.start, end.end), [expr])

    # --- expressions (precedence climbing)

    def parse_expr(self, min_bp: int = 0, stop_comma: bool = False) -> int:
        lhs = self.parse_unary()
        while True:
            t = self.peek()
            if t is None or t.kind != "punct":
                break
            op = t.text
            if op in _ASSIGN_OPS:
                if _ASSIGN_BP < min_bp:
                    break
                self.take()
                rhs = self.parse_expr(_ASSIGN_BP, stop_comma)  # right-assoc
                span = (self.span_of(lhs)[0], self.span_of(rhs)[1])
                kind = "AssignExpr" if op == "=" else "CompoundAssignExpr"
                lhs = self.make(kind, span, [lhs, rhs], op=op)
                continue
            if op == "?":
                if _TERNARY_BP < min_bp:
                    break
                self.take()
                mid = self.parse_expr()
                self.expect(":")
                rhs = self.parse_expr(_TERNARY_BP, stop_comma)
                span = (self.span_of(lhs)[0], self.span_of(rhs)[1])
                lhs = self.make("TernaryExpr", span, [lhs, mid, rhs], op="?:")
                continue
            bp = _BINARY_BP.get(op)
            if bp is None or bp < min_bp or (op == "," and stop_comma):
                break
            if op == "," and min_bp > _BINARY_BP[","]:
                break
            self.take()
            rhs = self.parse_expr(bp + 1, stop_comma)  # left-assoc
            span = (self.span_of(lhs)[0], self.span_of(rhs)[1])
            lhs = self.make("BinaryExpr", span, [lhs, rhs], op=op)
        return lhs

    def parse_unary(self) -> int:
        t = self.peek()
        if t is None:
            raise _Fail("expected expression")
        if t.kind == "punct" and t.text in _UNARY_OPS:
            self.take()
            operand = self.parse_unary()
            return self.make("UnaryExpr", (t.start, self.span_of(operand)[1]),
                             [operand], op=t.text)
        if t.kind == "ident" and t.text == "sizeof":
            self.take()
            operand = self.parse_unary()  # sizeof(type) fails into OpaqueStmt
            return self.make("UnaryExpr", (t.start, self.span_of(operand)[1]),
                             [operand], op="sizeof")
        if t.kind == "punct" and t.text == "(":
            nxt = self.peek(1)
            if nxt is not None and nxt.kind == "ident" and (
                    nxt.text in TYPE_KEYWORDS or nxt.text in TAG_KEYWORDS
                    or nxt.text in QUALIFIER_KEYWORDS):
                return self.parse_cast()
        return self.parse_postfix()

    def parse_cast(self) -> int:
        lparen = self.take()
        specs = self.parse_specifiers()
        stars = 0
        while self.at("*"):
            self.take()
            stars += 1
        self.expect(")")
        operand = self.parse_unary()
        type_text = specs + (" " + "*" * stars if stars else "")
        return self.make("CastExpr", (lparen.start, self.span_of(operand)[1]),
                         [operand], type_text=type_text)

    def parse_postfix(self) -> int:
        node = self.parse_primary()
        while True:
            t = self.peek()
            if t is None or t.kind != "punct":
                break
            if t.text == "(":
                self.take()
                args: list[int] = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr(stop_comma=True))
                        if self.at(","):
                            self.take()
                            continue
                        break
                rparen = self.expect(")")
                span = (self.span_of(node)[0], rparen.end)
                node = self.make("CallExpr", span, [node] + args)
            elif t.text == "[":
                self.take()
                index = self.parse_expr()
                rbracket = self.expect("]")
                span = (self.span_of(node)[0], rbracket.end)
                node = self.make("IndexExpr", span, [node, index])
            elif t.text in (".", "->"):
                self.take()
                if not self.at_kind("ident"):
                    raise _Fail("member name")
                m = self.take()
                member = self.make("Identifier", (m.start, m.end))
                span = (self.span_of(node)[0], m.end)
                node = self.make("MemberExpr", span, [node, member], op=t.text)
            elif t.text in ("++", "--"):
                self.take()
                span = (self.span_of(node)[0], t.end)
                node = self.make("UnaryExpr", span, [node], op=t.text)
            else:
                break
        return node

    def parse_primary(self) -> int:
        t = self.peek()
        if t is None:
            raise _Fail("expected primary")
        if t.kind == "punct" and t.text == "(":
            self.take()
            inner = self.parse_expr()
            rparen = self.expect(")")
            return self.make("UnaryExpr", (t.start, rparen.end), [inner],
                             op=PAREN_OP)
        if t.kind == "ident":
            if t.text in KEYWORDS:
                raise _Fail(f"keyword {t.text!r} in expression")
            self.take()
            return self.make("Identifier", (t.start, t.end))
        if t.kind in ("number", "string", "char"):
            self.take()
            return self.make("Literal", (t.start, t.end))
        raise _Fail(f"unexpected token {t.text!r}")


# ---------------------------------------------------------------------------
# public operations

def parse(unit: SourceUnit) -> Ast:
    """Parse a source unit into a span-anchored Ast; raises ParseError."""
    return parse_text(unit.text)


def parse_text(text: str) -> Ast:
    tokens = tokenize(text)
    sig, body_open, body_close = _locate_function(tokens)
    body_start = tokens[body_open].start
    body_end = tokens[body_close].end
    for t in tokens:
        if t.kind == "directive" and body_start <= t.start < body_end:
            raise ParseError(ParseError.DIRECTIVE_IN_BODY, t.text.split("\n")[0])
    p = _Parser(text, tokens)
    root = p.parse_function(sig, body_open, body_close)
    return Ast(p.nodes, root, text)


def parse_expression_text(text: str) -> Ast:
    """Parse `text` as a single expression (testing/fragment helper)."""
    tokens = tokenize(text)
    p = _Parser(text, tokens)
    try:
        root = p.parse_expr()
    except _Fail as e:
        raise ParseError(ParseError.NOT_A_FUNCTION, f"bad expression: {e}")
    if p.pos != len(tokens):
        raise ParseError(ParseError.NOT_A_FUNCTION, "trailing tokens")
    return Ast(p.nodes, root, text)


def parse_statement_text(text: str) -> Ast:
    """Parse `text` as a single statement (testing/fragment helper)."""
    tokens = tokenize(text)
    p = _Parser(text, tokens)
    root = p.parse_statement()
    if p.pos != len(tokens):
        raise ParseError(ParseError.NOT_A_FUNCTION, "trailing tokens")
    return Ast(p.nodes, root, text)


def rewrite(text: str, edits: list[Edit]) -> str:
    """Apply non-overlapping span edits; untouched bytes are preserved."""
    for e in edits:
        s, t = e.span
        if not (0 <= s <= t <= len(text)):
            raise SpanOutOfBounds(f"span {e.span} outside text of {len(text)}")
    ordered = sorted(edits, key=lambda e: (e.span[0], e.span[1]))
    for a, b in zip(ordered, ordered[1:]):
        if b.span[0] < a.span[1] or (a.span == b.span and a.span[0] == a.span[1]
                                     and a is not b):
            raise OverlappingEdits(f"{a.span} overlaps {b.span}")
    out = text
    for e in sorted(edits, key=lambda e: (e.span[0], e.span[1]), reverse=True):
        out = out[:e.span[0]] + e.replacement + out[e.span[1]:]
    return out


# ---------------------------------------------------------------------------
# corpus I/O (JSONL: {"idx": int, "func": str, "target": 0|1})

def unit_from_record(rec: dict) -> SourceUnit:
    target = rec.get("target")
    label = {1: "vulnerable", 0: "non-vulnerable"}.get(target, "unknown")
    return SourceUnit(id=str(rec["idx"]), text=rec["func"], label=label)


def iter_corpus(path: str) -> Iterator[SourceUnit]:
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                yield unit_from_record(json.loads(line))


def write_corpus(path: str, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
