"""The eight natural transformation rules, realized as span edits.

Every apply_* function takes a site that already passed candidate matching
and constraint validation, and returns an edit list whose application
yields compilable, behaviorally equivalent source. Edits stay inside the
site's enclosing statement span (assignment splitting additionally inserts
lines immediately before it).
"""

from __future__ import annotations

import re
from typing import Callable, Optional

from . import analysis
from .parser import (Ast, Edit, decl_entries, is_paren, param_entries,
                     rewrite, unwrap_parens)
from .rules import TransformRule
from .analysis import Site


class Inapplicable(Exception):
    """A constraint predicate does not hold at the requested site."""


def _require(ast: Ast, site: Site) -> None:
    if not analysis.constraints_valid(ast, site):
        raise Inapplicable(f"{site.rule} at byte {site.ordinal}")


def _line_indent(text: str, offset: int) -> str:
    """Leading whitespace of offset's line if the statement starts it."""
    line_start = text.rfind("\n", 0, offset) + 1
    prefix = text[line_start:offset]
    return prefix if prefix.strip() == "" else ""


_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


def fresh_names(text: str, count: int, stem: str = "tmp") -> list[str]:
    """`count` identifiers of the form `{stem}_<k>` unused anywhere in text."""
    used = set(_IDENT_RE.findall(text))
    out: list[str] = []
    k = 0
    while len(out) < count:
        cand = f"{stem}_{k}"
        if cand not in used:
            out.append(cand)
            used.add(cand)
        k += 1
    return out


# ---------------------------------------------------------------------------
# assignment splitting

def _deepest_leftmost_binary(ast: Ast, root: int) -> int:
    """The deepest BinaryExpr under `root`, leftmost among ties."""
    best: Optional[tuple[int, int, int]] = None  # (-depth, start, nid)
    stack = [(root, 0)]
    while stack:
        nid, depth = stack.pop()
        n = ast.nodes[nid]
        if n.kind == "BinaryExpr":
            key = (-depth, n.span[0], nid)
            if best is None or key < best:
                best = key
        for c in n.children:
            stack.append((c, depth + 1))
    assert best is not None
    return best[2]


def apply_assign_split(ast: Ast, site: Site) -> list[Edit]:
    """`x = a + b * c;` gains a typed temporary for the deepest
    subexpression: `int tmp_0 = b * c;` then `x = a + tmp_0;`."""
    _require(ast, site)
    stmt = ast.nodes[site.node_id]
    assign = ast.nodes[stmt.children[0]]
    lhs, rhs = assign.children
    lhs_type = analysis.declared_integer_type(ast, ast.text_of(lhs))
    target = _deepest_leftmost_binary(ast, rhs)
    # when the chosen subexpression is parenthesized, lift the whole group
    parents = ast.parent_map()
    replace_id = target
    while replace_id in parents and is_paren(ast, parents[replace_id]):
        replace_id = parents[replace_id]
    tmp = fresh_names(ast.source_text, 1)[0]
    init_text = ast.text_of(target)
    indent = _line_indent(ast.source_text, stmt.span[0])
    decl = f"{lhs_type} {tmp} = {init_text};"
    sep = f"\n{indent}" if indent or "\n" in ast.source_text else " "
    return [
        Edit((stmt.span[0], stmt.span[0]), decl + sep),
        Edit(ast.nodes[replace_id].span, tmp),
    ]


# ---------------------------------------------------------------------------
# compound assignment splitting

def apply_compound_assign_split(ast: Ast, site: Site) -> list[Edit]:
    """`lv op= e` becomes `lv = lv op (e)`; parentheses are added unless
    `e` is a bare identifier or literal."""
    _require(ast, site)
    ca = ast.nodes[ast.nodes[site.node_id].children[0]]
    lhs, rhs = ca.children
    lv = ast.text_of(lhs)
    op = ca.op[:-1]
    rhs_node = ast.nodes[rhs]
    bare = rhs_node.kind in ("Identifier", "Literal") or is_paren(ast, rhs)
    e = ast.text_of(rhs)
    rhs_text = e if bare else f"({e})"
    return [Edit(ca.span, f"{lv} = {lv} {op} {rhs_text}")]


# ---------------------------------------------------------------------------
# loop conversions

def _paren_bounds(ast: Ast, stmt_id: int) -> tuple[int, int]:
    """Byte offsets of the condition '(' and its matching ')' of a
    while/if/for statement header."""
    text = ast.source_text
    start, end = ast.nodes[stmt_id].span
    i = text.index("(", start)
    depth = 0
    for j in range(i, end):
        if text[j] == "(":
            depth += 1
        elif text[j] == ")":
            depth -= 1
            if depth == 0:
                return i, j
    raise AssertionError("unbalanced header")


def apply_while_to_for(ast: Ast, site: Site) -> list[Edit]:
    """`while (c) {...; upd;}` becomes `for (; c; upd) {...}` when the
    trailing update is hoistable; otherwise `for (; c; ) body`."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    text = ast.source_text
    lpar, rpar = _paren_bounds(ast, site.node_id)
    kw_end = text.index("while", node.span[0]) + len("while")
    edits = [Edit((node.span[0], kw_end), "for"), Edit((lpar + 1, lpar + 1), "; ")]
    upd_stmt = analysis.hoistable_update(ast, site.node_id)
    if upd_stmt is None:
        edits.append(Edit((rpar, rpar), "; "))
        return edits
    upd_expr = ast.nodes[upd_stmt].children[0]
    edits.append(Edit((rpar, rpar), f"; {ast.text_of(upd_expr)}"))
    # drop the trailing update from the body, including leading layout
    prev_end = None
    body = ast.nodes[node.children[1]]
    stmts = body.children
    idx = stmts.index(upd_stmt)
    prev_end = ast.nodes[stmts[idx - 1]].span[1] if idx > 0 else body.span[0] + 1
    edits.append(Edit((prev_end, ast.nodes[upd_stmt].span[1]), ""))
    return edits


def apply_for_to_while(ast: Ast, site: Site) -> list[Edit]:
    """`for (init; c; upd) B` becomes an init statement followed by
    `while (c)` with the update appended to the body; a declaration init
    wraps the result in braces to confine its scope."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    mask = node.op
    kids = list(node.children)
    body = kids.pop()
    init_id = kids.pop(0) if "i" in mask else None
    cond_id = kids.pop(0) if "c" in mask else None
    upd_id = kids.pop(0) if "u" in mask else None

    cond_text = ast.text_of(cond_id) if cond_id is not None else "1"
    body_node = ast.nodes[body]
    body_text = ast.text_of(body)
    upd_text = ast.text_of(upd_id) if upd_id is not None else None

    if upd_text is None:
        new_body = body_text
    elif body_node.kind == "CompoundStmt":
        new_body = body_text[:-1] + f"{upd_text}; }}"
    else:
        new_body = f"{{ {body_text} {upd_text}; }}"

    loop = f"while ({cond_text}) {new_body}"
    if init_id is None:
        replacement = loop
    else:
        init_node = ast.nodes[init_id]
        indent = _line_indent(ast.source_text, node.span[0])
        if init_node.kind == "DeclStmt":
            replacement = f"{{ {ast.text_of(init_id)} {loop} }}"
        else:
            replacement = f"{ast.text_of(init_id)};\n{indent}{loop}"
    return [Edit(node.span, replacement)]


# ---------------------------------------------------------------------------
# condition rules

_NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
_MIRRORED = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "==", "!=": "!="}


def _op_token_span(ast: Ast, binop_id: int) -> tuple[int, int]:
    """Byte span of a BinaryExpr's operator token (between its operands)."""
    n = ast.nodes[binop_id]
    left_end = ast.nodes[n.children[0]].span[1]
    right_start = ast.nodes[n.children[1]].span[0]
    gap = ast.source_text[left_end:right_start]
    k = gap.index(n.op)
    return left_end + k, left_end + k + len(n.op)


def apply_cond_negate(ast: Ast, site: Site) -> list[Edit]:
    """`if (c) A else B` becomes `if (!c) B else A`, using the mirrored
    comparison operator when that is exact for the operand types."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    cond, then, other = node.children
    inner = unwrap_parens(ast, cond)
    inner_node = ast.nodes[inner]
    edits: list[Edit] = []
    if (inner_node.kind == "BinaryExpr" and inner_node.op in _NEGATED
            and analysis.comparison_operands_typed(ast, inner)):
        s, e = _op_token_span(ast, inner)
        edits.append(Edit((s, e), _NEGATED[inner_node.op]))
    else:
        edits.append(Edit(ast.nodes[cond].span, f"!({ast.text_of(cond)})"))
    edits.append(Edit(ast.nodes[then].span, ast.text_of(other)))
    edits.append(Edit(ast.nodes[other].span, ast.text_of(then)))
    return edits


def apply_cond_split_and(ast: Ast, site: Site) -> list[Edit]:
    """`if (a && b) S else E` becomes `if (a) { if (b) S else E } else E`;
    without an else, `if (a) { if (b) S }`. Short-circuit order holds."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    cond = unwrap_parens(ast, node.children[0])
    a, b = (ast.text_of(c) for c in ast.nodes[cond].children)
    then_text = ast.text_of(node.children[1])
    if len(node.children) == 2:
        replacement = f"if ({a}) {{ if ({b}) {then_text} }}"
    else:
        else_text = ast.text_of(node.children[2])
        replacement = (f"if ({a}) {{ if ({b}) {then_text} else {else_text} }}"
                       f" else {else_text}")
    return [Edit(node.span, replacement)]


def apply_cond_split_or(ast: Ast, site: Site) -> list[Edit]:
    """`if (a || b) S else E` becomes `if (a) S else if (b) S else E`;
    `b` is still evaluated only when `a` is false."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    cond = unwrap_parens(ast, node.children[0])
    a, b = (ast.text_of(c) for c in ast.nodes[cond].children)
    then_text = ast.text_of(node.children[1])
    if len(node.children) == 2:
        replacement = f"if ({a}) {then_text} else if ({b}) {then_text}"
    else:
        else_text = ast.text_of(node.children[2])
        replacement = (f"if ({a}) {then_text} else if ({b}) {then_text}"
                       f" else {else_text}")
    return [Edit(node.span, replacement)]


def apply_cond_reorder(ast: Ast, site: Site) -> list[Edit]:
    """Swap comparison operands and mirror the operator; exact for all
    scalar types (`a < b` iff `b > a`, NaN included)."""
    _require(ast, site)
    node = ast.nodes[site.node_id]
    left, right = node.children
    s, e = _op_token_span(ast, site.node_id)
    edits = [
        Edit(ast.nodes[left].span, ast.text_of(right)),
        Edit(ast.nodes[right].span, ast.text_of(left)),
    ]
    mirrored = _MIRRORED[node.op]
    if mirrored != node.op:
        edits.append(Edit((s, e), mirrored))
    return edits


# ---------------------------------------------------------------------------
# dispatch

APPLIERS: dict[TransformRule, Callable[[Ast, Site], list[Edit]]] = {
    TransformRule.ASSIGN_SPLIT: apply_assign_split,
    TransformRule.COMPOUND_ASSIGN_SPLIT: apply_compound_assign_split,
    TransformRule.WHILE_TO_FOR: apply_while_to_for,
    TransformRule.FOR_TO_WHILE: apply_for_to_while,
    TransformRule.COND_NEGATE: apply_cond_negate,
    TransformRule.COND_SPLIT_AND: apply_cond_split_and,
    TransformRule.COND_SPLIT_OR: apply_cond_split_or,
    TransformRule.COND_REORDER: apply_cond_reorder,
}

# test/experiment extension point, mirroring analysis.EXTRA_RULES
EXTRA_APPLIERS: dict = {}


def apply_rule(ast: Ast, site: Site) -> list[Edit]:
    if site.rule in EXTRA_APPLIERS:
        return EXTRA_APPLIERS[site.rule](ast, site)
    return APPLIERS[site.rule](ast, site)


# ---------------------------------------------------------------------------
# identifier-rename baseline (not a rule; zero-structural-change contrast)

def rename_baseline(ast: Ast) -> Optional[str]:
    """Rename every locally declared identifier to a fresh `var_<k>` name.

    Used as the structural no-op baseline: the AST shape, all graphs, and
    all operator/operand counts are preserved exactly. Returns None when
    the function declares nothing renameable.
    """
    declared: list[str] = []
    for p in param_entries(ast):
        name = ast.text_of(p.id)
        if name not in declared:
            declared.append(name)
    for decl in ast.find("DeclStmt"):
        for name_id, _ in decl_entries(ast, decl):
            name = ast.text_of(name_id)
            if name not in declared:
                declared.append(name)
    if not declared:
        return None
    mapping = dict(zip(declared, fresh_names(ast.source_text, len(declared),
                                             stem="var")))
    edits = [Edit(ast.nodes[nid].span, mapping[ast.text_of(nid)])
             for nid in ast.walk()
             if ast.nodes[nid].kind == "Identifier"
             and ast.text_of(nid) in mapping]
    return rewrite(ast.source_text, edits)
