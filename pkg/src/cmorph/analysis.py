"""Site localization and semantic-validity checking for transformation rules.

For each rule, `candidate_nodes` pattern-matches AST nodes in strictly
increasing source order and `constraints_valid` decides whether applying
the rule there is compilable and semantics-preserving. Purity analysis is
syntactic and conservative: anything opaque or unknown fails it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .parser import (Ast, COMPARISON_OPS, PAREN_OP, decl_entries, is_paren,
                     param_entries, unwrap_parens)
from .rules import TransformRule

# Bumped whenever a predicate changes, so applicability statistics remain
# comparable across releases.
CONSTRAINT_CATALOG_VERSION = 1

_INC_DEC = ("++", "--")


@dataclass(frozen=True)
class Site:
    """A (node, rule) pair that passed pattern matching.

    `ordinal` is the byte offset of the node's span start; it is the total
    order used for multi-location application.
    """

    node_id: int
    rule: TransformRule
    ordinal: int


@dataclass(frozen=True)
class ConstraintSet:
    rule: TransformRule
    predicates: tuple[str, ...]


def has_side_effects(ast: Ast, node_id: int) -> bool:
    """True iff the subtree may write state or call out.

    Conservative over-approximation: assignments, compound assignments,
    calls, increments/decrements, and opaque regions all count.
    """
    for nid in ast.walk(node_id):
        n = ast.nodes[nid]
        if n.kind in ("AssignExpr", "CompoundAssignExpr", "CallExpr",
                      "OpaqueStmt"):
            return True
        if n.kind == "UnaryExpr" and n.op in _INC_DEC:
            return True
    return False


_INT_TYPE_RE = re.compile(
    r"^(?:const\s+)?"
    r"(?:(?:unsigned|signed)\s+)?"
    r"(?:char|short(?:\s+int)?|int|long(?:\s+int)?|long\s+long(?:\s+int)?"
    r"|unsigned|signed)"
    r"(?:\s+const)?$"
)


def is_integer_type(type_text: str) -> bool:
    return bool(_INT_TYPE_RE.match(type_text.strip()))


def declared_integer_type(ast: Ast, identifier: str) -> Optional[str]:
    """Verbatim declared type of `identifier` if it is a standard integer
    type declared inside the function (DeclStmt or parameter); else None.

    Multiple declarations with conflicting type text also yield None.
    """
    found: Optional[str] = None
    for p in param_entries(ast):
        if ast.text_of(p.id) == identifier:
            if found is not None and found != p.type_text:
                return None
            found = p.type_text
    for decl in ast.find("DeclStmt"):
        for name_id, _init in decl_entries(ast, decl):
            if ast.text_of(name_id) == identifier:
                tt = ast.nodes[name_id].type_text
                if found is not None and found != tt:
                    return None
                found = tt
    if found is not None and is_integer_type(found):
        return found
    return None


# ---------------------------------------------------------------------------
# pattern matching

def _if_condition_comparisons(ast: Ast) -> list[int]:
    """Comparison BinaryExpr nodes occurring inside any if condition."""
    out = []
    for if_id in ast.find("IfStmt"):
        cond = ast.nodes[if_id].children[0]
        for nid in ast.walk(cond):
            n = ast.nodes[nid]
            if n.kind == "BinaryExpr" and n.op in COMPARISON_OPS:
                out.append(nid)
    return out


def _stmt_expr(ast: Ast, stmt_id: int, kind: str) -> Optional[int]:
    n = ast.nodes[stmt_id]
    if n.kind == "ExprStmt" and ast.nodes[n.children[0]].kind == kind:
        return n.children[0]
    return None


def _matches(ast: Ast, rule: TransformRule) -> list[int]:
    if rule is TransformRule.ASSIGN_SPLIT:
        return [s for s in ast.find("ExprStmt")
                if _stmt_expr(ast, s, "AssignExpr") is not None]
    if rule is TransformRule.COMPOUND_ASSIGN_SPLIT:
        return [s for s in ast.find("ExprStmt")
                if _stmt_expr(ast, s, "CompoundAssignExpr") is not None]
    if rule is TransformRule.WHILE_TO_FOR:
        return ast.find("WhileStmt")
    if rule is TransformRule.FOR_TO_WHILE:
        return ast.find("ForStmt")
    if rule is TransformRule.COND_NEGATE:
        return ast.find("IfStmt")
    if rule is TransformRule.COND_SPLIT_AND:
        return [i for i in ast.find("IfStmt")
                if ast.nodes[unwrap_parens(ast, ast.nodes[i].children[0])].op
                == "&&"]
    if rule is TransformRule.COND_SPLIT_OR:
        return [i for i in ast.find("IfStmt")
                if ast.nodes[unwrap_parens(ast, ast.nodes[i].children[0])].op
                == "||"]
    if rule is TransformRule.COND_REORDER:
        return _if_condition_comparisons(ast)
    raise ValueError(f"unknown rule {rule!r}")


# Extension point used by tests and experiments: entries map a rule object
# to (matcher, validator) callables with the same signatures as the
# built-in dispatch.
EXTRA_RULES: dict = {}


def candidate_nodes(ast: Ast, rule) -> list[Site]:
    """Every node whose kind pattern-matches `rule`, ordered by ordinal."""
    if rule in EXTRA_RULES:
        node_ids = EXTRA_RULES[rule][0](ast)
    else:
        node_ids = _matches(ast, rule)
    sites = [Site(nid, rule, ast.nodes[nid].span[0]) for nid in set(node_ids)]
    sites.sort(key=lambda s: s.ordinal)
    return sites


# ---------------------------------------------------------------------------
# constraint predicates

_PROMOTION_STABLE_RE = re.compile(
    r"^(?:const\s+)?(?:unsigned\s+|signed\s+)?"
    r"(?:int|long(?:\s+int)?|long\s+long(?:\s+int)?|unsigned|signed)$"
)


def _is_promotion_stable_int(type_text: str) -> bool:
    """Integer types whose arithmetic does not change under promotion
    (int width and up; char/short are excluded)."""
    return bool(_PROMOTION_STABLE_RE.match(type_text.strip()))


_PLAIN_INT_LITERAL_RE = re.compile(r"^(?:0[xX][0-9a-fA-F]+|\d+)$")


def _is_small_int_literal(text: str) -> bool:
    if not _PLAIN_INT_LITERAL_RE.match(text):
        return False
    return int(text, 0) < 2 ** 31


def _strip_const(type_text: str) -> str:
    return " ".join(w for w in type_text.split() if w != "const")


def _assign_split_valid(ast: Ast, node_id: int) -> bool:
    assign = _stmt_expr(ast, node_id, "AssignExpr")
    if assign is None:
        return False
    lhs, rhs = ast.nodes[assign].children
    if ast.nodes[lhs].kind != "Identifier":
        return False
    lhs_type = declared_integer_type(ast, ast.text_of(lhs))
    if lhs_type is None or not _is_promotion_stable_int(lhs_type):
        return False
    if has_side_effects(ast, rhs):
        return False
    n_binops = 0
    base = _strip_const(lhs_type)
    for nid in ast.walk(rhs):
        n = ast.nodes[nid]
        if n.kind == "BinaryExpr":
            n_binops += 1
        elif n.kind == "Identifier":
            t = declared_integer_type(ast, ast.text_of(nid))
            if t is None or _strip_const(t) != base:
                return False
        elif n.kind == "Literal":
            if not _is_small_int_literal(ast.text_of(nid)):
                return False
        elif not is_paren(ast, nid):
            return False
    return n_binops >= 2


def _compound_assign_split_valid(ast: Ast, node_id: int) -> bool:
    ca = _stmt_expr(ast, node_id, "CompoundAssignExpr")
    if ca is None:
        return False
    lhs = ast.nodes[ca].children[0]
    lkind = ast.nodes[lhs].kind
    if lkind == "Identifier":
        return True
    if lkind in ("MemberExpr", "IndexExpr"):
        # single-evaluation safety: the lvalue is evaluated twice after the
        # split, so its subexpressions must be side-effect-free
        return not has_side_effects(ast, lhs)
    return False


def _own_continues(ast: Ast, loop_id: int) -> bool:
    """True iff a continue inside `loop_id` binds to this loop (nested
    loops capture their own continues; switch does not)."""
    loops = ("WhileStmt", "ForStmt", "DoWhileStmt")
    body = ast.nodes[loop_id].children[-1]
    stack = [body]
    while stack:
        nid = stack.pop()
        n = ast.nodes[nid]
        if n.kind == "ContinueStmt":
            return True
        if n.kind in loops:
            continue
        stack.extend(n.children)
    return False


def hoistable_update(ast: Ast, while_id: int) -> Optional[int]:
    """Trailing update statement of a while body that can move into a for
    header: an ExprStmt writing exactly one identifier that also occurs in
    the loop condition. Returns that ExprStmt node id, or None."""
    cond, body = ast.nodes[while_id].children
    if ast.nodes[body].kind != "CompoundStmt" or not ast.nodes[body].children:
        return None
    if _own_continues(ast, while_id):
        return None
    last = ast.nodes[body].children[-1]
    if ast.nodes[last].kind != "ExprStmt":
        return None
    expr = ast.nodes[ast.nodes[last].children[0]]
    if expr.kind == "UnaryExpr" and expr.op in _INC_DEC:
        target = expr.children[0]
    elif expr.kind in ("AssignExpr", "CompoundAssignExpr"):
        target = expr.children[0]
        if has_side_effects(ast, expr.children[1]):
            return None
    else:
        return None
    if ast.nodes[target].kind != "Identifier":
        return None
    name = ast.text_of(target)
    cond_names = {ast.text_of(n) for n in ast.walk(cond)
                  if ast.nodes[n].kind == "Identifier"}
    return last if name in cond_names else None


def _while_to_for_valid(ast: Ast, node_id: int) -> bool:
    return ast.nodes[node_id].kind == "WhileStmt"


def _for_to_while_valid(ast: Ast, node_id: int) -> bool:
    if ast.nodes[node_id].kind != "ForStmt":
        return False
    return not _own_continues(ast, node_id)


def _contains_kinds(ast: Ast, node_id: int, kinds: tuple[str, ...]) -> bool:
    return any(ast.nodes[n].kind in kinds for n in ast.walk(node_id))


def _contains_static_decl(ast: Ast, node_id: int) -> bool:
    return any(ast.nodes[n].kind == "DeclStmt"
               and "static" in ast.nodes[n].type_text.split()
               for n in ast.walk(node_id))


def _duplication_safe(ast: Ast, node_id: int) -> bool:
    """Safe to duplicate byte-exactly: no labels (duplicate definitions),
    no opaque regions (may hide labels), no static locals (storage would
    split across copies)."""
    return (not _contains_kinds(ast, node_id,
                                ("LabelStmt", "CaseLabel", "OpaqueStmt"))
            and not _contains_static_decl(ast, node_id))


_LABELISH = ("LabelStmt", "CaseLabel")


def comparison_operands_typed(ast: Ast, cmp_id: int) -> bool:
    """Both operands are integer literals or identifiers with a known
    declared integer type (mirror negation is exact only then)."""
    for child in ast.nodes[cmp_id].children:
        c = ast.nodes[unwrap_parens(ast, child)]
        if c.kind == "Literal":
            if not _PLAIN_INT_LITERAL_RE.match(ast.text_of(c.id).rstrip("uUlL")):
                return False
        elif c.kind == "Identifier":
            if declared_integer_type(ast, ast.text_of(c.id)) is None:
                return False
        else:
            return False
    return True


def _cond_negate_valid(ast: Ast, node_id: int) -> bool:
    n = ast.nodes[node_id]
    if n.kind != "IfStmt" or len(n.children) != 3:
        return False  # an else branch is required
    _, then, other = n.children
    return not (_contains_kinds(ast, then, _LABELISH)
                or _contains_kinds(ast, other, _LABELISH))


def _cond_split_and_valid(ast: Ast, node_id: int) -> bool:
    n = ast.nodes[node_id]
    if n.kind != "IfStmt":
        return False
    cond = ast.nodes[unwrap_parens(ast, n.children[0])]
    if cond.op != "&&":
        return False
    if len(n.children) == 2:
        return True  # nothing is duplicated in the no-else form
    then, other = n.children[1], n.children[2]
    if _contains_kinds(ast, then, _LABELISH) or \
            _contains_kinds(ast, other, _LABELISH):
        return False
    return _duplication_safe(ast, other)  # the else branch is duplicated


def _cond_split_or_valid(ast: Ast, node_id: int) -> bool:
    n = ast.nodes[node_id]
    if n.kind != "IfStmt":
        return False
    cond = ast.nodes[unwrap_parens(ast, n.children[0])]
    if cond.op != "||":
        return False
    return _duplication_safe(ast, n.children[1])  # then branch is duplicated


# precedence classes used to decide whether a swapped operand keeps its
# binding without fresh parentheses
_TIGHT_BINARY = {"*": 13, "/": 13, "%": 13, "+": 12, "-": 12, "<<": 11,
                 ">>": 11, "<": 10, "<=": 10, ">": 10, ">=": 10}
_SITE_PREC = {"<": 10, "<=": 10, ">": 10, ">=": 10, "==": 9, "!=": 9}


def _operand_swap_safe(ast: Ast, operand_id: int, site_prec: int) -> bool:
    n = ast.nodes[operand_id]
    if is_paren(ast, operand_id):
        return True
    if n.kind in ("Identifier", "Literal", "CallExpr", "IndexExpr",
                  "MemberExpr", "UnaryExpr", "CastExpr"):
        return True
    if n.kind == "BinaryExpr":
        return _TIGHT_BINARY.get(n.op, 0) > site_prec
    return False


def _cond_reorder_valid(ast: Ast, node_id: int) -> bool:
    n = ast.nodes[node_id]
    if n.kind != "BinaryExpr" or n.op not in COMPARISON_OPS:
        return False
    prec = _SITE_PREC[n.op]
    for child in n.children:
        if has_side_effects(ast, child):
            return False
        if not _operand_swap_safe(ast, child, prec):
            return False
    return True


_VALIDATORS = {
    TransformRule.ASSIGN_SPLIT: _assign_split_valid,
    TransformRule.COMPOUND_ASSIGN_SPLIT: _compound_assign_split_valid,
    TransformRule.WHILE_TO_FOR: _while_to_for_valid,
    TransformRule.FOR_TO_WHILE: _for_to_while_valid,
    TransformRule.COND_NEGATE: _cond_negate_valid,
    TransformRule.COND_SPLIT_AND: _cond_split_and_valid,
    TransformRule.COND_SPLIT_OR: _cond_split_or_valid,
    TransformRule.COND_REORDER: _cond_reorder_valid,
}

CONSTRAINT_SETS = {
    TransformRule.ASSIGN_SPLIT: ConstraintSet(
        TransformRule.ASSIGN_SPLIT,
        ("simple-assignment-statement", "rhs-two-or-more-binary-ops",
         "operands-atomic", "rhs-side-effect-free",
         "lhs-promotion-stable-integer", "operand-types-match-lhs",
         "fresh-temporaries-available")),
    TransformRule.COMPOUND_ASSIGN_SPLIT: ConstraintSet(
        TransformRule.COMPOUND_ASSIGN_SPLIT,
        ("compound-assignment-statement", "lvalue-single-evaluation-safe")),
    TransformRule.WHILE_TO_FOR: ConstraintSet(
        TransformRule.WHILE_TO_FOR, ("target-is-while",)),
    TransformRule.FOR_TO_WHILE: ConstraintSet(
        TransformRule.FOR_TO_WHILE, ("target-is-for", "no-own-continue")),
    TransformRule.COND_NEGATE: ConstraintSet(
        TransformRule.COND_NEGATE, ("else-branch-present",
                                    "branches-label-free")),
    TransformRule.COND_SPLIT_AND: ConstraintSet(
        TransformRule.COND_SPLIT_AND,
        ("top-level-and", "branches-label-free-when-else",
         "else-duplication-safe")),
    TransformRule.COND_SPLIT_OR: ConstraintSet(
        TransformRule.COND_SPLIT_OR,
        ("top-level-or", "then-duplication-safe")),
    TransformRule.COND_REORDER: ConstraintSet(
        TransformRule.COND_REORDER,
        ("comparison-in-if-condition", "operands-side-effect-free",
         "operands-precedence-safe")),
}


def constraints_valid(ast: Ast, site: Site) -> bool:
    """True iff applying site.rule at site.node_id is compilable and
    semantics-preserving under this catalog (pure function)."""
    if site.rule in EXTRA_RULES:
        return EXTRA_RULES[site.rule][1](ast, site.node_id)
    return _VALIDATORS[site.rule](ast, site.node_id)


def valid_sites(ast: Ast, rule) -> list[Site]:
    return [s for s in candidate_nodes(ast, rule) if constraints_valid(ast, s)]
