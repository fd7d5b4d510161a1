"""Code complexity metrics and edit-distance measurement.

Halstead classification (regression-locked; see README for the table):
  operators   binary/unary/assignment operator tokens, `?:` per ternary,
              one `()` per call, one `[]` per index, `.`/`->` per member
              access, `cast` per cast, the control keywords (if, else,
              while, do, for, switch, case, default, return, break,
              continue, goto), one occurrence of the declared base type
              per declaration, `funcdef` for the function definition, and
              `opaque` per opaque statement. Grouping parentheses are not
              operators.
  operands    every identifier and literal occurrence, distinct by text.

Cyclomatic complexity = 1 + decision points, where decision points are
if, while, for, do-while, each case label (default excluded), each
ternary, each `&&`, and each `||`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .cpg import build_cpg
from .parser import Ast, PAREN_OP, parse_text

_INC_DEC = ("++", "--")


def loc(text: str) -> int:
    """Lines containing at least one non-whitespace character."""
    return sum(1 for line in text.splitlines() if line.strip())


def _halstead_tokens(ast: Ast) -> tuple[list[str], list[str]]:
    operators: list[str] = []
    operands: list[str] = []
    for nid in ast.walk():
        n = ast.nodes[nid]
        kind = n.kind
        if kind == "Identifier":
            operands.append(ast.text_of(nid))
        elif kind == "Literal":
            operands.append(ast.text_of(nid))
        elif kind == "BinaryExpr":
            operators.append(n.op)
        elif kind in ("AssignExpr", "CompoundAssignExpr"):
            operators.append(n.op)
        elif kind == "UnaryExpr":
            if n.op != PAREN_OP:  # grouping parens are not operators
                operators.append(n.op)
        elif kind == "TernaryExpr":
            operators.append("?:")
        elif kind == "CallExpr":
            operators.append("()")
        elif kind == "IndexExpr":
            operators.append("[]")
        elif kind == "MemberExpr":
            operators.append(n.op)
        elif kind == "CastExpr":
            operators.append("cast")
        elif kind == "IfStmt":
            operators.append("if")
            if len(n.children) == 3:
                operators.append("else")
        elif kind == "WhileStmt":
            operators.append("while")
        elif kind == "DoWhileStmt":
            operators.append("do")
            operators.append("while")
        elif kind == "ForStmt":
            operators.append("for")
        elif kind == "SwitchStmt":
            operators.append("switch")
        elif kind == "CaseLabel":
            operators.append("default" if n.op == "default" else "case")
        elif kind == "ReturnStmt":
            operators.append("return")
        elif kind == "BreakStmt":
            operators.append("break")
        elif kind == "ContinueStmt":
            operators.append("continue")
        elif kind == "GotoStmt":
            operators.append("goto")
        elif kind == "DeclStmt":
            operators.append(n.type_text)
        elif kind == "FunctionDef":
            operators.append("funcdef")
        elif kind == "OpaqueStmt":
            operators.append("opaque")
    return operators, operands


def halstead_volume(ast: Ast) -> float:
    """V = N * log2(eta): N total, eta distinct operator+operand tokens."""
    operators, operands = _halstead_tokens(ast)
    n_total = len(operators) + len(operands)
    eta = len(set(operators)) + len(set(operands))
    if eta <= 1:
        return 0.0
    return n_total * math.log2(eta)


def cyclomatic(ast: Ast) -> int:
    decisions = 0
    for nid in ast.walk():
        n = ast.nodes[nid]
        if n.kind in ("IfStmt", "WhileStmt", "ForStmt", "DoWhileStmt",
                      "TernaryExpr"):
            decisions += 1
        elif n.kind == "CaseLabel" and n.op != "default":
            decisions += 1
        elif n.kind == "BinaryExpr" and n.op in ("&&", "||"):
            decisions += 1
    return 1 + decisions


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance; memory bounded to two rows."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev, cur = cur, prev
    return prev[len(b)]


@dataclass
class MetricsReport:
    loc: int
    halstead_volume: float
    cyclomatic_complexity: int
    avg_cpg_degree: float
    edit_distance: int
    loc_delta_pct: Optional[float] = None
    halstead_delta_pct: Optional[float] = None
    cyclomatic_delta_pct: Optional[float] = None
    degree_delta_pct: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "loc": self.loc,
            "halstead_volume": self.halstead_volume,
            "cyclomatic_complexity": self.cyclomatic_complexity,
            "avg_cpg_degree": self.avg_cpg_degree,
            "edit_distance": self.edit_distance,
            "loc_delta_pct": self.loc_delta_pct,
            "halstead_delta_pct": self.halstead_delta_pct,
            "cyclomatic_delta_pct": self.cyclomatic_delta_pct,
            "degree_delta_pct": self.degree_delta_pct,
        }


def _pct(after: float, before: float) -> Optional[float]:
    if before == 0:
        return None
    return (after - before) / before * 100.0


def report(reference_text: str, variant_text: str) -> MetricsReport:
    """All five measures of the variant plus percent deltas vs reference."""
    ref_ast = parse_text(reference_text)
    var_ast = parse_text(variant_text)
    ref = (loc(reference_text), halstead_volume(ref_ast), cyclomatic(ref_ast),
           build_cpg(ref_ast).average_degree())
    var = (loc(variant_text), halstead_volume(var_ast), cyclomatic(var_ast),
           build_cpg(var_ast).average_degree())
    return MetricsReport(
        loc=var[0],
        halstead_volume=var[1],
        cyclomatic_complexity=var[2],
        avg_cpg_degree=var[3],
        edit_distance=levenshtein(reference_text, variant_text),
        loc_delta_pct=_pct(var[0], ref[0]),
        halstead_delta_pct=_pct(var[1], ref[1]),
        cyclomatic_delta_pct=_pct(var[2], ref[2]),
        degree_delta_pct=_pct(var[3], ref[3]),
    )
