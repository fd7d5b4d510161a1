"""Code property graph: AST edges + statement-level CFG + def-use chains.

AST edges mirror the parse tree. CFG edges run between statement-granularity
nodes (conditions live on their control statement's node) from a synthetic
entry to a synthetic exit. DUC edges connect a statement defining a variable
to a statement using it, computed by a reaching-definitions fixpoint.

Conventions (normative for this artifact's deltas):
  - average degree = 2 * |edges| / |nodes|, entry/exit nodes included;
  - address-taken variables receive conservative weak definitions at every
    call site and pointer store;
  - a for statement is a single CFG node carrying its init/cond/update
    defs and uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .parser import Ast

AST_EDGE = "AST"
CFG_EDGE = "CFG"
DUC_EDGE = "DUC"

_LOOPS = ("WhileStmt", "ForStmt", "DoWhileStmt")
_INC_DEC = ("++", "--")


class UnresolvedGoto(Exception):
    """A goto targets a label that does not exist in the function."""


@dataclass
class Cpg:
    ast: Ast
    edges: list[tuple[int, int, str]]
    entry: int
    exit: int
    unreachable: set[int] = field(default_factory=set)

    @property
    def node_count(self) -> int:
        return len(self.ast.nodes) + 2  # + entry/exit

    def edge_count(self, kind: Optional[str] = None) -> int:
        if kind is None:
            return len(self.edges)
        return sum(1 for e in self.edges if e[2] == kind)

    def average_degree(self) -> float:
        return 2.0 * len(self.edges) / self.node_count

    def successors(self, nid: int) -> list[int]:
        return [d for s, d, k in self.edges if k == CFG_EDGE and s == nid]


@dataclass
class GraphDelta:
    node_delta: int
    edge_deltas: dict[str, int]
    degree_before: float
    degree_after: float

    @property
    def degree_percent_change(self) -> Optional[float]:
        if self.degree_before <= 0:
            return None
        return (self.degree_after - self.degree_before) \
            / self.degree_before * 100.0

    def to_dict(self) -> dict:
        return {
            "node_delta": self.node_delta,
            "edge_deltas": self.edge_deltas,
            "degree_before": self.degree_before,
            "degree_after": self.degree_after,
            "degree_percent_change": self.degree_percent_change,
        }


# ---------------------------------------------------------------------------
# CFG construction

class _CfgBuilder:
    def __init__(self, ast: Ast):
        self.ast = ast
        self.edges: set[tuple[int, int]] = set()
        self.labels: dict[str, int] = {}
        self.gotos: list[tuple[int, str]] = []

    def add(self, src: int, dst: int) -> None:
        self.edges.add((src, dst))

    def collect_labels(self) -> None:
        for nid in self.ast.find("LabelStmt"):
            name = self.ast.text_of(self.ast.nodes[nid].children[0])
            self.labels[name] = nid

    def link_seq(self, stmts: list[int], brk: Optional[list[int]],
                 cont: Optional[int],
                 exit_node: int) -> tuple[Optional[int], list[int]]:
        """Wire a statement sequence; returns (first node, open exits)."""
        first: Optional[int] = None
        open_exits: list[int] = []
        for s in stmts:
            entry, outs = self.link_stmt(s, brk, cont, exit_node)
            if entry is None:
                continue
            if first is None:
                first = entry
            for o in open_exits:
                self.add(o, entry)
            open_exits = outs
        return first, open_exits

    def link_stmt(self, nid: int, brk: Optional[list[int]],
                  cont: Optional[int],
                  exit_node: int) -> tuple[Optional[int], list[int]]:
        """Returns (entry node, fall-through exits) of one statement.

        `brk` is a sink list owned by the innermost loop/switch: break
        nodes land there and become that construct's open exits.
        """
        ast = self.ast
        n = ast.nodes[nid]
        kind = n.kind
        if kind == "CompoundStmt":
            first, outs = self.link_seq(n.children, brk, cont, exit_node)
            if first is None:
                return None, []  # empty block: transparent
            return first, outs
        if kind == "IfStmt":
            cond = nid
            then_entry, then_outs = self.link_stmt(n.children[1], brk, cont,
                                                   exit_node)
            outs: list[int] = []
            if then_entry is not None:
                self.add(cond, then_entry)
                outs.extend(then_outs)
            else:
                outs.append(cond)
            if len(n.children) == 3:
                else_entry, else_outs = self.link_stmt(n.children[2], brk,
                                                       cont, exit_node)
                if else_entry is not None:
                    self.add(cond, else_entry)
                    outs.extend(else_outs)
                else:
                    outs.append(cond)
            else:
                outs.append(cond)
            return cond, outs
        if kind in ("WhileStmt", "ForStmt"):
            body = n.children[-1]
            breaks: list[int] = []
            body_entry, body_outs = self.link_stmt(body, breaks, nid,
                                                   exit_node)
            if body_entry is not None:
                self.add(nid, body_entry)
                for o in body_outs:
                    self.add(o, nid)  # back edge
            else:
                self.add(nid, nid)
            return nid, [nid] + breaks  # loop-exit edge + breaks
        if kind == "DoWhileStmt":
            breaks = []
            body_entry, body_outs = self.link_stmt(n.children[0], breaks,
                                                   nid, exit_node)
            if body_entry is None:
                return nid, [nid]
            for o in body_outs:
                self.add(o, nid)
            self.add(nid, body_entry)  # back edge
            return body_entry, [nid] + breaks
        if kind == "SwitchStmt":
            body = n.children[1]
            cases = [c for c in ast.walk(body)
                     if ast.nodes[c].kind == "CaseLabel"
                     and self._owning_switch(c) == nid]
            breaks = []
            _, body_outs = self.link_stmt(body, breaks, cont, exit_node)
            outs = list(body_outs) + breaks
            has_default = False
            for c in cases:
                self.add(nid, c)
                if ast.nodes[c].op == "default":
                    has_default = True
            if not cases or not has_default:
                outs.append(nid)
            # statements before the first case label stay unreachable
            return nid, outs
        if kind == "CaseLabel":
            stmt = n.children[-1]
            entry, outs = self.link_stmt(stmt, brk, cont, exit_node)
            if entry is not None:
                self.add(nid, entry)
                return nid, outs
            return nid, [nid]
        if kind == "LabelStmt":
            stmt = n.children[1]
            entry, outs = self.link_stmt(stmt, brk, cont, exit_node)
            if entry is not None:
                self.add(nid, entry)
                return nid, outs
            return nid, [nid]
        if kind == "ReturnStmt":
            self.add(nid, exit_node)
            return nid, []
        if kind == "BreakStmt":
            if brk is None:
                self.add(nid, exit_node)  # malformed C; keep the graph total
            else:
                brk.append(nid)
            return nid, []
        if kind == "ContinueStmt":
            self.add(nid, cont if cont is not None else exit_node)
            return nid, []
        if kind == "GotoStmt":
            name = self.ast.text_of(n.children[0])
            self.gotos.append((nid, name))
            return nid, []
        if kind in ("DeclStmt", "ExprStmt", "OpaqueStmt"):
            return nid, [nid]
        # expression node reached directly (should not happen)
        return nid, [nid]

    def _owning_switch(self, case_id: int) -> Optional[int]:
        parents = self._parents
        cur = case_id
        while cur in parents:
            cur = parents[cur]
            if self.ast.nodes[cur].kind == "SwitchStmt":
                return cur
            if self.ast.nodes[cur].kind == "FunctionDef":
                return None
        return None

    def build(self) -> tuple[set[tuple[int, int]], int, int]:
        ast = self.ast
        self._parents = ast.parent_map()
        self.collect_labels()
        entry = len(ast.nodes)
        exit_node = entry + 1
        body = ast.nodes[ast.root].children[2]
        first, outs = self.link_stmt(body, None, None, exit_node)
        if first is None:
            self.add(entry, exit_node)
        else:
            self.add(entry, first)
            for o in outs:
                self.add(o, exit_node)
        for src, name in self.gotos:
            if name not in self.labels:
                raise UnresolvedGoto(name)
            self.add(src, self.labels[name])
        return self.edges, entry, exit_node


# ---------------------------------------------------------------------------
# defs / uses per CFG node

def _lvalue_root(ast: Ast, nid: int) -> Optional[str]:
    """Base identifier written through an lvalue, or None."""
    n = ast.nodes[nid]
    while n.kind in ("IndexExpr", "MemberExpr") or \
            (n.kind == "UnaryExpr" and n.op in ("*", "()")):
        n = ast.nodes[n.children[0]]
    return ast.text_of(n.id) if n.kind == "Identifier" else None


def _expr_defs_uses(ast: Ast, root: int) -> tuple[set[str], set[str], bool,
                                                  bool]:
    """(strong defs, uses, has_call, has_pointer_store) over an expression
    or statement-header subtree."""
    defs: set[str] = set()
    uses: set[str] = set()
    has_call = False
    ptr_store = False
    skip_use: set[int] = set()
    order = list(ast.walk(root))
    for nid in order:
        n = ast.nodes[nid]
        if n.kind in ("AssignExpr", "CompoundAssignExpr"):
            lhs = n.children[0]
            name = _lvalue_root(ast, lhs)
            if name is not None:
                defs.add(name)
                if ast.nodes[lhs].kind == "Identifier" and \
                        n.kind == "AssignExpr":
                    skip_use.add(lhs)  # pure store, not a read
                if ast.nodes[lhs].kind == "UnaryExpr" and \
                        ast.nodes[lhs].op == "*":
                    ptr_store = True
        elif n.kind == "UnaryExpr" and n.op in _INC_DEC:
            name = _lvalue_root(ast, n.children[0])
            if name is not None:
                defs.add(name)
        elif n.kind == "CallExpr":
            has_call = True
            skip_use.add(n.children[0])  # callee name is not a data use
    for nid in order:
        n = ast.nodes[nid]
        if n.kind == "Identifier" and nid not in skip_use:
            uses.add(ast.text_of(nid))
    return defs, uses, has_call, ptr_store


def _node_defs_uses(ast: Ast, nid: int) -> tuple[set[str], set[str], bool,
                                                 bool]:
    n = ast.nodes[nid]
    kind = n.kind
    if kind == "DeclStmt":
        defs: set[str] = set()
        uses: set[str] = set()
        call = False
        ptr = False
        for c in n.children:
            cn = ast.nodes[c]
            if cn.kind == "AssignExpr":  # initialized declarator
                name_id, init = cn.children
                defs.add(ast.text_of(name_id))
                d, u, hc, ps = _expr_defs_uses(ast, init)
                defs |= d
                uses |= u
                call |= hc
                ptr |= ps
        return defs, uses, call, ptr
    if kind == "ExprStmt":
        return _expr_defs_uses(ast, n.children[0])
    if kind == "IfStmt" or kind == "WhileStmt" or kind == "DoWhileStmt" or \
            kind == "SwitchStmt":
        cond = n.children[0] if kind != "DoWhileStmt" else n.children[1]
        return _expr_defs_uses(ast, cond)
    if kind == "ForStmt":
        defs: set[str] = set()
        uses: set[str] = set()
        call = False
        ptr = False
        for c in n.children[:-1]:  # init / cond / update clauses
            if ast.nodes[c].kind == "DeclStmt":
                d, u, hc, ps = _node_defs_uses(ast, c)
            else:
                d, u, hc, ps = _expr_defs_uses(ast, c)
            defs |= d
            uses |= u
            call |= hc
            ptr |= ps
        return defs, uses, call, ptr
    if kind == "ReturnStmt" and n.children:
        return _expr_defs_uses(ast, n.children[0])
    if kind == "CaseLabel" and n.op != "default":
        return _expr_defs_uses(ast, n.children[0])
    return set(), set(), False, False


def _address_taken(ast: Ast) -> set[str]:
    out = set()
    for nid in ast.walk():
        n = ast.nodes[nid]
        if n.kind == "UnaryExpr" and n.op == "&":
            inner = ast.nodes[n.children[0]]
            if inner.kind == "Identifier":
                out.add(ast.text_of(inner.id))
    return out


# ---------------------------------------------------------------------------
# public construction

def build_cpg(ast: Ast) -> Cpg:
    edges: list[tuple[int, int, str]] = []
    for n in ast.nodes:
        for c in n.children:
            edges.append((n.id, c, AST_EDGE))

    builder = _CfgBuilder(ast)
    cfg_edges, entry, exit_node = builder.build()
    for s, d in sorted(cfg_edges):
        edges.append((s, d, CFG_EDGE))

    # reaching definitions over the CFG at statement granularity
    cfg_nodes = sorted({x for e in cfg_edges for x in e})
    succ: dict[int, list[int]] = {n: [] for n in cfg_nodes}
    pred: dict[int, list[int]] = {n: [] for n in cfg_nodes}
    for s, d in cfg_edges:
        succ[s].append(d)
        pred[d].append(s)

    taken = _address_taken(ast)
    info: dict[int, tuple[set[str], set[str]]] = {}
    gen: dict[int, set[tuple[str, int]]] = {}
    strong: dict[int, set[str]] = {}
    for nid in cfg_nodes:
        if nid in (entry, exit_node):
            info[nid] = (set(), set())
            gen[nid] = set()
            strong[nid] = set()
            continue
        defs, uses, has_call, ptr_store = _node_defs_uses(ast, nid)
        weak: set[str] = set()
        if has_call or ptr_store:
            weak |= taken  # conservative: writes may land anywhere aliased
        info[nid] = (defs | weak, uses)
        gen[nid] = {(v, nid) for v in defs | weak}
        strong[nid] = set(defs) - weak

    ins: dict[int, set[tuple[str, int]]] = {n: set() for n in cfg_nodes}
    outs: dict[int, set[tuple[str, int]]] = {n: set() for n in cfg_nodes}
    work = list(cfg_nodes)
    while work:
        n = work.pop()
        new_in = set()
        for p in pred[n]:
            new_in |= outs[p]
        kill = strong[n]
        new_out = gen[n] | {(v, d) for v, d in new_in if v not in kill}
        if new_in != ins[n] or new_out != outs[n]:
            ins[n] = new_in
            outs[n] = new_out
            work.extend(succ[n])

    duc: set[tuple[int, int]] = set()
    for nid in cfg_nodes:
        if nid in (entry, exit_node):
            continue
        _, uses = info[nid]
        for v, d in ins[nid]:
            if v in uses:
                duc.add((d, nid))
        # a node both defining and using a variable consumes incoming defs
        # (handled above); self-edges arise only via loops
    for s, d in sorted(duc):
        edges.append((s, d, DUC_EDGE))

    # reachability flags
    fwd = _reach(succ, entry)
    bwd = _reach(pred, exit_node)
    unreachable = {n for n in cfg_nodes
                   if n not in (entry, exit_node)
                   and (n not in fwd or n not in bwd)}
    return Cpg(ast, edges, entry, exit_node, unreachable)


def _reach(adj: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        cur = stack.pop()
        for nxt in adj.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def duc_pairs(cpg: Cpg) -> set[tuple[int, int]]:
    return {(s, d) for s, d, k in cpg.edges if k == DUC_EDGE}


def graph_diff(before: Cpg, after: Cpg) -> GraphDelta:
    kinds = (AST_EDGE, CFG_EDGE, DUC_EDGE)
    return GraphDelta(
        node_delta=after.node_count - before.node_count,
        edge_deltas={k: after.edge_count(k) - before.edge_count(k)
                     for k in kinds},
        degree_before=before.average_degree(),
        degree_after=after.average_degree(),
    )


# ---------------------------------------------------------------------------
# export

def to_json(cpg: Cpg) -> str:
    ast = cpg.ast
    nodes = [{"id": n.id, "kind": n.kind, "span": list(n.span)}
             for n in ast.nodes]
    nodes.append({"id": cpg.entry, "kind": "Entry", "span": [0, 0]})
    nodes.append({"id": cpg.exit, "kind": "Exit", "span": [0, 0]})
    edges = [{"src": s, "dst": d, "kind": k} for s, d, k in cpg.edges]
    return json.dumps({"nodes": nodes, "edges": edges}, indent=2)


def to_dot(cpg: Cpg) -> str:
    ast = cpg.ast
    colors = {AST_EDGE: "gray", CFG_EDGE: "blue", DUC_EDGE: "red"}
    lines = ["digraph cpg {", "  node [shape=box, fontsize=9];"]
    for n in ast.nodes:
        snippet = " ".join(ast.text_of(n.id).split())
        if len(snippet) > 24:
            snippet = snippet[:21] + "..."
        snippet = snippet.replace("\\", "\\\\").replace('"', '\\"')
        lines.append(f'  n{n.id} [label="{n.kind}\\n{snippet}"];')
    lines.append(f'  n{cpg.entry} [label="ENTRY", shape=oval];')
    lines.append(f'  n{cpg.exit} [label="EXIT", shape=oval];')
    for s, d, k in cpg.edges:
        lines.append(f'  n{s} -> n{d} [color={colors[k]}, label="{k}"];')
    lines.append("}")
    return "\n".join(lines)
