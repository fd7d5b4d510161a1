import pytest

from cmorph.analysis import (CONSTRAINT_SETS, Site, candidate_nodes,
                             comparison_operands_typed, constraints_valid,
                             declared_integer_type, has_side_effects,
                             hoistable_update, valid_sites)
from cmorph.parser import parse_text
from cmorph.rules import ALL_RULES, TransformRule as R


def node_of(ast, kind, op=None, index=0):
    hits = [n.id for n in ast.nodes
            if n.kind == kind and (op is None or n.op == op)]
    return hits[index]


# --- purity

def test_pure_arithmetic():
    ast = parse_text("int f() { y = a + b * 2; }")
    add = node_of(ast, "BinaryExpr", "+")
    assert not has_side_effects(ast, add)


def test_call_is_impure():
    ast = parse_text("int f() { if (g() < x) y = 1; }")
    lt = node_of(ast, "BinaryExpr", "<")
    assert has_side_effects(ast, lt)


def test_increment_is_impure():
    ast = parse_text("int f() { y = i++; }")
    inc = node_of(ast, "UnaryExpr", "++")
    assert has_side_effects(ast, inc)


def test_opaque_is_conservatively_impure():
    ast = parse_text("int f() { { typedef int T; } }")
    block = node_of(ast, "CompoundStmt", index=1)
    assert has_side_effects(ast, block)


def test_purity_over_kind_grid():
    # every writing/calling kind flips purity; every pure kind does not
    impure = ["a = 1", "a += 1", "a++", "--a", "g(a)"]
    pure = ["a + b", "a < b", "!a", "a ? b : c", "p->x", "v[3]", "(a)",
            "a, b"]
    for text in impure:
        ast = parse_text(f"int f() {{ y = ({text}) + 0; }}")
        root_expr = node_of(ast, "AssignExpr")
        assert has_side_effects(ast, root_expr), text
    for text in pure:
        ast = parse_text(f"int f() {{ if ({text}) {{ }} }}")
        cond = ast.nodes[node_of(ast, "IfStmt")].children[0]
        assert not has_side_effects(ast, cond), text


# --- declared types

def test_declared_type_local_and_param():
    ast = parse_text("int f(unsigned long n) { int x; x = 1; return x; }")
    assert declared_integer_type(ast, "x") == "int"
    assert declared_integer_type(ast, "n") == "unsigned long"


def test_declared_type_unknown_cases():
    ast = parse_text("int f(int *p, float r) { s = 1; char c; }")
    assert declared_integer_type(ast, "s") is None      # undeclared
    assert declared_integer_type(ast, "p") is None      # pointer
    assert declared_integer_type(ast, "r") is None      # floating
    assert declared_integer_type(ast, "c") == "char"


def test_declared_type_conflicting_shadow():
    ast = parse_text("int f() { int x; { long x; } return 0; }")
    assert declared_integer_type(ast, "x") is None


# --- candidate sites

def test_candidates_strictly_increasing():
    src = """int f(int a, int b) {
        if (a >= 0) { a = 1; }
        while (a < b) { a++; }
        if (b <= 0 && a == 1) { b = 2; }
        a += 3;
        return a + b;
    }"""
    ast = parse_text(src)
    for rule in ALL_RULES:
        ordinals = [s.ordinal for s in candidate_nodes(ast, rule)]
        assert ordinals == sorted(set(ordinals)), rule


def test_cond_reorder_three_sites():
    src = """int f(int err, int x, int ady) {
        if (err >= 0) { x = 1; }
        if (x <= 0) { x = 2; }
        if (err + ady >= 0) { x = 3; }
        return x;
    }"""
    ast = parse_text(src)
    sites = valid_sites(ast, R.COND_REORDER)
    assert [ast.text_of(s.node_id) for s in sites] == \
        ["err >= 0", "x <= 0", "err + ady >= 0"]


def test_cond_reorder_rejects_side_effects():
    ast = parse_text("int f(int x) { if (g() < x) { x = 1; } return x; }")
    cands = candidate_nodes(ast, R.COND_REORDER)
    assert len(cands) == 1
    assert not constraints_valid(ast, cands[0])


def test_cond_reorder_rejects_unparenthesized_chain():
    ast = parse_text("int f(int a,int b,int c) { if (a < b < c) { a=1; } return a; }")
    valid = valid_sites(ast, R.COND_REORDER)
    # only the inner a < b is swap-safe; the outer chain is not
    assert [ast.text_of(s.node_id) for s in valid] == ["a < b"]


def test_while_to_for_no_loops():
    ast = parse_text("int f(int a) { return a; }")
    assert candidate_nodes(ast, R.WHILE_TO_FOR) == []


def test_compound_assign_two_sites_in_order():
    ast = parse_text("int f(int i,int j) { i += 1; j <<= 2; return i+j; }")
    sites = candidate_nodes(ast, R.COMPOUND_ASSIGN_SPLIT)
    assert [ast.text_of(s.node_id) for s in sites] == ["i += 1;", "j <<= 2;"]
    assert all(constraints_valid(ast, s) for s in sites)


def test_compound_assign_rejects_impure_lvalue():
    ast = parse_text("int f(int *a, int i) { a[i++] += 1; return i; }")
    sites = candidate_nodes(ast, R.COMPOUND_ASSIGN_SPLIT)
    assert len(sites) == 1
    assert not constraints_valid(ast, sites[0])


def test_for_to_while_continue_blocks():
    ast = parse_text(
        "int f(int n,int a) { for (n = 0; n < 9; n++) { if (a) continue; } return n; }")
    sites = candidate_nodes(ast, R.FOR_TO_WHILE)
    assert len(sites) == 1
    assert not constraints_valid(ast, sites[0])


def test_for_to_while_nested_continue_is_fine():
    src = """int f(int n, int m) {
        for (n = 0; n < 5; n++) {
            while (m > 0) { m--; if (m == 2) continue; }
        }
        return n;
    }"""
    ast = parse_text(src)
    outer = [s for s in candidate_nodes(ast, R.FOR_TO_WHILE)]
    assert len(outer) == 1
    assert constraints_valid(ast, outer[0])


def test_hoistable_update_detection():
    ast = parse_text("int f(int i,int n,int s) { while (i < n) { s += i; i++; } return s; }")
    w = node_of(ast, "WhileStmt")
    upd = hoistable_update(ast, w)
    assert upd is not None and ast.text_of(upd) == "i++;"

    ast2 = parse_text("int f(int i,int n,int s) { while (i < n) { if (s) continue; i++; } return s; }")
    assert hoistable_update(ast2, node_of(ast2, "WhileStmt")) is None

    # trailing write not referenced by the condition is no update
    ast3 = parse_text("int f(int i,int n,int s) { while (i < n) { i++; s--; } return s; }")
    assert hoistable_update(ast3, node_of(ast3, "WhileStmt")) is None


def test_cond_negate_requires_else():
    ast = parse_text("int f(int x) { if (x == 0) { x = 1; } return x; }")
    sites = candidate_nodes(ast, R.COND_NEGATE)
    assert len(sites) == 1
    assert not constraints_valid(ast, sites[0])


def test_cond_negate_rejects_labels_in_branches():
    ast = parse_text(
        "int f(int x) { if (x == 0) { L: x = 1; } else { x = 2; } goto L; }")
    sites = candidate_nodes(ast, R.COND_NEGATE)
    assert not constraints_valid(ast, sites[0])


def test_split_and_label_in_then_blocks_only_else_form():
    with_else = parse_text(
        "int f(int a,int b) { if (a && b) { L: a = 1; } else { a = 2; } goto L; }")
    s1 = candidate_nodes(with_else, R.COND_SPLIT_AND)
    assert len(s1) == 1 and not constraints_valid(with_else, s1[0])

    no_else = parse_text(
        "int f(int a,int b) { if (a && b) { L: a = 1; } goto L; }")
    s2 = candidate_nodes(no_else, R.COND_SPLIT_AND)
    assert len(s2) == 1 and constraints_valid(no_else, s2[0])


def test_split_or_label_in_then_always_blocks():
    ast = parse_text(
        "int f(int a,int b) { if (a || b) { L: a = 1; } goto L; }")
    sites = candidate_nodes(ast, R.COND_SPLIT_OR)
    assert len(sites) == 1 and not constraints_valid(ast, sites[0])


def test_split_and_rejects_static_in_duplicated_else():
    ast = parse_text(
        "int f(int a,int b) { if (a && b) { a = 1; } else { static int k; k++; } return a; }")
    sites = candidate_nodes(ast, R.COND_SPLIT_AND)
    assert len(sites) == 1 and not constraints_valid(ast, sites[0])


def test_assign_split_thresholds():
    ok = parse_text("int f(int a,int b,int c) { int x; x = a + b * c; return x; }")
    assert len(valid_sites(ok, R.ASSIGN_SPLIT)) == 1

    too_simple = parse_text("int f(int a,int b) { int x; x = a + b; return x; }")
    assert valid_sites(too_simple, R.ASSIGN_SPLIT) == []

    call_operand = parse_text(
        "int f(int a,int b,int c) { int x; x = g(a) + b * c; return x; }")
    assert valid_sites(call_operand, R.ASSIGN_SPLIT) == []


def test_assign_split_requires_matching_types():
    mixed = parse_text(
        "int f(long a,int b,int c) { int x; x = a + b * c; return x; }")
    assert valid_sites(mixed, R.ASSIGN_SPLIT) == []
    narrow = parse_text(
        "char f(char a,char b,char c) { char x; x = a + b * c; return x; }")
    assert valid_sites(narrow, R.ASSIGN_SPLIT) == []
    unsigned = parse_text(
        "unsigned f(unsigned a,unsigned b,unsigned c) { unsigned x; x = a + b * c; return x; }")
    assert len(valid_sites(unsigned, R.ASSIGN_SPLIT)) == 1


def test_comparison_operands_typed():
    ast = parse_text("int f(int x) { if (x == 0) { x = 1; } else { x = 2; } return x; }")
    cmp_id = node_of(ast, "BinaryExpr", "==")
    assert comparison_operands_typed(ast, cmp_id)
    ast2 = parse_text("int f(float x) { if (x < 0) { g(); } else { h(); } }")
    lt = node_of(ast2, "BinaryExpr", "<")
    assert not comparison_operands_typed(ast2, lt)


def test_constraint_stability():
    ast = parse_text("int f(int a,int b) { if (a >= b) { a = 1; } return a; }")
    site = candidate_nodes(ast, R.COND_REORDER)[0]
    assert constraints_valid(ast, site) == constraints_valid(ast, site)


def test_every_rule_has_constraint_set():
    assert set(CONSTRAINT_SETS) == set(ALL_RULES)
    for rule, cs in CONSTRAINT_SETS.items():
        assert cs.rule is rule and cs.predicates
