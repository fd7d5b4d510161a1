"""Seeded random generator of C functions within the supported subset.

Used by the round-trip tests: every generated function must parse, and
re-parsing must reproduce the same structure. Generation is deliberately
biased toward the statement/expression kinds the engine transforms.
"""

import random

_TYPES = ["int", "unsigned", "long", "unsigned long", "char", "short"]
_BIN_OPS = ["+", "-", "*", "/", "%", "<<", ">>", "&", "|", "^"]
_CMP_OPS = ["<", "<=", ">", ">=", "==", "!="]
_ASSIGN_OPS = ["+=", "-=", "*=", "&=", "|=", "^=", "<<=", ">>="]
_UNARY = ["-", "!", "~"]


class FunctionFuzzer:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.names = [f"v{i}" for i in range(6)]
        self.label_count = 0

    def expr(self, depth: int = 0) -> str:
        r = self.rng
        if depth > 3 or r.random() < 0.35:
            if r.random() < 0.6:
                return r.choice(self.names)
            return str(r.randint(0, 99))
        pick = r.random()
        a = self.expr(depth + 1)
        b = self.expr(depth + 1)
        if pick < 0.45:
            return f"{a} {r.choice(_BIN_OPS)} {b}"
        if pick < 0.6:
            return f"({a} {r.choice(_BIN_OPS)} {b})"
        if pick < 0.7:
            return f"{r.choice(_UNARY)}{a}" if not a[0].isdigit() \
                else f"{r.choice(_UNARY)}({a})"
        if pick < 0.8:
            return f"{a} {r.choice(_CMP_OPS)} {b}"
        if pick < 0.9:
            return f"{a} ? {b} : {self.expr(depth + 1)}"
        return f"g{r.randint(0, 2)}({a}, {b})"

    def cond(self, depth: int = 0) -> str:
        r = self.rng
        pick = r.random()
        if pick < 0.5:
            return f"{self.expr(2)} {r.choice(_CMP_OPS)} {self.expr(2)}"
        if pick < 0.7 and depth < 2:
            return f"{self.cond(depth + 1)} && {self.cond(depth + 1)}"
        if pick < 0.85 and depth < 2:
            return f"{self.cond(depth + 1)} || {self.cond(depth + 1)}"
        return r.choice(self.names)

    def statement(self, depth: int, in_loop: bool) -> str:
        r = self.rng
        pick = r.random()
        name = r.choice(self.names)
        if depth >= 3 or pick < 0.30:
            return f"{name} = {self.expr()};"
        if pick < 0.40:
            return f"{name} {r.choice(_ASSIGN_OPS)} {self.expr(2)};"
        if pick < 0.47:
            return f"{name}++;" if r.random() < 0.5 else f"--{name};"
        if pick < 0.62:
            body = self.block(depth + 1, in_loop)
            if r.random() < 0.5:
                return f"if ({self.cond()}) {body}"
            return (f"if ({self.cond()}) {body} "
                    f"else {self.block(depth + 1, in_loop)}")
        if pick < 0.72:
            return f"while ({self.cond()}) {self.block(depth + 1, True)}"
        if pick < 0.82:
            init = f"{name} = 0"
            return (f"for ({init}; {name} < {r.randint(1, 30)}; {name}++) "
                    f"{self.block(depth + 1, True)}")
        if pick < 0.86:
            return f"do {self.block(depth + 1, True)} while ({self.cond()});"
        if pick < 0.90 and in_loop:
            return r.choice(["break;", "continue;"])
        if pick < 0.94:
            return f"return {self.expr()};"
        if pick < 0.97:
            return f"{r.choice(_TYPES)} t{r.randint(10, 99)} = {self.expr(2)};"
        return (f"switch ({name}) {{ case {r.randint(0, 5)}: "
                f"{self.statement(depth + 1, in_loop)} break; "
                f"default: {self.statement(depth + 1, in_loop)} }}")

    def block(self, depth: int, in_loop: bool) -> str:
        n = self.rng.randint(1, 3 if depth else 5)
        stmts = " ".join(self.statement(depth, in_loop) for _ in range(n))
        return "{ " + stmts + " }"

    def function(self) -> str:
        r = self.rng
        params = ", ".join(f"{r.choice(_TYPES)} {n}"
                           for n in self.names[:r.randint(1, 4)])
        decls = " ".join(f"int {n} = 0;"
                         for n in self.names[r.randint(1, 4):])
        body = self.block(0, False)
        ret = r.choice(_TYPES)
        preamble = ""
        if r.random() < 0.2:
            preamble = "/* generated */\n#define FUZZ 1\n"
        return (f"{preamble}{ret} fn({params}) {{ {decls} {body[1:-1]} "
                f"return {self.expr(2)}; }}")


def generate(seed: int) -> str:
    return FunctionFuzzer(seed).function()


def shape(ast) -> list:
    """Structural fingerprint: kinds, ops, and tree layout (spans erased)."""
    def rec(nid):
        n = ast.nodes[nid]
        return [n.kind, n.op, [rec(c) for c in n.children]]
    return rec(ast.root)
