"""Bundled C fixture corpora.

DIFF_SUITE functions are self-contained and driver-compatible: integer
scalar/array parameters only, every loop's trip count clamped so boundary
inputs terminate, no division or shift hazards. They jointly cover all
eight rules and both composition modes.

ATTACK_CORPUS is the 25-sample synthetic corpus for the attack loop. The
built-in pattern detector with ATTACK_PATTERN flags a sample vulnerable
iff the pattern text survives in the source; condition reordering is the
only rule able to rewrite it when it sits in an if condition.
"""

DIFF_SUITE = [
    ("reorder_trio", """\
int reorder_trio(int err, int x, int ady) {
    int r = 0;
    if (err >= 0) { r = 1; }
    if (x <= 0) { r = r + 2; }
    if (err + ady >= 0) { r = r + 10; }
    return r;
}
"""),
    ("calc", """\
int calc(int a, int b, int c) {
    int x;
    x = a + b * c;
    return x;
}
"""),
    ("calc_parens", """\
long calc_parens(long a, long b, long c) {
    long x = 0;
    x = (a + b) * c - a;
    return x;
}
"""),
    ("acc", """\
unsigned acc(unsigned i, unsigned n) {
    i += 1;
    n <<= 2;
    i *= 3;
    return i + n;
}
"""),
    ("sum_below", """\
long sum_below(long i, long n) {
    long s = 0;
    if (i < 0) { i = 0; }
    if (n > 50) { n = 50; }
    while (i < n) { s += i; i++; }
    return s;
}
"""),
    ("skip_odd", """\
int skip_odd(int n) {
    int i = 0, s = 0;
    if (n > 40) { n = 40; }
    while (i < n) {
        i++;
        if (i % 2) continue;
        s += i;
    }
    return s;
}
"""),
    ("count_up", """\
int count_up(int n) {
    int sum = 0, i;
    if (n > 100) { n = 100; }
    for (i = 0; i < n; i++) sum += i;
    return sum;
}
"""),
    ("count_decl", """\
int count_decl(int n) {
    int sum = 0;
    if (n > 60) { n = 60; }
    for (int i = 0; i < n; i++) { sum += i; }
    return sum;
}
"""),
    ("spin_empty", """\
int spin_empty(int n) {
    int k = 0;
    for (;;) {
        k++;
        if (k > 5) break;
    }
    return k + n;
}
"""),
    ("negate_mirror", """\
int negate_mirror(int x) {
    int r;
    if (x == 0) { r = 7; } else { r = 9; }
    return r;
}
"""),
    ("negate_wrap", """\
int negate_wrap(int p, int q) {
    int r;
    if (p && q) { r = 1; } else { r = 0; }
    return r;
}
"""),
    ("gate_and", """\
int gate_and(int a, int b) {
    if (a && b) { return 3; } else { return 4; }
}
"""),
    ("gate_and_open", """\
int gate_and_open(int a, int b) {
    int r = 0;
    if (a > 0 && b > 0) { r = a; }
    return r;
}
"""),
    ("gate_or", """\
int gate_or(int a, int b) {
    int r = 0;
    if (a || b) { r = 1; } else { r = 2; }
    return r;
}
"""),
    ("gate_or_open", """\
int gate_or_open(int a, int b) {
    int r = 5;
    if (a < 0 || b < 0) { r = 6; }
    return r;
}
"""),
    ("nested_clamp", """\
int nested_clamp(int n, int m) {
    int total = 0;
    if (n > 8) { n = 8; }
    if (m > 8) { m = 8; }
    for (int i = 0; i < n; i++) {
        int j = 0;
        while (j < m) { total += i * j; j++; }
    }
    return total;
}
"""),
    ("switcher", """\
int switcher(int k) {
    int r = 0;
    switch (k % 3) {
    case 0:
        r = 10;
        break;
    case 1:
        r = 20;
        break;
    default:
        r = 30;
    }
    return r + k % 3;
}
"""),
    ("do_spin", """\
int do_spin(int n) {
    int i = 0;
    if (n > 30) { n = 30; }
    do { i++; } while (i < n);
    return i;
}
"""),
    ("goto_retry", """\
int goto_retry(int n) {
    int tries = 0;
retry:
    tries++;
    if (tries < 3 && n > 0) goto retry;
    return tries;
}
"""),
    ("addr_mix", """\
int addr_mix(int v) {
    int x = v;
    int *p = &x;
    *p = *p + 1;
    if (x > 0) { x = x - 1; }
    return x;
}
"""),
    ("straight", """\
int straight(int a, int b) {
    int u = a;
    int v = b;
    int w;
    w = u + v * 2;
    return w;
}
"""),
    ("deep_expr", """\
int deep_expr(int a, int b, int c, int d) {
    int r;
    r = a + b * c - d / 2;
    r = r + a * b + c;
    return r;
}
"""),
    ("mixed_sites", """\
int mixed_sites(int a, int b, int n) {
    int s = 0;
    if (n > 20) { n = 20; }
    if (a >= 0 && b >= 0) { s = 1; } else { s = 2; }
    while (n > 0) { s += a; n--; }
    s = s + a * b;
    return s;
}
"""),
    ("ternary_pick", """\
int ternary_pick(int c, int x) {
    int r = c ? x : 0 - x;
    if (r < 0) { r = 0 - r; }
    return r;
}
"""),
    ("array_sum", """\
int array_sum(int *a) {
    int s = 0;
    int i;
    for (i = 0; i < 8; i++) { s += a[i]; }
    return s;
}
"""),
    ("array_scale", """\
void array_scale(int *a, int k) {
    int i = 0;
    while (i < 8) { a[i] *= 2; a[i] += k % 5; i++; }
}
"""),
]

# pattern survives only outside reorderable if conditions
ATTACK_PATTERN = r"err >= 0"


def _evadable(i: int) -> str:
    return f"""\
int route_{i}(int err, int n) {{
    int r = {i};
    if (err >= 0) {{ r = r + 1; }}
    r = r + n * 2 + {i};
    return r;
}}
"""


def _stubborn(i: int) -> str:
    # the pattern text sits in an assignment, where no rule touches it
    return f"""\
int flag_{i}(int err, int n) {{
    int x;
    x = err >= 0;
    return x + n + {i};
}}
"""


def _benign_matching(i: int) -> str:
    return f"""\
int audit_{i}(int err) {{
    int ok = 0;
    if (err >= 0) {{ ok = 1; }}
    return ok + {i};
}}
"""


def _benign_clean(i: int) -> str:
    return f"""\
int plain_{i}(int v) {{
    int w = v + {i};
    return w;
}}
"""


def build_attack_corpus() -> list[dict]:
    """25 samples: 10 evadable true positives, 5 stubborn true positives,
    5 matching benign (false positives), 5 clean benign."""
    records = []
    for i in range(10):
        records.append({"idx": i, "func": _evadable(i), "target": 1})
    for i in range(5):
        records.append({"idx": 10 + i, "func": _stubborn(i), "target": 1})
    for i in range(5):
        records.append({"idx": 15 + i, "func": _benign_matching(i),
                        "target": 0})
    for i in range(5):
        records.append({"idx": 20 + i, "func": _benign_clean(i), "target": 0})
    return records


def build_basic_corpus() -> list[dict]:
    return [{"idx": i, "func": src, "target": 1}
            for i, (_, src) in enumerate(DIFF_SUITE)]


# Hand-counted Halstead oracles: (source, N, eta) with V = N * log2(eta).
# Operator/operand derivations:
#   P1  ops: funcdef, return (N1=2, eta1=2)
#       operands: f, 0 (N2=2, eta2=2)
#   P2  ops: funcdef, return, + (N1=3, eta1=3)
#       operands: add, a, b, a, b (N2=5, eta2=3)
#   P3  ops: funcdef, if, >, return, return (N1=5, eta1=4)
#       operands: max, a, b, a, b, a, b (N2=7, eta2=3)
#   P4  ops: funcdef, int, int, = (decl init), for, = (for init), <, ++,
#            +=, return (N1=10, eta1=8)
#       operands: loop, n, s, 0, i, i, 0, i, n, i, s, i, s (N2=13, eta2=5)
#   P5  ops: funcdef, return, ?:, unary- (N1=4, eta1=4)
#       operands: pick, c, x, c, x, x (N2=6, eta2=3)
HALSTEAD_MICROS = [
    ("int f(){return 0;}", 4, 4),
    ("int add(int a, int b) { return a + b; }", 8, 6),
    ("int max(int a, int b) { if (a > b) { return a; } return b; }", 12, 7),
    ("int loop(int n) { int s = 0; int i; "
     "for (i = 0; i < n; i++) { s += i; } return s; }", 23, 13),
    ("int pick(int c, int x) { return c ? x : -x; }", 10, 7),
]

CYCLOMATIC_MICROS = [
    ("int f(int a){ int b = a + 1; return b; }", 1),
    ("int f(int a,int b){ if (a && b) { s(); } return 0; }", 3),
    ("int f(int a,int b,int c){ int x; if (a) x=1; else if (b) x=2; "
     "x = c ? 1 : 2; return x; }", 4),
    ("int loop(int n) { int s = 0; int i; "
     "for (i = 0; i < n; i++) { s += i; } return s; }", 2),
    ("int f(int a,int b,int x){ while (a || b) { a--; } "
     "switch(x){ case 1: return 1; case 2: return 2; default: return 0; } }",
     5),
]
