"""Black-box attack loop: detector queries, validation, evasion accounting.

Detector protocol (bit-exact): the detector process receives one JSON
object per line on stdin, `{"idx": <int>, "func": "<source>"}`, and must
write one `{"idx": <int>, "label": 0|1}` per request to stdout (1 =
vulnerable). Responses may arrive in any order; each idx must appear
exactly once. Only the binary label crosses the boundary: the wire format
physically cannot carry confidences. Detectors are assumed deterministic.

Built-in detectors (command strings, run in-process):
    builtin:echo               labels everything vulnerable
    builtin:pattern:<regex>    vulnerable iff the function text matches
"""

from __future__ import annotations

import json
import math
import os
import random
import re
import shutil
import subprocess
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analysis
from .composer import Variant
from .metrics import levenshtein
from .parser import Ast, ParseError, SourceUnit, param_entries, parse_text


class DetectorSpawnFailure(Exception):
    pass


class ProtocolViolation(Exception):
    pass


class DetectorTimeout(Exception):
    pass


class CompilerSpawnFailure(Exception):
    pass


class CompileFailure(Exception):
    pass


class ExecutionTimeout(Exception):
    pass


class EmptyReport(Exception):
    pass


class DriverIncompatible(Exception):
    """Function signature not representable by the harness driver."""


@dataclass(frozen=True)
class DetectorVerdict:
    idx: int
    label: str  # "vulnerable" | "nonvulnerable"

    @property
    def vulnerable(self) -> bool:
        return self.label == "vulnerable"


# ---------------------------------------------------------------------------
# detector queries

def _builtin_detector(spec: str, samples: Sequence[tuple[int, str]]
                      ) -> list[DetectorVerdict]:
    if spec == "echo":
        return [DetectorVerdict(idx, "vulnerable") for idx, _ in samples]
    if spec.startswith("pattern:"):
        pat = re.compile(spec[len("pattern:"):], re.DOTALL)
        return [DetectorVerdict(
            idx, "vulnerable" if pat.search(text) else "nonvulnerable")
            for idx, text in samples]
    raise DetectorSpawnFailure(f"unknown builtin detector {spec!r}")


def _spawn_batch(command: list[str], samples: Sequence[tuple[int, str]],
                 timeout: Optional[float]) -> list[str]:
    payload = "".join(json.dumps({"idx": idx, "func": text}) + "\n"
                      for idx, text in samples)
    try:
        proc = subprocess.Popen(command, stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE, text=True)
    except OSError as e:
        raise DetectorSpawnFailure(str(e))
    try:
        out, _ = proc.communicate(payload, timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
        raise DetectorTimeout(f"detector exceeded {timeout}s")
    lines = [ln for ln in out.splitlines() if ln.strip()]
    if proc.returncode != 0 and len(lines) < len(samples):
        raise ProtocolViolation(
            f"detector exited {proc.returncode} after incomplete output")
    return lines


def _parse_verdicts(lines: list[str], expected: Sequence[int]
                    ) -> list[DetectorVerdict]:
    got: dict[int, int] = {}
    for ln in lines:
        try:
            rec = json.loads(ln)
            idx, label = rec["idx"], rec["label"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ProtocolViolation(f"bad response line {ln!r}")
        if label not in (0, 1):
            raise ProtocolViolation(f"label {label!r} not in {{0, 1}}")
        if idx in got:
            raise ProtocolViolation(f"duplicate idx {idx}")
        got[idx] = label
    missing = [i for i in expected if i not in got]
    if missing:
        raise ProtocolViolation(f"missing verdicts for idx {missing[:5]}")
    extra = set(got) - set(expected)
    if extra:
        raise ProtocolViolation(f"unrequested idx {sorted(extra)[:5]}")
    return [DetectorVerdict(i, "vulnerable" if got[i] else "nonvulnerable")
            for i in expected]


def query_detector(command, samples: Sequence[tuple[int, str]], *,
                   timeout: Optional[float] = 300.0,
                   per_sample: bool = False) -> list[DetectorVerdict]:
    """Query a detector over the JSONL protocol; one retry on transient
    process failure. `command` is an argv list or a `builtin:` string."""
    if not samples:
        raise EmptyReport("no samples to query")
    if isinstance(command, str) and command.startswith("builtin:"):
        return _builtin_detector(command[len("builtin:"):], samples)
    if isinstance(command, str):
        command = command.split()
    batches = [[s] for s in samples] if per_sample else [list(samples)]
    out: list[DetectorVerdict] = []
    for batch in batches:
        expected = [idx for idx, _ in batch]
        try:
            lines = _spawn_batch(command, batch, timeout)
            out.extend(_parse_verdicts(lines, expected))
        except (ProtocolViolation, DetectorTimeout):
            # one retry for transient failures, then give up for real
            lines = _spawn_batch(command, batch, timeout)
            out.extend(_parse_verdicts(lines, expected))
    return out


def select_true_positives(corpus: Sequence[SourceUnit],
                          verdicts: Sequence[DetectorVerdict]
                          ) -> list[SourceUnit]:
    """Ground-truth-vulnerable samples the detector also flags."""
    by_idx = {v.idx: v for v in verdicts}
    out = []
    for unit in corpus:
        v = by_idx.get(int(unit.id))
        if unit.label == "vulnerable" and v is not None and v.vulnerable:
            out.append(unit)
    return out


# ---------------------------------------------------------------------------
# attack report

@dataclass(frozen=True)
class VariantOutcome:
    variant_idx: int
    rules: tuple[str, ...]
    depth: int
    edit_distance: int
    label: str

    @property
    def evaded(self) -> bool:
        return self.label == "nonvulnerable"


@dataclass
class SampleAttack:
    sample_idx: int
    outcomes: list[VariantOutcome] = field(default_factory=list)

    @property
    def evaded(self) -> bool:
        return any(o.evaded for o in self.outcomes)


@dataclass
class AttackReport:
    samples: list[SampleAttack] = field(default_factory=list)

    def single_rule_outcomes(self, rule_name: str) -> list[VariantOutcome]:
        return [o for s in self.samples for o in s.outcomes
                if o.depth == 1 and o.rules == (rule_name,)]

    def rule_names(self) -> list[str]:
        seen: list[str] = []
        for s in self.samples:
            for o in s.outcomes:
                if o.depth == 1 and o.rules[0] not in seen:
                    seen.append(o.rules[0])
        return seen

    def to_dict(self) -> dict:
        per_rule = {}
        for rule in self.rule_names():
            per_rule[rule] = {
                "evaded_samples": _rule_evasion_count(self, rule),
                "mean_edit_distance": _rule_mean_distance(self, rule),
            }
        eff = efficiency(self) if self.samples else {}
        for rule, val in eff.items():
            per_rule.setdefault(rule, {})["ier_cc"] = val
        return {
            "true_positives": len(self.samples),
            "evasion_rate": evasion_rate(self) if self.samples else None,
            "rule_ranking": rank_rules(self) if self.samples else [],
            "per_rule": per_rule,
            "samples": [{
                "idx": s.sample_idx,
                "evaded": s.evaded,
                "outcomes": [{
                    "variant_idx": o.variant_idx,
                    "rules": list(o.rules),
                    "depth": o.depth,
                    "edit_distance": o.edit_distance,
                    "label": o.label,
                } for o in s.outcomes],
            } for s in self.samples],
        }


def evasion_rate(report: AttackReport) -> float:
    """Fraction of true positives with at least one evading variant."""
    if not report.samples:
        raise EmptyReport("no true-positive samples in report")
    evaded = sum(1 for s in report.samples if s.evaded)
    return evaded / len(report.samples)


def _rule_evasion_count(report: AttackReport, rule_name: str) -> int:
    count = 0
    for s in report.samples:
        if any(o.evaded for o in s.outcomes
               if o.depth == 1 and o.rules == (rule_name,)):
            count += 1
    return count


def _rule_mean_distance(report: AttackReport, rule_name: str
                        ) -> Optional[float]:
    dists = [o.edit_distance for o in report.single_rule_outcomes(rule_name)]
    return sum(dists) / len(dists) if dists else None


def rank_rules(report: AttackReport) -> list[str]:
    """Rules by descending single-rule evasion count; ties break toward
    the lower mean edit distance (cheaper change wins)."""
    rules = report.rule_names()
    return sorted(rules, key=lambda r: (
        -_rule_evasion_count(report, r),
        _rule_mean_distance(report, r) or math.inf,
    ))


def efficiency(report: AttackReport) -> dict[str, float]:
    """Per rule: evasion-rate contribution (percentage points) per mean
    character of edit distance."""
    if not report.samples:
        raise EmptyReport("no true-positive samples in report")
    out: dict[str, float] = {}
    total = len(report.samples)
    for rule in report.rule_names():
        mean_dist = _rule_mean_distance(report, rule)
        if mean_dist is None or mean_dist == 0:
            continue  # zero-distance variants are impossible by invariant
        contribution = _rule_evasion_count(report, rule) / total * 100.0
        out[rule] = contribution / mean_dist
    return out


def run_attack(corpus: Sequence[SourceUnit], variants_by_sample: dict,
               detector_command, *, timeout: Optional[float] = 300.0,
               verdict_log: Optional[list] = None) -> AttackReport:
    """Score variants of true-positive samples against the detector.

    `variants_by_sample` maps sample idx -> list of (variant_idx, Variant).
    When given, `verdict_log` receives raw {idx, label} dicts for
    independent recounting.
    """
    batch: list[tuple[int, str]] = []
    meta: dict[int, tuple[int, Variant]] = {}
    texts = {int(u.id): u.text for u in corpus}
    for sample_idx, pairs in variants_by_sample.items():
        for variant_idx, variant in pairs:
            batch.append((variant_idx, variant.text))
            meta[variant_idx] = (sample_idx, variant)
    report = AttackReport([SampleAttack(i) for i in variants_by_sample])
    if not batch:
        return report
    verdicts = query_detector(detector_command, batch, timeout=timeout)
    by_sample = {s.sample_idx: s for s in report.samples}
    for v in verdicts:
        sample_idx, variant = meta[v.idx]
        if verdict_log is not None:
            verdict_log.append({"idx": v.idx, "parent_idx": sample_idx,
                                "rules": list(variant.rules),
                                "depth": variant.depth,
                                "label": 1 if v.vulnerable else 0})
        by_sample[sample_idx].outcomes.append(VariantOutcome(
            v.idx, variant.rules, variant.depth,
            levenshtein(texts[sample_idx], variant.text), v.label))
    return report


# ---------------------------------------------------------------------------
# compile validation

DEFAULT_COMPILER = ("cc", "-fsyntax-only", "-Wno-implicit-function-declaration",
                    "-x", "c")

_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


def _stub_declarations(text: str) -> str:
    """Best-effort `int name();` / `int name;` stubs for identifiers the
    function uses but neither declares nor finds in its preamble."""
    try:
        ast = parse_text(text)
    except ParseError:
        return ""
    declared = {ast.text_of(p.id) for p in param_entries(ast)}
    declared.add(ast.text_of(ast.nodes[ast.root].children[0]))
    for decl in ast.find("DeclStmt"):
        from .parser import decl_entries
        for name_id, _ in decl_entries(ast, decl):
            declared.add(ast.text_of(name_id))
    for nid in ast.find("LabelStmt"):
        declared.add(ast.text_of(ast.nodes[nid].children[0]))
    preamble_idents = set(_IDENT_RE.findall(ast.preamble()))
    called: set[str] = set()
    for nid in ast.find("CallExpr"):
        callee = ast.nodes[ast.nodes[nid].children[0]]
        if callee.kind == "Identifier":
            called.add(ast.text_of(callee.id))
    members = {ast.text_of(ast.nodes[nid].children[1])
               for nid in ast.find("MemberExpr")}
    used = {ast.text_of(nid) for nid in ast.walk()
            if ast.nodes[nid].kind == "Identifier"}
    unresolved = used - declared - preamble_idents - members
    lines = []
    for name in sorted(unresolved):
        lines.append(f"int {name}();" if name in called else f"int {name};")
    return "\n".join(lines) + ("\n" if lines else "")


def compile_unit_source(text: str) -> str:
    """Preamble + generated stubs + function, ready for syntax checking."""
    try:
        ast = parse_text(text)
    except ParseError:
        return text
    split = ast.nodes[ast.root].span[0]
    return text[:split] + _stub_declarations(text) + text[split:]


def compile_check(command, text: str, *, timeout: float = 30.0) -> bool:
    """True iff the external compiler accepts the (stubbed) unit."""
    if command is None:
        command = list(DEFAULT_COMPILER)
    elif isinstance(command, str):
        command = command.split()
    source = compile_unit_source(text)
    with tempfile.NamedTemporaryFile("w", suffix=".c", delete=False) as f:
        f.write(source)
        path = f.name
    try:
        proc = subprocess.run(list(command) + [path],
                              capture_output=True, timeout=timeout)
        return proc.returncode == 0
    except FileNotFoundError as e:
        raise CompilerSpawnFailure(str(e))
    except subprocess.TimeoutExpired:
        raise CompilerSpawnFailure(f"compiler exceeded {timeout}s")
    finally:
        os.unlink(path)


# ---------------------------------------------------------------------------
# differential testing

# LP64 widths; boundary inputs are {min, -1, 0, 1, max} per declared type
_INT_RANGES = {
    "char": (-128, 127),
    "signed char": (-128, 127),
    "unsigned char": (0, 255),
    "short": (-32768, 32767),
    "short int": (-32768, 32767),
    "unsigned short": (0, 65535),
    "int": (-2 ** 31, 2 ** 31 - 1),
    "signed": (-2 ** 31, 2 ** 31 - 1),
    "signed int": (-2 ** 31, 2 ** 31 - 1),
    "unsigned": (0, 2 ** 32 - 1),
    "unsigned int": (0, 2 ** 32 - 1),
    "long": (-2 ** 63, 2 ** 63 - 1),
    "long int": (-2 ** 63, 2 ** 63 - 1),
    "unsigned long": (0, 2 ** 64 - 1),
    "long long": (-2 ** 63, 2 ** 63 - 1),
    "unsigned long long": (0, 2 ** 64 - 1),
}

ARRAY_LEN = 8  # fixed buffer length passed for pointer/array parameters


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type_text: str
    is_array: bool


@dataclass(frozen=True)
class DiffResult:
    equivalent: bool
    witness: Optional[tuple] = None  # (input row index, values)


def _signature(ast: Ast) -> tuple[str, list[ParamSpec]]:
    ret = ast.nodes[ast.root].type_text or "int"
    params: list[ParamSpec] = []
    plist = ast.nodes[ast.nodes[ast.root].children[1]]
    for c in plist.children:
        node = ast.nodes[c]
        if node.kind != "Identifier":
            raise DriverIncompatible("opaque parameter")
        tt = node.type_text
        base = tt.replace("const", "").replace("[]", "").replace("*", "")
        base = " ".join(base.split())
        is_array = "*" in tt or "[]" in tt
        if base not in _INT_RANGES:
            raise DriverIncompatible(f"unsupported parameter type {tt!r}")
        params.append(ParamSpec(ast.text_of(node.id), tt, is_array))
    base_ret = " ".join(ret.replace("const", "").split())
    if "*" in base_ret:
        raise DriverIncompatible(f"unsupported return type {ret!r}")
    if base_ret not in _INT_RANGES and base_ret != "void":
        raise DriverIncompatible(f"unsupported return type {ret!r}")
    return ret, params


def generate_input_vectors(ast: Ast, count: int, seed: int
                           ) -> list[list[int]]:
    """Seeded input rows: per-type boundary values first, then uniform
    samples within declared ranges. Array slots expand to ARRAY_LEN
    values each."""
    _, params = _signature(ast)
    rng = random.Random(seed)
    widths = []
    for p in params:
        base = " ".join(p.type_text.replace("const", "")
                        .replace("[]", "").replace("*", "").split())
        widths.append((_INT_RANGES[base], ARRAY_LEN if p.is_array else 1))
    rows: list[list[int]] = []

    def boundary(lo: int, hi: int) -> list[int]:
        vals = [lo, -1, 0, 1, hi]
        return [v for v in vals if lo <= v <= hi]

    # boundary rows: cycle each parameter through its boundary set
    max_b = max((len(boundary(*rng_)) for rng_, _ in widths), default=0)
    for k in range(max_b):
        row: list[int] = []
        for (lo, hi), slots in widths:
            b = boundary(lo, hi)
            for s in range(slots):
                row.append(b[(k + s) % len(b)])
        rows.append(row)
    while len(rows) < count:
        row = []
        for (lo, hi), slots in widths:
            for _ in range(slots):
                row.append(rng.randint(lo, hi))
        rows.append(row)
    return rows[:count]


def _driver_source(text: str, rows: list[list[int]]) -> str:
    ast = parse_text(text)
    ret, params = _signature(ast)
    name = ast.text_of(ast.nodes[ast.root].children[0])
    width = sum(ARRAY_LEN if p.is_array else 1 for p in params)
    lines = [text[:ast.nodes[ast.root].span[0]],
             "#include <stdio.h>",
             text[ast.nodes[ast.root].span[0]:], ""]
    if width:
        lines.append(f"static const unsigned long long "
                     f"harness_in[][{width}] = {{")
        for row in rows:
            lines.append("  {" + ", ".join(f"{v & (2**64-1)}ULL"
                                           for v in row) + "},")
        lines.append("};")
    lines.append("int main(void) {")
    n_rows = max(len(rows), 1)
    lines.append(f"  for (int harness_i = 0; harness_i < {n_rows}; "
                 "harness_i++) {")
    args = []
    col = 0
    for j, p in enumerate(params):
        base = " ".join(p.type_text.replace("const", "")
                        .replace("[]", "").replace("*", "").split())
        if p.is_array:
            lines.append(f"    {base} harness_buf{j}[{ARRAY_LEN}];")
            lines.append(f"    for (int harness_k = 0; harness_k < "
                         f"{ARRAY_LEN}; harness_k++) harness_buf{j}"
                         f"[harness_k] = ({base})harness_in[harness_i]"
                         f"[{col} + harness_k];")
            args.append(f"harness_buf{j}")
            col += ARRAY_LEN
        else:
            lines.append(f"    {base} harness_a{j} = ({base})"
                         f"harness_in[harness_i][{col}];")
            args.append(f"harness_a{j}")
            col += 1
    call = f"{name}({', '.join(args)})"
    base_ret = " ".join(ret.replace("const", "").split())
    if base_ret == "void":
        lines.append(f"    {call};")
    else:
        lines.append(f"    unsigned long long harness_r = "
                     f"(unsigned long long)({call});")
        lines.append('    printf("%llu\\n", harness_r);')
    for j, p in enumerate(params):
        if p.is_array:
            lines.append(f"    for (int harness_k = 0; harness_k < "
                         f"{ARRAY_LEN}; harness_k++) printf(\"%llu \", "
                         f"(unsigned long long)harness_buf{j}[harness_k]);")
            lines.append('    printf("\\n");')
    lines.append("  }")
    lines.append("  return 0;")
    lines.append("}")
    return "\n".join(lines)


DEFAULT_DIFF_COMPILER = ("cc", "-O0", "-fwrapv", "-x", "c")


def _compile_and_run(source: str, workdir: str, tag: str,
                     compiler: Sequence[str],
                     timeout: float) -> tuple[int, str]:
    src = os.path.join(workdir, f"{tag}.c")
    exe = os.path.join(workdir, f"{tag}.bin")
    with open(src, "w") as f:
        f.write(source)
    try:
        proc = subprocess.run(list(compiler) + [src, "-o", exe],
                              capture_output=True, timeout=timeout,
                              text=True)
    except FileNotFoundError as e:
        raise CompilerSpawnFailure(str(e))
    if proc.returncode != 0:
        raise CompileFailure(proc.stderr[-2000:])
    try:
        run = subprocess.run([exe], capture_output=True, timeout=timeout,
                             text=True)
    except subprocess.TimeoutExpired:
        raise ExecutionTimeout(tag)
    return run.returncode, run.stdout


def differential_test(original: str, variant: str, *,
                      inputs: Optional[list[list[int]]] = None,
                      num_inputs: int = 256, seed: int = 0,
                      compiler: Sequence[str] = DEFAULT_DIFF_COMPILER,
                      timeout: float = 30.0) -> DiffResult:
    """Compile both versions against a generated driver, execute them on
    every sampled input, and compare stdout + exit codes."""
    ast = parse_text(original)
    rows = inputs if inputs is not None else \
        generate_input_vectors(ast, num_inputs, seed)
    with tempfile.TemporaryDirectory(prefix="cmorph-diff-") as workdir:
        code_a, out_a = _compile_and_run(_driver_source(original, rows),
                                         workdir, "orig", compiler, timeout)
        code_b, out_b = _compile_and_run(_driver_source(variant, rows),
                                         workdir, "var", compiler, timeout)
    if code_a == code_b and out_a == out_b:
        return DiffResult(True)
    lines_a = out_a.splitlines()
    lines_b = out_b.splitlines()
    per_row = max(1, (len(lines_a) or len(lines_b)) // max(len(rows), 1))
    witness_row = 0
    for i, (la, lb) in enumerate(zip(lines_a, lines_b)):
        if la != lb:
            witness_row = min(i // per_row, len(rows) - 1)
            break
    else:
        witness_row = min(len(lines_a), len(lines_b)) // per_row \
            if rows else 0
        witness_row = min(witness_row, len(rows) - 1) if rows else 0
    witness = (witness_row, tuple(rows[witness_row]) if rows else ())
    return DiffResult(False, witness)


# ---------------------------------------------------------------------------
# augmentation export

def export_augmentation(path: str, variants: Sequence[tuple[int, Variant]],
                        parent_targets: dict[str, int], *,
                        ratio: float = 1.0, seed: int = 0) -> int:
    """Write variants as corpus records with the parent's target label.
    `ratio` selects a seeded deterministic subset; returns records written."""
    chosen = list(variants)
    if ratio < 1.0:
        rng = random.Random(seed)
        k = int(round(len(chosen) * ratio))
        chosen = sorted(rng.sample(range(len(chosen)), k))
        chosen = [variants[i] for i in chosen]
    if not chosen:
        warnings.warn("augmentation export produced an empty corpus")
    with open(path, "w", encoding="utf-8") as f:
        for idx, v in chosen:
            f.write(json.dumps({
                "idx": idx,
                "func": v.text,
                "target": parent_targets[v.parent_id],
            }, ensure_ascii=False) + "\n")
    return len(chosen)
