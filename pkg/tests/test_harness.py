import json
import sys

import pytest

from fixture_defs import ATTACK_PATTERN, build_attack_corpus
from cmorph.composer import GenerationConfig, Variant, generate_all
from cmorph.harness import (AttackReport, CompileFailure, DetectorVerdict,
                            DriverIncompatible, EmptyReport,
                            ProtocolViolation, SampleAttack, VariantOutcome,
                            compile_check, compile_unit_source,
                            differential_test, efficiency, evasion_rate,
                            export_augmentation, generate_input_vectors,
                            query_detector, rank_rules, run_attack,
                            select_true_positives)
from cmorph.parser import SourceUnit, parse_text, unit_from_record
from cmorph.rules import TransformRule as R

PY = sys.executable


def detector_script(body: str) -> list[str]:
    return [PY, "-c", body]


ECHO_SCRIPT = """\
import sys, json
for line in sys.stdin:
    rec = json.loads(line)
    print(json.dumps({"idx": rec["idx"], "label": 1}))
"""


# --- detector protocol

def test_builtin_echo_flags_everything():
    verdicts = query_detector("builtin:echo", [(0, "a"), (1, "b")])
    assert all(v.vulnerable for v in verdicts)


def test_builtin_pattern_detector():
    verdicts = query_detector(f"builtin:pattern:{ATTACK_PATTERN}",
                              [(0, "if (err >= 0) {}"), (1, "if (0 <= err) {}")])
    assert verdicts[0].vulnerable and not verdicts[1].vulnerable


def test_subprocess_detector_roundtrip():
    verdicts = query_detector(detector_script(ECHO_SCRIPT),
                              [(7, "x"), (9, "y")])
    assert [(v.idx, v.label) for v in verdicts] == \
        [(7, "vulnerable"), (9, "vulnerable")]


def test_subprocess_detector_order_independent():
    script = """\
import sys, json
recs = [json.loads(l) for l in sys.stdin]
for rec in reversed(recs):
    print(json.dumps({"idx": rec["idx"], "label": 0}))
"""
    verdicts = query_detector(detector_script(script), [(1, "a"), (2, "b")])
    assert [(v.idx, v.label) for v in verdicts] == \
        [(1, "nonvulnerable"), (2, "nonvulnerable")]


@pytest.mark.parametrize("script,msg", [
    ("import sys, json\nfor l in sys.stdin: "
     "print(json.dumps({'idx': json.loads(l)['idx'], 'label': 2}))",
     "label"),
    ("import sys, json\nfor l in sys.stdin:\n"
     "    i = json.loads(l)['idx']\n"
     "    print(json.dumps({'idx': i, 'label': 1}))\n"
     "    print(json.dumps({'idx': i, 'label': 1}))", "duplicate"),
    ("import sys\nlist(sys.stdin)", "missing"),
])
def test_protocol_violations(script, msg):
    with pytest.raises(ProtocolViolation) as exc:
        query_detector(detector_script(script), [(1, "x")])
    assert msg in str(exc.value)


def test_nonzero_exit_after_incomplete_output():
    script = "import sys\nsys.exit(3)"
    with pytest.raises(ProtocolViolation) as exc:
        query_detector(detector_script(script), [(1, "x")])
    assert "exited 3" in str(exc.value) or "missing" in str(exc.value)


def test_per_sample_mode():
    verdicts = query_detector(detector_script(ECHO_SCRIPT),
                              [(1, "a"), (2, "b")], per_sample=True)
    assert len(verdicts) == 2


def test_empty_sample_list_rejected():
    with pytest.raises(EmptyReport):
        query_detector("builtin:echo", [])


# --- true positives

def test_select_true_positives():
    corpus = [
        SourceUnit("0", "a", "vulnerable"),
        SourceUnit("1", "b", "vulnerable"),
        SourceUnit("2", "c", "non-vulnerable"),
        SourceUnit("3", "d", "non-vulnerable"),
    ]
    verdicts = [DetectorVerdict(0, "vulnerable"),
                DetectorVerdict(1, "nonvulnerable"),
                DetectorVerdict(2, "vulnerable"),
                DetectorVerdict(3, "nonvulnerable")]
    tps = select_true_positives(corpus, verdicts)
    assert [u.id for u in tps] == ["0"]


def test_all_correct_detector_keeps_all_vulnerable():
    corpus = [SourceUnit(str(i), "x", "vulnerable") for i in range(3)]
    verdicts = [DetectorVerdict(i, "vulnerable") for i in range(3)]
    assert len(select_true_positives(corpus, verdicts)) == 3


# --- evasion accounting

def make_report():
    def outcome(idx, rules, dist, label, depth=None):
        return VariantOutcome(idx, tuple(rules), depth or len(rules), dist,
                              label)
    return AttackReport([
        SampleAttack(0, [outcome(100, ["cond-reorder"], 10, "nonvulnerable"),
                         outcome(101, ["cond-negate"], 40, "vulnerable")]),
        SampleAttack(1, [outcome(102, ["cond-reorder"], 12, "vulnerable")]),
        SampleAttack(2, [outcome(103, ["cond-negate"], 44, "nonvulnerable"),
                         outcome(104, ["cond-reorder"], 9, "nonvulnerable")]),
        SampleAttack(3, []),
    ])


def test_evasion_rate_best_of_variants():
    assert evasion_rate(make_report()) == 0.5  # samples 0 and 2 of 4


def test_evasion_rate_numbers():
    rep = AttackReport([SampleAttack(i, [VariantOutcome(
        100 + i, ("cond-reorder",), 1, 5,
        "nonvulnerable" if i < 4 else "vulnerable")]) for i in range(10)])
    assert evasion_rate(rep) == 0.4
    no_evade = AttackReport([SampleAttack(0, [VariantOutcome(
        1, ("cond-reorder",), 1, 5, "vulnerable")])])
    assert evasion_rate(no_evade) == 0.0
    with pytest.raises(EmptyReport):
        evasion_rate(AttackReport([]))


def test_rank_rules_by_count_then_distance():
    rep = make_report()
    # reorder evades 2 samples, negate 1
    assert rank_rules(rep) == ["cond-reorder", "cond-negate"]

    tied = AttackReport([
        SampleAttack(0, [VariantOutcome(1, ("a",), 1, 40, "nonvulnerable"),
                         VariantOutcome(2, ("b",), 1, 90, "nonvulnerable")]),
    ])
    assert rank_rules(tied) == ["a", "b"]  # equal counts; cheaper first


def test_efficiency_definition():
    rep = AttackReport([SampleAttack(i, [VariantOutcome(
        100 + i, ("r",), 1, 50, "nonvulnerable" if i == 0 else "vulnerable")])
        for i in range(10)])
    # 1 of 10 evaded -> 10 percentage points; mean distance 50 -> 0.2
    assert efficiency(rep)["r"] == pytest.approx(0.2)


def test_efficiency_ratio_scales_with_distance():
    def rep_with_distance(dist):
        return AttackReport([SampleAttack(0, [VariantOutcome(
            1, ("r",), 1, dist, "nonvulnerable")])])
    assert efficiency(rep_with_distance(25))["r"] == \
        pytest.approx(4 * efficiency(rep_with_distance(100))["r"])


# --- compile validation

def test_fixture_variants_all_compile(basic_corpus_path):
    unit = SourceUnit("0", "int f(int a, int b) { return a + b * 2; }")
    assert compile_check(None, unit.text)


def test_corrupted_variant_fails():
    assert not compile_check(None, "int f( { return; }")


def test_preamble_typedef_needed():
    body = "shape_t f(shape_t v) { return v; }"
    with_preamble = "typedef int shape_t;\n" + body
    assert compile_check(None, with_preamble)
    assert not compile_check(None, body)


def test_stub_generation_for_unresolved_externals():
    src = "int f(int a) { return helper(a) + limit; }"
    stubbed = compile_unit_source(src)
    assert "int helper();" in stubbed
    assert "int limit;" in stubbed
    assert compile_check(None, src)


# --- differential testing

def test_differential_original_vs_itself():
    src = "int f(int a, int b) { return a + b; }"
    assert differential_test(src, src, num_inputs=8).equivalent


def test_differential_finds_fault_injection():
    src = "int f(int x) { if (x == 0) { return 1; } else { return 2; } }"
    # negation without the branch swap: a classic wrong transform
    broken = "int f(int x) { if (x != 0) { return 1; } else { return 2; } }"
    result = differential_test(src, broken, num_inputs=16)
    assert not result.equivalent
    assert result.witness is not None


def test_differential_covers_boundaries():
    ast = parse_text("int f(int a) { return a; }")
    rows = generate_input_vectors(ast, 16, seed=3)
    flat = {v for row in rows for v in row}
    assert {-2 ** 31, -1, 0, 1, 2 ** 31 - 1} <= flat


def test_differential_array_params_capture_writes():
    src = "void f(int *a) { a[0] = a[1] + 1; }"
    broken = "void f(int *a) { a[0] = a[1] + 2; }"
    assert differential_test(src, src, num_inputs=8).equivalent
    assert not differential_test(src, broken, num_inputs=8).equivalent


def test_differential_rejects_incompatible_signature():
    src = "double f(double x) { return x; }"
    with pytest.raises(DriverIncompatible):
        differential_test(src, src, num_inputs=4)


def test_differential_input_vectors_deterministic():
    ast = parse_text("int f(int a, long b) { return a; }")
    assert generate_input_vectors(ast, 32, seed=7) == \
        generate_input_vectors(ast, 32, seed=7)
    assert generate_input_vectors(ast, 32, seed=7) != \
        generate_input_vectors(ast, 32, seed=8)


# --- attack loop

def test_run_attack_with_pattern_detector():
    corpus = [unit_from_record(r) for r in build_attack_corpus()]
    detector = f"builtin:pattern:{ATTACK_PATTERN}"
    verdicts = query_detector(detector, [(int(u.id), u.text) for u in corpus])
    tps = select_true_positives(corpus, verdicts)
    assert len(tps) == 15

    config = GenerationConfig()
    next_idx = 100
    by_sample = {}
    for unit in tps:
        pairs = []
        for v in generate_all(unit, config):
            pairs.append((next_idx, v))
            next_idx += 1
        by_sample[int(unit.id)] = pairs

    log = []
    report = run_attack(corpus, by_sample, detector, verdict_log=log)
    rate = evasion_rate(report)
    assert rate == pytest.approx(10 / 15)

    # independent recount from the raw verdict log
    evaded_samples = {rec["parent_idx"] for rec in log if rec["label"] == 0}
    assert rate == len(evaded_samples) / len(tps)
    assert rank_rules(report)[0] == "cond-reorder"


def test_export_augmentation(tmp_path):
    variants = [(100 + i, Variant(f"int f(){{return {i};}}", str(i % 2), (),
                                  1)) for i in range(10)]
    targets = {"0": 1, "1": 0}
    path = tmp_path / "aug.jsonl"
    n = export_augmentation(str(path), variants, targets)
    assert n == 10
    recs = [json.loads(l) for l in path.read_text().splitlines()]
    assert all(r["target"] == (r["idx"] % 2 == 0) for r in recs)

    half = tmp_path / "half.jsonl"
    n1 = export_augmentation(str(half), variants, targets, ratio=0.5, seed=3)
    assert n1 == 5
    first = half.read_text()
    export_augmentation(str(half), variants, targets, ratio=0.5, seed=3)
    assert half.read_text() == first  # seeded subset is deterministic


def test_export_augmentation_empty_warns(tmp_path):
    path = tmp_path / "empty.jsonl"
    with pytest.warns(UserWarning):
        export_augmentation(str(path), [], {})
    assert path.read_text() == ""
