"""Batch command-line front end.

Commands: transform, attack, metrics, graphdiff, validate. Every run
writes a run-manifest.json next to its primary output capturing the
resolved configuration. Exit codes: 0 success, 1 usage, 2 data error,
3 external-process error.

Environment overrides: CMORPH_DETECTOR_CMD, CMORPH_COMPILER_CMD.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import composer, cpg, harness, metrics, transforms
from .composer import BudgetExceeded, GenerationConfig
from .parser import ParseError, SourceUnit, iter_corpus, parse_text
from .rules import ALL_RULES, TransformRule, rule_from_name

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_EXTERNAL = 3

_MODE_ALIASES = {
    "single": "single",
    "multi-location": "multiLocation",
    "multilocation": "multiLocation",
    "multi-rule": "multiRule",
    "multirule": "multiRule",
}


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str
    output: Optional[str] = None
    rules: list[str] = field(default_factory=lambda: [r.value for r in
                                                      ALL_RULES])
    modes: list[str] = field(default_factory=lambda: ["single",
                                                      "multiLocation",
                                                      "multiRule"])
    max_depth: int = 2
    detector: Optional[str] = None
    compiler: Optional[str] = None
    seed: int = 0
    workers: int = 1
    budget: int = 10_000
    strict: bool = False
    extras: dict = field(default_factory=dict)


def _write_manifest(out_path: str, config: RunConfig) -> None:
    directory = os.path.dirname(os.path.abspath(out_path)) or "."
    manifest = os.path.join(directory, "run-manifest.json")
    with open(manifest, "w", encoding="utf-8") as f:
        json.dump(asdict(config), f, indent=2, sort_keys=True)
        f.write("\n")


def _generation_config(config: RunConfig) -> GenerationConfig:
    rules = tuple(rule_from_name(r) for r in config.rules)
    return GenerationConfig(enabled_rules=rules, max_depth=config.max_depth,
                            modes=tuple(config.modes), budget=config.budget)


def _load_corpus(path: str) -> list[SourceUnit]:
    try:
        return list(iter_corpus(path))
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise DataError(f"cannot read corpus {path}: {e}")


def _variant_record(idx: int, parent_idx: int, v: composer.Variant) -> dict:
    return {
        "idx": idx,
        "parent_idx": parent_idx,
        "rules": list(v.rules),
        "sites": list(v.ordinals),
        "func": v.text,
    }


def _generate_for_unit(args: tuple) -> tuple[int, Optional[str], list, int]:
    """(unit idx, error kind or None, variants, budget hits) — top level so
    it can cross a process pool boundary."""
    unit, gen_config, rename = args
    idx = int(unit.id)
    try:
        if rename:
            ast = parse_text(unit.text)
            renamed = transforms.rename_baseline(ast)
            variants = []
            if renamed is not None:
                variants = [composer.Variant(renamed, unit.id, (), 1)]
            return idx, None, variants, 0
        return idx, None, composer.generate_all(unit, gen_config), 0
    except ParseError:
        return idx, "parse", [], 0
    except BudgetExceeded:
        return idx, "budget", [], 1


def cmd_transform(config: RunConfig) -> int:
    corpus = _load_corpus(config.input)
    if not corpus:
        raise DataError("empty corpus")
    gen_config = _generation_config(config)
    rename = bool(config.extras.get("rename_baseline"))
    corpus.sort(key=lambda u: int(u.id))
    jobs = [(u, gen_config, rename) for u in corpus]
    t0 = time.monotonic()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_generate_for_unit, jobs))
    else:
        results = [_generate_for_unit(j) for j in jobs]
    elapsed = time.monotonic() - t0

    next_idx = max(int(u.id) for u in corpus) + 1
    n_parsed = n_budget = 0
    n_with_variants = 0
    records = []
    for idx, err, variants, budget_hits in sorted(results):
        if err == "parse":
            continue
        n_parsed += 1
        n_budget += budget_hits
        if err == "budget" and config.strict:
            raise DataError(f"sample {idx}: variant budget exceeded")
        if variants:
            n_with_variants += 1
        for v in variants:
            records.append(_variant_record(next_idx, idx, v))
            next_idx += 1

    out = config.output or "variants.jsonl"
    with open(out, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    _write_manifest(out, config)

    stats = {
        "samples": len(corpus),
        "parsed": n_parsed,
        "parse_rate": n_parsed / len(corpus),
        "applicable": n_with_variants,
        "applicability_rate": (n_with_variants / n_parsed) if n_parsed else 0.0,
        "variants": len(records),
        "budget_exceeded": n_budget,
        "seconds": round(elapsed, 3),
        "variants_per_second": round(len(records) / elapsed, 1)
        if elapsed > 0 else None,
    }
    stats_path = config.extras.get("stats_out")
    if stats_path:
        with open(stats_path, "w", encoding="utf-8") as f:
            json.dump(stats, f, indent=2)
            f.write("\n")
    print(json.dumps(stats, indent=2))
    if config.strict and not records:
        raise DataError("no variants generated under --strict")
    return EXIT_OK


def _read_variants(path: str) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def cmd_attack(config: RunConfig) -> int:
    if not config.detector:
        raise DataError("attack requires --detector (or CMORPH_DETECTOR_CMD)")
    corpus = _load_corpus(config.input)
    if not corpus:
        raise DataError("empty corpus")
    corpus.sort(key=lambda u: int(u.id))
    samples = [(int(u.id), u.text) for u in corpus]
    verdicts = harness.query_detector(config.detector, samples)
    tps = harness.select_true_positives(corpus, verdicts)
    if not tps:
        raise DataError("detector flagged no ground-truth-vulnerable sample; "
                        "nothing to attack")

    gen_config = _generation_config(config)
    next_idx = max(int(u.id) for u in corpus) + 1
    variants_by_sample: dict[int, list] = {}
    all_variants: list[tuple[int, composer.Variant]] = []
    for unit in tps:
        try:
            vs = composer.generate_all(unit, gen_config)
        except BudgetExceeded:
            if config.strict:
                raise DataError(f"sample {unit.id}: budget exceeded")
            vs = []
        pairs = []
        for v in vs:
            if config.extras.get("validate") and not harness.compile_check(
                    config.compiler, v.text):
                continue
            pairs.append((next_idx, v))
            all_variants.append((next_idx, v))
            next_idx += 1
        variants_by_sample[int(unit.id)] = pairs

    verdict_log: list[dict] = []
    report = harness.run_attack(corpus, variants_by_sample, config.detector,
                                verdict_log=verdict_log)
    out = config.output or "attack-report.json"
    payload = report.to_dict()
    with open(out, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    log_path = os.path.splitext(out)[0] + "-verdicts.jsonl"
    with open(log_path, "w", encoding="utf-8") as f:
        for rec in verdict_log:
            f.write(json.dumps(rec) + "\n")
    aug_path = config.extras.get("export_augmentation")
    if aug_path:
        targets = {u.id: 1 if u.label == "vulnerable" else 0 for u in corpus}
        harness.export_augmentation(
            aug_path, all_variants, targets,
            ratio=float(config.extras.get("augmentation_ratio", 1.0)),
            seed=config.seed)
    _write_manifest(out, config)
    print(_format_report_table(payload))
    return EXIT_OK


def _format_report_table(payload: dict) -> str:
    rate = payload["evasion_rate"]
    lines = [
        f"true positives : {payload['true_positives']}",
        "evasion rate   : " + (f"{rate:.4f}" if rate is not None else "n/a"),
        "",
        f"{'rule':<28} {'evaded':>7} {'mean-dist':>10} {'IER/CC':>8}",
    ]
    for rule in payload["rule_ranking"]:
        stats = payload["per_rule"].get(rule, {})
        dist = stats.get("mean_edit_distance")
        eff = stats.get("ier_cc")
        dist_s = f"{dist:.1f}" if dist is not None else "n/a"
        eff_s = f"{eff:.3f}" if eff is not None else "n/a"
        lines.append(f"{rule:<28} {stats.get('evaded_samples', 0):>7} "
                     f"{dist_s:>10} {eff_s:>8}")
    return "\n".join(lines)


def cmd_metrics(config: RunConfig) -> int:
    corpus = {int(u.id): u for u in _load_corpus(config.input)}
    variants_path = config.extras.get("variants")
    if not variants_path:
        raise DataError("metrics requires --variants")
    records = _read_variants(variants_path)
    out = config.output or "metrics.csv"
    rows = []
    for rec in sorted(records, key=lambda r: r["idx"]):
        parent = corpus.get(rec["parent_idx"])
        if parent is None:
            raise DataError(f"variant {rec['idx']}: unknown parent "
                            f"{rec['parent_idx']}")
        rep = metrics.report(parent.text, rec["func"])
        rows.append({"idx": rec["idx"], "parent_idx": rec["parent_idx"],
                     **rep.to_dict()})
    fieldnames = list(rows[0].keys()) if rows else ["idx", "parent_idx"]
    with open(out, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    summary = _summarize(rows, ("loc_delta_pct", "halstead_delta_pct",
                                "cyclomatic_delta_pct", "degree_delta_pct",
                                "edit_distance"))
    summary_path = os.path.splitext(out)[0] + "-summary.json"
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _summarize(rows: list[dict], keys: Sequence[str]) -> dict:
    out: dict = {"variants": len(rows)}
    for key in keys:
        vals = [r[key] for r in rows if r.get(key) is not None]
        out[f"mean_{key}"] = sum(vals) / len(vals) if vals else None
    return out


def cmd_graphdiff(config: RunConfig) -> int:
    corpus = {int(u.id): u for u in _load_corpus(config.input)}
    variants_path = config.extras.get("variants")
    if not variants_path:
        raise DataError("graphdiff requires --variants")
    records = _read_variants(variants_path)
    out = config.output or "graphdiff.jsonl"
    deltas = []
    with open(out, "w", encoding="utf-8") as f:
        for rec in sorted(records, key=lambda r: r["idx"]):
            parent = corpus.get(rec["parent_idx"])
            if parent is None:
                raise DataError(f"variant {rec['idx']}: unknown parent")
            before = cpg.build_cpg(parse_text(parent.text))
            after = cpg.build_cpg(parse_text(rec["func"]))
            delta = cpg.graph_diff(before, after)
            deltas.append(delta)
            f.write(json.dumps({"idx": rec["idx"],
                                "parent_idx": rec["parent_idx"],
                                **delta.to_dict()}) + "\n")
    changes = [d.degree_percent_change for d in deltas
               if d.degree_percent_change is not None]
    summary = {
        "variants": len(deltas),
        "mean_degree_percent_change": sum(changes) / len(changes)
        if changes else None,
        "mean_node_delta": sum(d.node_delta for d in deltas) / len(deltas)
        if deltas else None,
    }
    _write_manifest(out, config)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_validate(config: RunConfig) -> int:
    corpus = {int(u.id): u for u in _load_corpus(config.input)}
    variants_path = config.extras.get("variants")
    if not variants_path:
        raise DataError("validate requires --variants")
    records = _read_variants(variants_path)
    n_compiled = n_equivalent = n_diffed = 0
    failures = []
    for rec in sorted(records, key=lambda r: r["idx"]):
        ok = harness.compile_check(config.compiler, rec["func"])
        n_compiled += ok
        if not ok:
            failures.append({"idx": rec["idx"], "stage": "compile"})
            continue
        if config.extras.get("differential"):
            parent = corpus.get(rec["parent_idx"])
            if parent is None:
                raise DataError(f"variant {rec['idx']}: unknown parent")
            try:
                result = harness.differential_test(
                    parent.text, rec["func"],
                    num_inputs=int(config.extras.get("num_inputs", 256)),
                    seed=config.seed)
            except harness.DriverIncompatible:
                continue
            n_diffed += 1
            if result.equivalent:
                n_equivalent += 1
            else:
                failures.append({"idx": rec["idx"], "stage": "differential",
                                 "witness": list(result.witness or ())})
    summary = {
        "variants": len(records),
        "compiled": n_compiled,
        "differential_tested": n_diffed,
        "equivalent": n_equivalent,
        "failures": failures,
    }
    out = config.output or "validate-summary.json"
    with open(out, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_manifest(out, config)
    print(json.dumps({k: v for k, v in summary.items() if k != "failures"},
                     indent=2, sort_keys=True))
    if config.strict and failures:
        raise DataError(f"{len(failures)} validation failures under --strict")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument plumbing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="corpus JSONL path")
    p.add_argument("--output", help="primary output path")
    p.add_argument("--rules", help="comma-separated rule names")
    p.add_argument("--modes", default="single,multi-location,multi-rule",
                   help="comma-separated generation modes")
    p.add_argument("--max-depth", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--budget", type=int, default=10_000,
                   help="per-sample variant cap")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--detector", help="detector argv or builtin:<spec>")
    p.add_argument("--compiler", help="compiler argv for syntax checks")


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cmorph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("transform", help="generate variants for a corpus")
    _add_common(p)
    p.add_argument("--rename-baseline", action="store_true",
                   help="emit identifier-rename baseline variants instead")
    p.add_argument("--stats-out", help="write generation stats JSON here")

    p = sub.add_parser("attack", help="run the black-box attack loop")
    _add_common(p)
    p.add_argument("--validate", action="store_true",
                   help="compile-check variants before querying")
    p.add_argument("--export-augmentation", metavar="PATH",
                   help="write variants as a training corpus")
    p.add_argument("--augmentation-ratio", type=float, default=1.0)

    p = sub.add_parser("metrics", help="per-variant complexity metrics CSV")
    _add_common(p)
    p.add_argument("--variants", required=True, help="variants JSONL path")

    p = sub.add_parser("graphdiff", help="per-variant graph deltas")
    _add_common(p)
    p.add_argument("--variants", required=True, help="variants JSONL path")

    p = sub.add_parser("validate", help="compile/differential validation")
    _add_common(p)
    p.add_argument("--variants", required=True, help="variants JSONL path")
    p.add_argument("--differential", action="store_true")
    p.add_argument("--num-inputs", type=int, default=256)
    return parser


_EXTRA_KEYS = ("rename_baseline", "stats_out", "validate",
               "export_augmentation", "augmentation_ratio", "variants",
               "differential", "num_inputs")

_COMMANDS = {
    "transform": cmd_transform,
    "attack": cmd_attack,
    "metrics": cmd_metrics,
    "graphdiff": cmd_graphdiff,
    "validate": cmd_validate,
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    rules = [r.strip() for r in args.rules.split(",")] if args.rules \
        else [r.value for r in ALL_RULES]
    for r in rules:
        rule_from_name(r)  # validate early
    modes = []
    for m in args.modes.split(","):
        m = m.strip()
        if m:
            if m not in _MODE_ALIASES:
                raise DataError(f"unknown mode {m!r}")
            modes.append(_MODE_ALIASES[m])
    extras = {k: getattr(args, k) for k in _EXTRA_KEYS
              if getattr(args, k, None) not in (None, False)}
    return RunConfig(
        command=args.command,
        input=args.input,
        output=args.output,
        rules=rules,
        modes=modes,
        max_depth=args.max_depth,
        detector=args.detector or os.environ.get("CMORPH_DETECTOR_CMD"),
        compiler=args.compiler or os.environ.get("CMORPH_COMPILER_CMD"),
        seed=args.seed,
        workers=args.workers,
        budget=args.budget,
        strict=args.strict,
        extras=extras,
    )


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    try:
        config = config_from_args(args)
        return _COMMANDS[args.command](config)
    except (DataError, ValueError) as e:
        print(f"cmorph: error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (harness.DetectorSpawnFailure, harness.ProtocolViolation,
            harness.DetectorTimeout, harness.CompilerSpawnFailure,
            harness.CompileFailure, harness.ExecutionTimeout) as e:
        print(f"cmorph: external process error: {e}", file=sys.stderr)
        return EXIT_EXTERNAL


if __name__ == "__main__":
    sys.exit(main())
