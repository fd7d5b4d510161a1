"""Variant generation: one-to-one, multi-location, and multi-rule modes.

Single mode applies each enabled rule at each valid site independently
(one variant per site). Multi-location saturates one rule across a sample
by repeated application at strictly increasing byte positions. Multi-rule
composes applications breadth-first up to a configured depth (default 2).
All variants carry replayable provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import analysis, transforms
from .parser import Ast, Edit, ParseError, SourceUnit, parse_text, rewrite
from .rules import ALL_RULES, TransformRule

MODES = ("single", "multiLocation", "multiRule")

# hard safety stop for multi-location saturation; strictly increasing
# ordinals bound well-behaved rules long before this
_MAX_APPLICATIONS = 10_000


class BudgetExceeded(Exception):
    """Variant count for one unit passed the configured cap."""


@dataclass(frozen=True)
class ProvenanceEntry:
    rule: object  # TransformRule (or an experiment-registered rule object)
    ordinal: int
    description: str

    def as_tuple(self) -> tuple[str, int, str]:
        return (str(self.rule), self.ordinal, self.description)


@dataclass(frozen=True)
class Variant:
    text: str
    parent_id: str
    provenance: tuple[ProvenanceEntry, ...]
    depth: int

    @property
    def rules(self) -> tuple[str, ...]:
        return tuple(str(p.rule) for p in self.provenance)

    @property
    def ordinals(self) -> tuple[int, ...]:
        return tuple(p.ordinal for p in self.provenance)


@dataclass
class GenerationConfig:
    enabled_rules: tuple = ALL_RULES
    max_depth: int = 2
    modes: tuple[str, ...] = MODES
    budget: int = 10_000


_COMMENT_MARKS = ("/*", "//")


def _site_description(ast: Ast, site: analysis.Site, edits: list[Edit]) -> str:
    snippet = " ".join(ast.text_of(site.node_id).split())
    if len(snippet) > 40:
        snippet = snippet[:37] + "..."
    desc = snippet
    for e in edits:
        removed = ast.source_text[e.span[0]:e.span[1]]
        if any(m in removed and m not in e.replacement for m in _COMMENT_MARKS):
            desc += " [dropped-comment]"
            break
    return desc


def _apply_at(ast: Ast, site: analysis.Site) -> tuple[str, ProvenanceEntry,
                                                      int]:
    """Apply a rule at a site; returns (new text, provenance entry,
    frontier position of the site in the new text)."""
    edits = transforms.apply_rule(ast, site)
    new_text = rewrite(ast.source_text, edits)
    shift = sum(len(e.replacement) - (e.span[1] - e.span[0])
                for e in edits if e.span[1] <= site.ordinal)
    entry = ProvenanceEntry(site.rule, site.ordinal,
                            _site_description(ast, site, edits))
    return new_text, entry, site.ordinal + shift


def _reparses(text: str) -> bool:
    try:
        parse_text(text)
        return True
    except ParseError:
        return False


def generate_single(unit: SourceUnit,
                    config: Optional[GenerationConfig] = None) -> list[Variant]:
    """One variant per (rule, valid site); rule order, then site order."""
    config = config or GenerationConfig()
    ast = parse_text(unit.text)
    out: list[Variant] = []
    for rule in config.enabled_rules:
        for site in analysis.valid_sites(ast, rule):
            text, entry, _ = _apply_at(ast, site)
            if text == unit.text or not _reparses(text):
                continue
            out.append(Variant(text, unit.id, (entry,), 1))
    return out


def generate_multi_location(unit: SourceUnit, rule) -> Optional[Variant]:
    """Saturate one rule across the sample at strictly increasing byte
    positions; returns the final variant once >= 2 applications landed."""
    text = unit.text
    frontier = -1
    entries: list[ProvenanceEntry] = []
    while len(entries) < _MAX_APPLICATIONS:
        try:
            ast = parse_text(text)
        except ParseError:
            break
        nxt = next((s for s in analysis.valid_sites(ast, rule)
                    if s.ordinal > frontier), None)
        if nxt is None:
            break
        text, entry, frontier = _apply_at(ast, nxt)
        entries.append(entry)
    if len(entries) < 2 or text == unit.text or not _reparses(text):
        return None
    return Variant(text, unit.id, tuple(entries), len(entries))


def generate_multi_rule(unit: SourceUnit,
                        config: Optional[GenerationConfig] = None
                        ) -> list[Variant]:
    """Breadth-first composition of single applications to depth
    config.max_depth; exact-text duplicates collapse, first provenance
    kept. Raises BudgetExceeded past config.budget variants."""
    config = config or GenerationConfig()
    if config.max_depth < 2:
        return []
    frontier = generate_single(unit, config)
    seen: dict[str, Variant] = {}
    out: list[Variant] = []
    for depth in range(2, config.max_depth + 1):
        nxt: list[Variant] = []
        for base in frontier:
            step_unit = SourceUnit(unit.id, base.text, unit.label)
            for ext in generate_single(step_unit, config):
                text = ext.text
                if text == unit.text or text in seen:
                    continue
                v = Variant(text, unit.id, base.provenance + ext.provenance,
                            depth)
                seen[text] = v
                nxt.append(v)
                if len(seen) > config.budget:
                    raise BudgetExceeded(
                        f"unit {unit.id}: over {config.budget} variants")
        out.extend(nxt)
        frontier = nxt
    return out


def generate_all(unit: SourceUnit,
                 config: Optional[GenerationConfig] = None) -> list[Variant]:
    """Union of the configured modes, deduplicated by text."""
    config = config or GenerationConfig()
    collected: list[Variant] = []
    if "single" in config.modes:
        collected.extend(generate_single(unit, config))
    if "multiLocation" in config.modes:
        for rule in config.enabled_rules:
            v = generate_multi_location(unit, rule)
            if v is not None:
                collected.append(v)
    if "multiRule" in config.modes:
        collected.extend(generate_multi_rule(unit, config))
    seen: set[str] = set()
    out: list[Variant] = []
    for v in collected:
        if v.text not in seen:
            seen.add(v.text)
            out.append(v)
    return out


def replay(unit: SourceUnit, provenance: Iterable[ProvenanceEntry]) -> str:
    """Re-derive a variant's text from its parent and provenance chain."""
    text = unit.text
    for entry in provenance:
        ast = parse_text(text)
        site = next((s for s in analysis.valid_sites(ast, entry.rule)
                     if s.ordinal == entry.ordinal), None)
        if site is None:
            raise ValueError(
                f"no {entry.rule} site at byte {entry.ordinal} during replay")
        text = rewrite(text, transforms.apply_rule(ast, site))
    return text
