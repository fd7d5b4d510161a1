"""The closed catalog of transformation rules."""

from __future__ import annotations

import enum


class TransformRule(enum.Enum):
    ASSIGN_SPLIT = "assign-split"
    COMPOUND_ASSIGN_SPLIT = "compound-assign-split"
    WHILE_TO_FOR = "while-to-for"
    FOR_TO_WHILE = "for-to-while"
    COND_NEGATE = "cond-negate"
    COND_SPLIT_AND = "cond-split-and"
    COND_SPLIT_OR = "cond-split-or"
    COND_REORDER = "cond-reorder"

    def __str__(self) -> str:
        return self.value


ALL_RULES = tuple(TransformRule)


def rule_from_name(name: str) -> TransformRule:
    for rule in TransformRule:
        if rule.value == name or rule.name.lower() == name.lower():
            return rule
    raise ValueError(f"unknown rule {name!r}")
