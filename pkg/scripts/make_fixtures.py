#!/usr/bin/env python3
"""Regenerate the committed fixture corpora under tests/fixtures/."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from fixture_defs import build_attack_corpus, build_basic_corpus  # noqa: E402

from cmorph.parser import write_corpus  # noqa: E402


def main() -> None:
    here = os.path.dirname(os.path.abspath(__file__))
    fixtures = os.path.join(here, "..", "tests", "fixtures")
    os.makedirs(fixtures, exist_ok=True)
    write_corpus(os.path.join(fixtures, "corpus_basic.jsonl"),
                 build_basic_corpus())
    write_corpus(os.path.join(fixtures, "corpus_attack.jsonl"),
                 build_attack_corpus())
    print(f"wrote corpora under {os.path.normpath(fixtures)}")


if __name__ == "__main__":
    main()
