import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import pytest

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def basic_corpus_path():
    return os.path.join(FIXTURES, "corpus_basic.jsonl")


@pytest.fixture(scope="session")
def attack_corpus_path():
    return os.path.join(FIXTURES, "corpus_attack.jsonl")
