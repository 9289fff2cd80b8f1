from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from textgen import natural_corpus, random_word_corpus  # noqa: E402


@pytest.fixture(scope="session")
def small_natural_corpus():
    return natural_corpus(40, seed=11, shared_vocab=120, unique_terms=4)


@pytest.fixture(scope="session")
def tiny_corpus():
    return random_word_corpus(12, vocab_size=30, seed=5)
