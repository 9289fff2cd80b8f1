"""Seeded synthetic corpora used across the test suite.

Documents are built from a fake but natural-looking vocabulary with
Zipf-ish frequencies, sentence punctuation, and controllable per-document
unique terms, so retrievers and the student model see realistic token
statistics at desk scale.
"""

from __future__ import annotations

import json

import numpy as np

from genret.corpus import Corpus, assign_naive_ids, ingest

_SYLLABLES = (
    "ba be bi bo bu da de di do du ka ke ki ko ku la le li lo lu "
    "ma me mi mo mu na ne ni no nu ra re ri ro ru sa se si so su "
    "ta te ti to tu va ve vi vo vu za ze zi zo zu"
).split()


def make_word(rng: np.random.Generator, n_syllables: int = 3) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(n_syllables))


def make_vocabulary(rng: np.random.Generator, size: int) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < size:
        w = make_word(rng, int(rng.integers(2, 4)))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def natural_corpus(
    n_docs: int,
    seed: int = 0,
    shared_vocab: int = 300,
    unique_terms: int = 6,
    sentences: tuple[int, int] = (4, 8),
    sentence_len: tuple[int, int] = (6, 12),
) -> Corpus:
    """Docs mixing a Zipf-weighted shared vocabulary with per-doc unique terms."""
    rng = np.random.default_rng(seed)
    vocab = make_vocabulary(rng, shared_vocab)
    ranks = np.arange(1, shared_vocab + 1, dtype=np.float64)
    weights = 1.0 / ranks
    weights /= weights.sum()
    lines = []
    for i in range(n_docs):
        uniques = [f"uq{i}x{j}" for j in range(unique_terms)]
        n_sent = int(rng.integers(sentences[0], sentences[1] + 1))
        doc_sentences = []
        for _ in range(n_sent):
            length = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
            words = list(rng.choice(vocab, size=length, p=weights))
            # salt each sentence with one or two of the document's unique terms
            for slot in range(int(rng.integers(1, 3))):
                words[int(rng.integers(len(words)))] = uniques[int(rng.integers(unique_terms))]
            doc_sentences.append(" ".join(words).capitalize() + ".")
        lines.append(json.dumps({"docid": f"doc{i}", "text": " ".join(doc_sentences)}))
    return assign_naive_ids(ingest(lines))


def clustered_corpus(
    n_docs: int,
    cluster_size: int = 10,
    seed: int = 0,
    topic_terms: int = 25,
    shared_vocab: int = 60,
    sentences: tuple[int, int] = (3, 5),
    sentence_len: tuple[int, int] = (7, 10),
) -> Corpus:
    """Topically clustered docs: clusters share a private topic vocabulary.

    A dense teacher's top-k for any fragment of a document is dominated by
    the document's cluster, which mirrors topical structure in natural
    corpora and keeps distillation lists stable within a cluster.
    """
    rng = np.random.default_rng(seed)
    common = make_vocabulary(rng, shared_vocab)
    n_clusters = (n_docs + cluster_size - 1) // cluster_size
    topics = []
    for c in range(n_clusters):
        topics.append([f"tp{c}q{j}" for j in range(topic_terms)])
    lines = []
    for i in range(n_docs):
        topic = topics[i // cluster_size]
        uniques = [f"uq{i}x{j}" for j in range(3)]
        n_sent = int(rng.integers(sentences[0], sentences[1] + 1))
        doc_sentences = []
        for _ in range(n_sent):
            length = int(rng.integers(sentence_len[0], sentence_len[1] + 1))
            words = []
            for _ in range(length):
                roll = rng.random()
                if roll < 0.55:
                    words.append(topic[int(rng.integers(topic_terms))])
                elif roll < 0.72:
                    words.append(uniques[int(rng.integers(len(uniques)))])
                else:
                    words.append(common[int(rng.integers(shared_vocab))])
            doc_sentences.append(" ".join(words).capitalize() + ".")
        lines.append(json.dumps({"docid": f"doc{i}", "text": " ".join(doc_sentences)}))
    return assign_naive_ids(ingest(lines))


def disjoint_corpus(n_docs: int, tokens_per_doc: int = 24, seed: int = 0) -> Corpus:
    """Every document uses an entirely private vocabulary."""
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_docs):
        words = [f"d{i}t{j}" for j in range(tokens_per_doc)]
        rng.shuffle(words)
        text = " ".join(words)
        lines.append(json.dumps({"text": text}))
    return assign_naive_ids(ingest(lines))


def random_word_corpus(
    n_docs: int,
    vocab_size: int = 50,
    doc_len: tuple[int, int] = (5, 14),
    seed: int = 0,
) -> Corpus:
    """Small random-bag corpus for oracle-equivalence fixtures.

    Token multisets are forced distinct across documents so that scoring
    ties between structurally identical documents cannot occur.
    """
    rng = np.random.default_rng(seed)
    vocab = [f"v{j}" for j in range(vocab_size)]
    lines = []
    seen_multisets = set()
    while len(lines) < n_docs:
        length = int(rng.integers(doc_len[0], doc_len[1] + 1))
        words = [vocab[int(rng.integers(vocab_size))] for _ in range(length)]
        key = tuple(sorted(words))
        if key in seen_multisets:
            continue
        seen_multisets.add(key)
        lines.append(json.dumps({"text": " ".join(words)}))
    return assign_naive_ids(ingest(lines))


def random_queries(rng: np.random.Generator, vocab_size: int, n_queries: int, max_len: int = 5) -> list[str]:
    queries = []
    for _ in range(n_queries):
        length = int(rng.integers(1, max_len + 1))
        queries.append(" ".join(f"v{int(rng.integers(vocab_size))}" for _ in range(length)))
    return queries
