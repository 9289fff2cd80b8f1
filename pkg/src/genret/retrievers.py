"""Sparse (BM25) and dense stand-in retrievers used as teachers and scorers.

The dense retriever is a deterministic desk-scale substitute for a neural
bi-encoder: TF-IDF vectors pushed through a seeded random sign projection
and L2-normalized.  It keeps the properties the rest of the pipeline relies
on (stable top-k lists, high self-recall) without any learned weights.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, tokenize
from .errors import ConfigError, ContractViolation
from .ranking import RankedList, ranked_list

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4
DEFAULT_DENSE_DIM = 256


def smoothed_idf(n_docs: int, doc_freq: int) -> float:
    return math.log(1.0 + (n_docs - doc_freq + 0.5) / (doc_freq + 0.5))


@dataclass(frozen=True, eq=False)
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    avg_doc_len: float
    n_docs: int
    k1: float
    b: float
    idf: dict[str, float]
    docids: tuple[str, ...]


def build_bm25_index(corpus: Corpus, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    if len(corpus) == 0:
        raise ContractViolation("cannot index an empty corpus")
    docids = tuple(corpus.id_string(i) for i in range(len(corpus)))
    postings: dict[str, list[tuple[int, int]]] = {}
    doc_lengths: list[int] = []
    for idx, tokens in enumerate(corpus.doc_tokens):
        doc_lengths.append(len(tokens))
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((idx, tf))
    n = len(corpus)
    idf = {term: smoothed_idf(n, len(plist)) for term, plist in postings.items()}
    avg = sum(doc_lengths) / n
    return Bm25Index(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_len=avg,
        n_docs=n,
        k1=k1,
        b=b,
        idf=idf,
        docids=docids,
    )


def bm25_term_weight(index: Bm25Index, term: str, tf: int, doc_len: int) -> float:
    idf = index.idf.get(term)
    if idf is None or tf == 0:
        return 0.0
    norm = index.k1 * (1.0 - index.b + index.b * doc_len / index.avg_doc_len)
    return idf * tf * (index.k1 + 1.0) / (tf + norm)


def bm25_search(index: Bm25Index, query: str, k: int) -> RankedList:
    """Top-k by BM25 score over matching documents; ties break toward the
    lower internal index.  An empty query yields an empty list."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    terms = tokenize(query)
    scores: dict[int, float] = {}
    for term in terms:
        idf = index.idf.get(term)
        if idf is None:
            continue
        for doc, tf in index.postings[term]:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths[doc] / index.avg_doc_len)
            scores[doc] = scores.get(doc, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)
    top = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return ranked_list(query, [(index.docids[doc], score) for doc, score in top])


def bm25_score_text(index: Bm25Index, query: str, text: str) -> float:
    """BM25 score of a query against arbitrary text, using corpus statistics."""
    doc_counts = Counter(tokenize(text))
    doc_len = sum(doc_counts.values())
    if doc_len == 0:
        return 0.0
    return sum(bm25_term_weight(index, term, doc_counts[term], doc_len) for term in tokenize(query))


def _sign_vector(projection_seed: int, term: str, dimension: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{projection_seed}\x00{term}".encode("utf-8"), digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.integers(0, 2, size=dimension).astype(np.float64) * 2.0 - 1.0


@dataclass(frozen=True, eq=False)
class DenseIndex:
    doc_vectors: np.ndarray  # (n, dimension), rows unit L2 norm (zero rows stay zero)
    projection_seed: int
    idf: dict[str, float]
    dimension: int
    docids: tuple[str, ...]
    sign_vectors: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def embed(self, text: str) -> np.ndarray:
        """Project arbitrary text with the index's vocabulary and seed."""
        vec = np.zeros(self.dimension)
        for term, tf in Counter(tokenize(text)).items():
            idf = self.idf.get(term)
            if idf is None:
                continue
            vec += (tf * idf) * self.sign_vectors[term]
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


def build_dense_index(corpus: Corpus, dimension: int = DEFAULT_DENSE_DIM, seed: int = 0) -> DenseIndex:
    if dimension < 16:
        raise ContractViolation("dimension must be >= 16")
    if len(corpus) == 0:
        raise ContractViolation("cannot index an empty corpus")
    docids = tuple(corpus.id_string(i) for i in range(len(corpus)))
    doc_freq: Counter[str] = Counter()
    doc_counts = [Counter(tokens) for tokens in corpus.doc_tokens]
    for counts in doc_counts:
        doc_freq.update(counts.keys())
    n = len(corpus)
    idf = {term: smoothed_idf(n, df) for term, df in doc_freq.items()}
    sign_vectors = {term: _sign_vector(seed, term, dimension) for term in doc_freq}

    vectors = np.zeros((n, dimension))
    for i, counts in enumerate(doc_counts):
        vec = vectors[i]
        for term, tf in counts.items():
            vec += (tf * idf[term]) * sign_vectors[term]
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
    return DenseIndex(
        doc_vectors=vectors,
        projection_seed=seed,
        idf=idf,
        dimension=dimension,
        docids=docids,
        sign_vectors=sign_vectors,
    )


def dense_search(index: DenseIndex, query: str, k: int) -> RankedList:
    """Exhaustive cosine top-k; ties break toward the lower internal index."""
    if k < 1:
        raise ContractViolation("k must be >= 1")
    qvec = index.embed(query)
    if not np.any(qvec):
        return ranked_list(query, [])
    scores = index.doc_vectors @ qvec
    k = min(k, len(scores))
    order = np.lexsort((np.arange(len(scores)), -scores))[:k]
    return ranked_list(query, [(index.docids[i], float(scores[i])) for i in order])


class Bm25Searcher:
    """Adapter giving the BM25 index the common search(query, k) surface."""

    name = "bm25"

    def __init__(self, index: Bm25Index):
        self.index = index

    @property
    def docids(self) -> tuple[str, ...]:
        return self.index.docids

    def search(self, query: str, k: int) -> RankedList:
        return bm25_search(self.index, query, k)


class DenseSearcher:
    name = "dense"

    def __init__(self, index: DenseIndex):
        self.index = index

    @property
    def docids(self) -> tuple[str, ...]:
        return self.index.docids

    def search(self, query: str, k: int) -> RankedList:
        return dense_search(self.index, query, k)


class ReferenceScorer:
    """Pointwise (query, text) relevance scorer used as the probe oracle.

    Deterministic, independent of the system under test; ``dense-cosine``
    is the default stand-in for a heavyweight reranker.
    """

    def __init__(self, name: str, bm25_index: Bm25Index | None = None, dense_index: DenseIndex | None = None):
        if name == "bm25":
            if bm25_index is None:
                raise ConfigError("bm25 reference scorer needs a BM25 index")
        elif name == "dense-cosine":
            if dense_index is None:
                raise ConfigError("dense-cosine reference scorer needs a dense index")
        else:
            raise ConfigError(f"unknown reference scorer {name!r}")
        self.name = name
        self._bm25 = bm25_index
        self._dense = dense_index
        self._query_cache: dict[str, np.ndarray] = {}

    def _query_vec(self, query: str) -> np.ndarray:
        vec = self._query_cache.get(query)
        if vec is None:
            vec = self._dense.embed(query)
            self._query_cache[query] = vec
        return vec

    def score(self, query: str, text: str) -> float:
        if self.name == "bm25":
            return bm25_score_text(self._bm25, query, text)
        return float(self._query_vec(query) @ self._dense.embed(text))
