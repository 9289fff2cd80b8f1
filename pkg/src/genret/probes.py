"""The three analytical probes: exclusivity, completeness, relevance ordering.

Each probe treats the system under test as an opaque ``search(query, k)``
handle, so sparse, dense and generative systems are probed identically.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, chunk_document
from .errors import ContractViolation
from .retrievers import ReferenceScorer

log = logging.getLogger(__name__)

DEFAULT_CUTOFFS = (16, 32, 64, 128)


@dataclass(frozen=True)
class ProbeReport:
    probe_name: str
    values: dict[str, float]
    sample_count: int

    def to_tsv(self) -> str:
        lines = [f"# probe={self.probe_name}\tsamples={self.sample_count}"]
        for key, value in self.values.items():
            lines.append(f"{key}\t{value:.6f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RosCurve:
    values: tuple[float, ...]  # mean ros per position 1..p_max
    counts: tuple[int, ...]  # contributing queries per position
    n_random: int

    @property
    def p_max(self) -> int:
        return len(self.values)

    def to_tsv(self) -> str:
        lines = [f"# probe=ros\tn_random={self.n_random}"]
        for p, (value, count) in enumerate(zip(self.values, self.counts), start=1):
            lines.append(f"{p}\t{value:.6f}\t{count}")
        return "\n".join(lines) + "\n"


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def exclusivity_probe(
    system,
    corpus: Corpus,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    pseudo_queries: Sequence[tuple[str, str]] | None = None,
    sample_size: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> ProbeReport:
    """Hits@1 of self-retrieval from each document's own leading tokens.

    Every document (or a seeded sample) is queried with its first L tokens
    for each cutoff L; when pseudo queries are supplied their Hits@1 is
    reported alongside under the key "pseudo".
    """
    for cutoff in cutoffs:
        if cutoff <= 0:
            raise ContractViolation("cutoffs must be positive token counts")
    doc_indices = [i for i in range(len(corpus)) if corpus.doc_tokens[i]]
    if sample_size is not None and sample_size < len(doc_indices):
        rng = np.random.default_rng(seed)
        doc_indices = sorted(rng.choice(doc_indices, size=sample_size, replace=False).tolist())
    if not doc_indices:
        raise ContractViolation("no documents with tokens to probe")

    values: dict[str, float] = {}
    for cutoff in cutoffs:
        def self_hit(i: int, cutoff=cutoff) -> int:
            query = " ".join(corpus.doc_tokens[i][:cutoff])
            result = system.search(query, 1)
            return int(bool(result.entries) and result.entries[0].doc_id == corpus.id_string(i))

        hits = _pmap(self_hit, doc_indices, threads)
        values[f"cutoff_{cutoff}"] = sum(hits) / len(doc_indices)

    if pseudo_queries:
        def pq_hit(pair: tuple[str, str]) -> int:
            text, owner = pair
            result = system.search(text, 1)
            return int(bool(result.entries) and result.entries[0].doc_id == owner)

        hits = _pmap(pq_hit, list(pseudo_queries), threads)
        values["pseudo"] = sum(hits) / len(pseudo_queries)
    return ProbeReport(probe_name="exclusivity", values=values, sample_count=len(doc_indices))


def completeness_probe(
    system,
    corpus: Corpus,
    queries: Mapping[str, str] | Sequence[tuple[str, str]],
    reference: ReferenceScorer,
    chunk_len: int = 16,
    overlap: int = 4,
    top_chunks: int = 3,
    threads: int = 1,
) -> ProbeReport:
    """Hits@1/@10 of retrieving a document from its best reference-scored chunks.

    For each (query, owner) pair the owner document is chunked, the
    ``top_chunks`` chunks by reference score are issued as queries, and the
    best resulting rank of the owner counts toward Hits@1 and Hits@10.
    """
    pairs = list(queries.items()) if isinstance(queries, Mapping) else list(queries)
    if not pairs:
        raise ContractViolation("completeness probe needs at least one query")
    if top_chunks < 1:
        raise ContractViolation("top_chunks must be >= 1")
    index_by_id = corpus.index_by_id
    evaluated: list[tuple[str, int]] = []
    for query, owner in pairs:
        if owner not in index_by_id:
            raise ContractViolation(f"query owner {owner!r} not in the corpus id map")
        doc_index = index_by_id[owner]
        if not corpus.doc_tokens[doc_index]:
            log.warning("skipping completeness query %r: owner document has no tokens", query[:40])
            continue
        evaluated.append((query, doc_index))

    def best_rank(pair: tuple[str, int]) -> int | None:
        query, doc_index = pair
        owner_id = corpus.id_string(doc_index)
        chunks = chunk_document(corpus.documents[doc_index], chunk_len, overlap)
        ordered = sorted(chunks, key=lambda c: (-reference.score(query, c.text), c.start_token))
        best: int | None = None
        for chunk in ordered[:top_chunks]:
            ids = system.search(chunk.text, 10).doc_ids()
            if owner_id in ids:
                rank = ids.index(owner_id) + 1
                best = rank if best is None else min(best, rank)
        return best

    ranks = _pmap(best_rank, evaluated, threads)
    n = len(evaluated)
    values = {
        "hits@1": sum(1 for r in ranks if r == 1) / n,
        "hits@10": sum(1 for r in ranks if r is not None and r <= 10) / n,
    }
    return ProbeReport(probe_name="completeness", values=values, sample_count=n)


def ros_probe(
    system,
    reference: ReferenceScorer,
    queries: Sequence[str],
    corpus: Corpus,
    p_max: int = 10,
    n_random: int = 10,
    seed: int = 0,
) -> RosCurve:
    """Relevance-ordering score per result position.

    For each query, ``n_random`` documents are drawn from the corpus
    excluding the system's returned list; the value at position p is the
    count of random documents whose reference score strictly exceeds the
    score of the returned document at p, averaged over the queries that
    returned at least p results.
    """
    if p_max < 1 or n_random < 1:
        raise ContractViolation("p_max and n_random must be >= 1")
    if len(corpus) < p_max + n_random:
        raise ContractViolation(f"corpus of {len(corpus)} docs is smaller than p_max + n_random")
    if not queries:
        raise ContractViolation("ros probe needs at least one query")
    index_by_id = corpus.index_by_id
    rng = np.random.default_rng(seed)
    sums = np.zeros(p_max)
    counts = np.zeros(p_max, dtype=np.int64)
    for query in queries:
        result = system.search(query, p_max)
        returned = [index_by_id[entry.doc_id] for entry in result.entries]
        excluded = set(returned)
        candidates = [i for i in range(len(corpus)) if i not in excluded]
        random_docs = rng.choice(candidates, size=n_random, replace=False)
        random_scores = [reference.score(query, corpus.documents[int(i)].text) for i in random_docs]
        for p, doc_index in enumerate(returned):
            returned_score = reference.score(query, corpus.documents[doc_index].text)
            sums[p] += sum(1 for s in random_scores if s > returned_score)
            counts[p] += 1
    values = tuple(float(sums[p] / counts[p]) if counts[p] else 0.0 for p in range(p_max))
    return RosCurve(values=values, counts=tuple(int(c) for c in counts), n_random=n_random)
