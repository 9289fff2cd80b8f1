"""Training-data construction: segments, pseudo queries, recall filtering,
distillation targets and multi-task mixing.

The pipeline turns a corpus into text fragments (document segments plus
pseudo queries), keeps only fragments whose teacher recall proves they carry
key information about their owner, and serializes supervision for two tasks:
single-id generation and comma-joined id-list generation.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Segment, chunk_document, tokenize
from .errors import ConsistencyError, ContractViolation
from .retrievers import smoothed_idf

SEGMENT = "segment"
PSEUDO_QUERY = "pseudo_query"
USER_QUERY = "user_query"

INDEX_TASK = "index"
RETRIEVE_TASK = "retrieve"
TASK_PREFIX = {INDEX_TASK: "[I] ", RETRIEVE_TASK: "[R] "}

DEFAULT_FANOUT = 10  # teacher ids per distillation target
DEFAULT_K_SEGMENT = 1
DEFAULT_K_PSEUDO = 5

MODES = ("merge", "distill", "d+m", "multi")

_SENTENCE_RE = re.compile(r"(?<=[.!?;])\s+")


@dataclass(frozen=True)
class PseudoQuery:
    source_segment: Segment
    text: str
    variant_index: int


@dataclass(frozen=True)
class Fragment:
    text: str
    owner_docid: str
    kind: str


@dataclass(frozen=True)
class FragmentPool:
    entries: tuple[Fragment, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def counts(self) -> dict[str, int]:
        return dict(Counter(entry.kind for entry in self.entries))


@dataclass(frozen=True)
class DistillSignal:
    owner: str
    teacher_list: tuple[str, ...]

    def target_string(self, owner: str | None = None) -> str:
        """Owner-first comma-joined target; owner duplicates dropped from the tail."""
        head = self.owner if owner is None else owner
        return ",".join([head] + [d for d in self.teacher_list if d != head])


@dataclass(frozen=True)
class TrainingExample:
    task: str
    input_text: str
    target: str


def corpus_idf(corpus: Corpus) -> dict[str, float]:
    doc_freq: Counter[str] = Counter()
    for tokens in corpus.doc_tokens:
        doc_freq.update(set(tokens))
    n = len(corpus)
    return {term: smoothed_idf(n, df) for term, df in doc_freq.items()}


def generate_pseudo_queries(
    segment: Segment,
    idf: dict[str, float],
    n_variants: int = 1,
    max_len: int = 16,
    dropout_p: float = 0.0,
    seed: int = 0,
) -> list[PseudoQuery]:
    """Extractive pseudo queries for one segment.

    Variant 0 is the segment's highest-IDF-mass sentence truncated to
    ``max_len`` tokens; later variants drop each of its tokens independently
    with probability ``dropout_p`` (never all: the highest-IDF token stays).
    """
    if n_variants < 1:
        raise ContractViolation("n_variants must be >= 1")
    if not 0.0 <= dropout_p < 1.0:
        raise ContractViolation("dropout_p must be in [0, 1)")
    sentences = [s for s in _SENTENCE_RE.split(segment.text) if tokenize(s)]
    if not sentences:
        raise ContractViolation("segment has no tokens")
    best_tokens: list[str] | None = None
    best_mass = -1.0
    for sentence in sentences:
        tokens = tokenize(sentence)
        mass = sum(idf.get(t, 0.0) for t in tokens)
        if mass > best_mass:
            best_mass = mass
            best_tokens = tokens
    base = best_tokens[:max_len]
    keep_token = max(range(len(base)), key=lambda i: (idf.get(base[i], 0.0), -i))

    queries = [PseudoQuery(source_segment=segment, text=" ".join(base), variant_index=0)]
    for variant in range(1, n_variants):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(variant,)))
        kept = [t for t in base if rng.random() >= dropout_p]
        if not kept:
            kept = [base[keep_token]]
        queries.append(PseudoQuery(source_segment=segment, text=" ".join(kept), variant_index=variant))
    return queries


def filter_key_fragments(
    pool: FragmentPool,
    teacher,
    k_segment: int = DEFAULT_K_SEGMENT,
    k_pseudo: int = DEFAULT_K_PSEUDO,
) -> FragmentPool:
    """Keep fragments whose teacher recall contains their owner within k.

    k is ``k_segment`` for document segments and ``k_pseudo`` for pseudo
    queries; user queries pass unconditionally.  Input order is preserved.
    """
    known = set(teacher.docids)
    kept: list[Fragment] = []
    for entry in pool.entries:
        if entry.kind == USER_QUERY:
            kept.append(entry)
            continue
        if entry.owner_docid not in known:
            raise ConsistencyError(f"fragment owner {entry.owner_docid!r} unknown to the teacher")
        k = k_segment if entry.kind == SEGMENT else k_pseudo
        if entry.owner_docid in teacher.search(entry.text, k).doc_ids():
            kept.append(entry)
    return FragmentPool(entries=tuple(kept))


def build_distill_signal(fragment_text: str, owner: str, teacher, fanout: int = DEFAULT_FANOUT) -> DistillSignal:
    result = teacher.search(fragment_text, fanout)
    return DistillSignal(owner=owner, teacher_list=tuple(result.doc_ids()))


def build_signals(pool: FragmentPool, teacher, fanout: int = DEFAULT_FANOUT) -> dict[str, DistillSignal]:
    """One distillation signal per distinct fragment text in the pool."""
    signals: dict[str, DistillSignal] = {}
    for entry in pool.entries:
        if entry.text not in signals:
            signals[entry.text] = build_distill_signal(entry.text, entry.owner_docid, teacher, fanout)
    return signals


def _index_example(entry: Fragment) -> TrainingExample:
    return TrainingExample(
        task=INDEX_TASK,
        input_text=TASK_PREFIX[INDEX_TASK] + entry.text,
        target=entry.owner_docid,
    )


def _retrieve_example(entry: Fragment, signals: dict[str, DistillSignal]) -> TrainingExample:
    signal = signals.get(entry.text)
    if signal is None:
        raise ConsistencyError(f"no distillation signal for fragment {entry.text[:40]!r}")
    return TrainingExample(
        task=RETRIEVE_TASK,
        input_text=TASK_PREFIX[RETRIEVE_TASK] + entry.text,
        target=signal.target_string(owner=entry.owner_docid),
    )


def index_examples(pool: FragmentPool) -> list[TrainingExample]:
    return [_index_example(entry) for entry in pool.entries]


def retrieve_examples(pool: FragmentPool, signals: dict[str, DistillSignal]) -> list[TrainingExample]:
    return [_retrieve_example(entry, signals) for entry in pool.entries]


def mix_multitask(pool: FragmentPool, signals: dict[str, DistillSignal], seed: int = 0):
    """Yield one example per fragment, task drawn index/retrieve with p=0.5."""
    rng = np.random.default_rng(seed)
    for entry in pool.entries:
        if rng.random() < 0.5:
            yield _index_example(entry)
        else:
            yield _retrieve_example(entry, signals)


def build_mode_examples(
    pool: FragmentPool,
    signals: dict[str, DistillSignal],
    mode: str,
    seed: int = 0,
) -> list[list[TrainingExample]]:
    """Training phases for a pipeline mode (one phase except for d+m)."""
    if mode == "merge":
        return [index_examples(pool)]
    if mode == "distill":
        return [retrieve_examples(pool, signals)]
    if mode == "multi":
        return [list(mix_multitask(pool, signals, seed))]
    if mode == "d+m":
        return [index_examples(pool), retrieve_examples(pool, signals)]
    raise ContractViolation(f"unknown pipeline mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class BuilderConfig:
    segment_len: int = 48
    overlap: int = 8
    n_variants: int = 1
    pq_max_len: int = 16
    dropout_p: float = 0.0
    k_segment: int = DEFAULT_K_SEGMENT
    k_pseudo: int = DEFAULT_K_PSEUDO
    fanout: int = DEFAULT_FANOUT
    filter_fragments: bool = True
    seed: int = 0


def build_training_set(
    corpus: Corpus,
    teacher,
    config: BuilderConfig,
    user_queries: list[tuple[str, str]] | None = None,
    pq_overrides: dict[str, list[str]] | None = None,
) -> tuple[FragmentPool, dict[str, int]]:
    """Chunk, generate pseudo queries, filter, and append user queries.

    ``pq_overrides`` maps a document key (external key or docid) to
    externally supplied pseudo queries that replace the generated ones for
    that document.  Returns the final pool plus a count report.
    """
    ids = corpus.require_ids()
    idf = corpus_idf(corpus)
    overrides_by_index: dict[int, list[str]] = {}
    if pq_overrides:
        key_to_index: dict[str, int] = {}
        for doc in corpus.documents:
            if doc.external_key is not None:
                key_to_index[doc.external_key] = doc.internal_index
        for i, docid in ids.items():
            key_to_index.setdefault(docid.id_string, i)
        for key, queries in pq_overrides.items():
            if key not in key_to_index:
                raise ConsistencyError(f"pseudo-query override for unknown document key {key!r}")
            overrides_by_index[key_to_index[key]] = queries

    segments: list[Fragment] = []
    pseudo: list[Fragment] = []
    for doc in corpus.documents:
        owner = ids[doc.internal_index].id_string
        doc_segments = chunk_document(doc, config.segment_len, config.overlap)
        for segment in doc_segments:
            segments.append(Fragment(text=segment.text, owner_docid=owner, kind=SEGMENT))
        if doc.internal_index in overrides_by_index:
            for text in overrides_by_index[doc.internal_index]:
                pseudo.append(Fragment(text=text, owner_docid=owner, kind=PSEUDO_QUERY))
            continue
        for ordinal, segment in enumerate(doc_segments):
            seg_seed = np.random.SeedSequence(
                config.seed, spawn_key=(doc.internal_index, ordinal)
            ).generate_state(1)[0]
            for pq in generate_pseudo_queries(
                segment,
                idf,
                n_variants=config.n_variants,
                max_len=config.pq_max_len,
                dropout_p=config.dropout_p,
                seed=int(seg_seed),
            ):
                pseudo.append(Fragment(text=pq.text, owner_docid=owner, kind=PSEUDO_QUERY))

    union = FragmentPool(entries=tuple(segments + pseudo))
    if config.filter_fragments:
        filtered = filter_key_fragments(union, teacher, config.k_segment, config.k_pseudo)
    else:
        filtered = union
    final_entries = list(filtered.entries)
    for text, owner in user_queries or []:
        if owner not in corpus.index_by_id:
            raise ConsistencyError(f"user query owner {owner!r} not in the corpus id map")
        final_entries.append(Fragment(text=text, owner_docid=owner, kind=USER_QUERY))
    pool = FragmentPool(entries=tuple(final_entries))

    report = {"union": len(union), "kept": len(filtered), **pool.counts()}
    report.setdefault(SEGMENT, 0)
    report.setdefault(PSEUDO_QUERY, 0)
    report.setdefault(USER_QUERY, 0)
    return pool, report


def write_examples_jsonl(examples, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(
                json.dumps(
                    {"task": example.task, "input": example.input_text, "target": example.target},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_examples_jsonl(path) -> list[TrainingExample]:
    examples = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            examples.append(
                TrainingExample(task=record["task"], input_text=record["input"], target=record["target"])
            )
    return examples


def read_pseudo_query_tsv(path) -> dict[str, list[str]]:
    """`doc_key<TAB>query_text` lines; multiple lines per key accumulate."""
    overrides: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, text = line.partition("\t")
            overrides.setdefault(key, []).append(text)
    return overrides


def read_queries_tsv(path) -> list[tuple[str, str]]:
    """`query_text<TAB>owner_docid` lines used as labeled user queries."""
    queries = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.rstrip("\n")
            if not line:
                continue
            text, _, owner = line.rpartition("\t")
            queries.append((text, owner))
    return queries
