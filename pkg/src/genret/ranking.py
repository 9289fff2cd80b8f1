"""Ranked result lists, the exchange type between retrievers, probes and metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ContractViolation


@dataclass(frozen=True)
class RankedEntry:
    doc_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    query_key: str
    entries: tuple[RankedEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [e.doc_id for e in self.entries]

    def validate(self) -> None:
        seen = set()
        for i, entry in enumerate(self.entries):
            if entry.rank != i + 1:
                raise ContractViolation(f"ranks must be consecutive from 1, got {entry.rank} at {i}")
            if i and entry.score > self.entries[i - 1].score:
                raise ContractViolation("scores must be non-increasing with rank")
            if entry.doc_id in seen:
                raise ContractViolation(f"duplicate doc_id {entry.doc_id!r}")
            seen.add(entry.doc_id)


def ranked_list(query_key: str, scored: Iterable[tuple[str, float]]) -> RankedList:
    """Build a RankedList from (doc_id, score) pairs already in rank order."""
    entries = tuple(
        RankedEntry(doc_id=doc_id, score=float(score), rank=i + 1) for i, (doc_id, score) in enumerate(scored)
    )
    return RankedList(query_key=query_key, entries=entries)


def to_trec_lines(runs: Sequence[RankedList], tag: str = "genret") -> list[str]:
    """`qid Q0 docid rank score tag` lines, one per entry."""
    lines = []
    for run in runs:
        for entry in run.entries:
            lines.append(f"{run.query_key} Q0 {entry.doc_id} {entry.rank} {entry.score:.6f} {tag}")
    return lines


def write_trec_run(runs: Sequence[RankedList], path, tag: str = "genret") -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for line in to_trec_lines(runs, tag):
            handle.write(line + "\n")


def read_trec_run(path) -> list[RankedList]:
    """Parse a TREC run file back into RankedLists, grouped by query."""
    by_query: dict[str, list[tuple[int, str, float]]] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ContractViolation(f"malformed run line: {line.rstrip()!r}")
            qid, _, docid, rank, score, _ = parts
            if qid not in by_query:
                by_query[qid] = []
                order.append(qid)
            by_query[qid].append((int(rank), docid, float(score)))
    runs = []
    for qid in order:
        entries = sorted(by_query[qid])
        runs.append(ranked_list(qid, [(docid, score) for _, docid, score in entries]))
    return runs
