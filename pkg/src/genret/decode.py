"""Trie-constrained generation: beam search for single docids and
comma-joined docid lists."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data_builder import INDEX_TASK, RETRIEVE_TASK, TASK_PREFIX
from .errors import ContractViolation
from .model import TinyGenModel, encode, step_logits
from .ranking import RankedList, ranked_list
from .symbols import BOS, COMMA, EOS
from .trie import DocidTrie, TrieNode

log = logging.getLogger(__name__)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    zmax = logits.max()
    return logits - (zmax + np.log(np.exp(logits - zmax).sum()))


@dataclass
class _Beam:
    logp: float
    node: TrieNode
    prev: int
    emitted: str  # digit/comma characters so far
    cums: tuple[float, ...]  # cumulative logp after each emitted symbol


def _prefixed(query: str, task: str) -> str:
    prefix = TASK_PREFIX[task]
    return query if query.startswith(prefix) else prefix + query


def generate(
    model: TinyGenModel,
    query: str,
    task: str,
    trie: DocidTrie,
    beam: int = 10,
    k: int = 10,
) -> RankedList:
    """Decode docids for a query; every emitted id is a valid corpus id.

    Index task: beam search over single ids, top-k finished beams by total
    log-probability.  Retrieve task: beam decode of one comma-joined list
    (the comma resets the trie cursor); the best sequence is parsed into
    ids, deduplicated keeping the first occurrence, truncated to k, with
    per-id scores the cumulative log-probability through that id.
    """
    if task not in (INDEX_TASK, RETRIEVE_TASK):
        raise ContractViolation(f"unknown task {task!r}")
    if beam < 1 or k < 1:
        raise ContractViolation("beam and k must be >= 1")
    if task == INDEX_TASK and beam < k:
        raise ContractViolation("index task requires beam >= k")
    enc = encode(model, _prefixed(query, task))
    if task == INDEX_TASK:
        return _generate_index(model, query, enc, trie, beam, k)
    return _generate_retrieve(model, query, enc, trie, beam, k)


def _generate_index(model, query, enc, trie, beam, k) -> RankedList:
    max_pos = model.config.max_positions
    active = [_Beam(0.0, trie.root, BOS, "", ())]
    finished: list[tuple[float, str]] = []
    for pos in range(max_pos):
        candidates: list[_Beam] = []
        for item in active:
            logprobs = _log_softmax(step_logits(model, enc, item.prev, pos))
            if item.node.terminal:
                finished.append((item.logp + float(logprobs[EOS]), item.emitted))
            for digit in sorted(item.node.children):
                candidates.append(
                    _Beam(
                        logp=item.logp + float(logprobs[digit]),
                        node=item.node.children[digit],
                        prev=digit,
                        emitted=item.emitted + str(digit),
                        cums=(),
                    )
                )
        if not candidates:
            break
        candidates.sort(key=lambda b: (-b.logp, b.emitted))
        active = candidates[:beam]
    else:
        if active:
            log.warning("index decode hit the position limit (%d); dropping %d open beams", max_pos, len(active))
    finished.sort(key=lambda item: (-item[0], item[1]))
    seen: set[str] = set()
    top: list[tuple[str, float]] = []
    for score, docid in finished:
        if docid not in seen:
            seen.add(docid)
            top.append((docid, score))
        if len(top) == k:
            break
    return ranked_list(query, top)


def _generate_retrieve(model, query, enc, trie, beam, k) -> RankedList:
    max_pos = model.config.max_positions
    active = [_Beam(0.0, trie.root, BOS, "", ())]
    finished: list[_Beam] = []
    truncated = False
    for pos in range(max_pos):
        candidates: list[_Beam] = []
        for item in active:
            logprobs = _log_softmax(step_logits(model, enc, item.prev, pos))
            if item.node.terminal:
                finished.append(
                    _Beam(
                        logp=item.logp + float(logprobs[EOS]),
                        node=item.node,
                        prev=EOS,
                        emitted=item.emitted,
                        cums=item.cums,
                    )
                )
                if pos + 1 < max_pos:
                    logp = item.logp + float(logprobs[COMMA])
                    candidates.append(
                        _Beam(logp, trie.root, COMMA, item.emitted + ",", item.cums + (logp,))
                    )
            for digit in sorted(item.node.children):
                logp = item.logp + float(logprobs[digit])
                candidates.append(
                    _Beam(logp, item.node.children[digit], digit, item.emitted + str(digit), item.cums + (logp,))
                )
        if not candidates:
            break
        candidates.sort(key=lambda b: (-b.logp, b.emitted))
        active = candidates[:beam]
    else:
        truncated = bool(active)

    if finished:
        finished.sort(key=lambda b: (-b.logp, b.emitted))
        best = finished[0]
        complete = True
    elif active:
        log.warning("retrieve decode hit the position limit (%d); truncating", max_pos)
        active.sort(key=lambda b: (-b.logp, b.emitted))
        best = active[0]
        complete = best.node.terminal
    else:
        return ranked_list(query, [])
    if truncated and finished:
        log.warning("retrieve decode dropped %d unfinished beams at the position limit", len(active))

    scored: list[tuple[str, float]] = []
    start = 0
    emitted = best.emitted
    for i, ch in enumerate(emitted + ","):
        if ch != ",":
            continue
        segment = emitted[start:i]
        # cumulative score through the segment's final digit
        if segment and (i < len(emitted) or complete):
            scored.append((segment, best.cums[i - 1]))
        start = i + 1

    seen: set[str] = set()
    top: list[tuple[str, float]] = []
    for docid, score in scored:
        if docid in seen:
            continue
        seen.add(docid)
        top.append((docid, score))
        if len(top) == k:
            break
    return ranked_list(query, top)


class StudentSearcher:
    """Search adapter over a trained model, matching the retriever surface."""

    def __init__(self, model: TinyGenModel, trie: DocidTrie, task: str = INDEX_TASK, beam: int = 10):
        self.model = model
        self.trie = trie
        self.task = task
        self.beam = beam
        self.name = f"student-{task}"
        self._docids = tuple(trie.iter_docids())

    @property
    def docids(self) -> tuple[str, ...]:
        return self._docids

    def search(self, query: str, k: int) -> RankedList:
        beam = max(self.beam, k) if self.task == INDEX_TASK else self.beam
        return generate(self.model, query, self.task, self.trie, beam=beam, k=k)
