"""Documents, identifier assignment and text segmentation.

The corpus is the shared substrate of the lab: every retriever, the data
builder and the probes operate on the same tokenization so that scores and
filters are comparable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence

from .errors import ConsistencyError, ContractViolation, ParseError

# Lowercased alphanumeric runs (underscore included); punctuation acts as a
# separator.  Deterministic and dependency-free.
TOKEN_PATTERN = r"\w+"
_TOKEN_RE = re.compile(TOKEN_PATTERN, re.UNICODE)
_WS_RE = re.compile(r"\s+")

NAIVE = "naive"
SEMANTIC = "semantic"


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces and strip the ends."""
    return _WS_RE.sub(" ", text).strip()


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character (start, end) span of every token, in order."""
    return [m.span() for m in _TOKEN_RE.finditer(text.lower())]


@dataclass(frozen=True)
class Document:
    internal_index: int
    text: str
    external_key: str | None = None


@dataclass(frozen=True)
class DocId:
    """Identifier string over the digit alphabet, naive or semantic."""

    id_string: str
    scheme: str

    def __post_init__(self):
        if not self.id_string or not self.id_string.isdigit():
            raise ContractViolation(f"docid must be a non-empty digit string, got {self.id_string!r}")
        if self.scheme not in (NAIVE, SEMANTIC):
            raise ContractViolation(f"unknown docid scheme {self.scheme!r}")


@dataclass(frozen=True)
class Segment:
    """A contiguous token range of one document.

    ``text`` is the original character span covering the tokens, so sentence
    punctuation is preserved for downstream pseudo-query extraction.
    """

    source_doc: int
    start_token: int
    token_length: int
    text: str


@dataclass(frozen=True)
class TokenizerConfig:
    lowercase: bool = True
    token_pattern: str = TOKEN_PATTERN


@dataclass(frozen=True)
class Corpus:
    """Immutable document collection with an optional docid map."""

    documents: tuple[Document, ...]
    ids: dict[int, DocId] | None = None
    tokenizer_config: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __len__(self) -> int:
        return len(self.documents)

    @cached_property
    def doc_tokens(self) -> list[list[str]]:
        return [tokenize(d.text) for d in self.documents]

    @cached_property
    def index_by_id(self) -> dict[str, int]:
        ids = self.require_ids()
        return {docid.id_string: i for i, docid in ids.items()}

    def require_ids(self) -> dict[int, DocId]:
        if self.ids is None:
            raise ConsistencyError("corpus has no docids assigned yet")
        return self.ids

    def id_string(self, internal_index: int) -> str:
        return self.require_ids()[internal_index].id_string


def ingest(lines: Iterable[str]) -> Corpus:
    """Build a corpus from JSONL records with fields "text" and optional "docid".

    Internal indices are dense and follow input order.  Blank lines are
    skipped; malformed JSON or empty text raises :class:`ParseError` carrying
    the offending line number.
    """
    documents: list[Document] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", line_no) from exc
        if not isinstance(record, dict) or "text" not in record:
            raise ParseError('record must be an object with a "text" field', line_no)
        text = normalize_text(str(record["text"]))
        if not text:
            raise ParseError("record has empty text", line_no)
        external_key = record.get("docid")
        documents.append(
            Document(
                internal_index=len(documents),
                text=text,
                external_key=None if external_key is None else str(external_key),
            )
        )
    return Corpus(documents=tuple(documents))


def assign_naive_ids(corpus: Corpus) -> Corpus:
    """Docid i = decimal string of the internal index, no padding."""
    if len(corpus) == 0:
        raise ContractViolation("cannot assign ids to an empty corpus")
    ids = {i: DocId(str(i), NAIVE) for i in range(len(corpus))}
    return replace(corpus, ids=ids)


def chunk_document(doc: Document, segment_len: int, overlap: int = 0) -> list[Segment]:
    """Split a document into equal-length token segments with overlaps.

    Segments start at offsets 0, s, 2s, ... with stride s = segment_len -
    overlap; the final segment ends exactly at the last token and may be
    shorter.  A document shorter than ``segment_len`` yields one segment.
    """
    if segment_len <= 0:
        raise ContractViolation("segment_len must be positive")
    if overlap < 0 or overlap >= segment_len:
        raise ContractViolation("overlap must satisfy 0 <= overlap < segment_len")
    spans = token_spans(doc.text)
    n = len(spans)
    if n == 0:
        return []
    stride = segment_len - overlap
    segments: list[Segment] = []
    start = 0
    while True:
        end = min(start + segment_len, n)
        text = doc.text[spans[start][0] : spans[end - 1][1]]
        segments.append(
            Segment(source_doc=doc.internal_index, start_token=start, token_length=end - start, text=text)
        )
        if end >= n:
            break
        start += stride
    return segments


def read_jsonl_file(path) -> Corpus:
    with open(path, encoding="utf-8") as handle:
        return ingest(handle)


def write_corpus_jsonl(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for doc in corpus.documents:
            record = {"text": doc.text}
            if doc.external_key is not None:
                record["docid"] = doc.external_key
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def write_ids_json(corpus: Corpus, path) -> None:
    ids = corpus.require_ids()
    payload = {
        "scheme": ids[0].scheme,
        "id_strings": [ids[i].id_string for i in range(len(corpus))],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def read_ids_json(corpus: Corpus, path) -> Corpus:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    strings: Sequence[str] = payload["id_strings"]
    if len(strings) != len(corpus):
        raise ConsistencyError(f"id file has {len(strings)} entries for a corpus of {len(corpus)}")
    scheme = payload["scheme"]
    ids = {i: DocId(s, scheme) for i, s in enumerate(strings)}
    return replace(corpus, ids=ids)
