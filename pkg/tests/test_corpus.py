from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genret.corpus import (
    Document,
    ingest,
    assign_naive_ids,
    chunk_document,
    normalize_text,
    tokenize,
)
from genret.errors import ContractViolation, ParseError

from textgen import natural_corpus


def test_ingest_preserves_order():
    lines = [json.dumps({"text": f"doc number {i}"}) for i in range(3)]
    corpus = ingest(lines)
    assert len(corpus) == 3
    assert [d.internal_index for d in corpus.documents] == [0, 1, 2]
    assert corpus.documents[2].text == "doc number 2"


def test_ingest_keeps_external_keys_and_normalizes_whitespace():
    corpus = ingest(['{"docid": "k1", "text": "  hello\\n\\tworld  "}'])
    assert corpus.documents[0].external_key == "k1"
    assert corpus.documents[0].text == "hello world"


def test_ingest_missing_text_reports_line_number():
    lines = ['{"text": "fine"}', '{"docid": "x"}']
    with pytest.raises(ParseError) as err:
        ingest(lines)
    assert err.value.line_number == 2


def test_ingest_malformed_json_reports_line_number():
    with pytest.raises(ParseError) as err:
        ingest(['{"text": "ok"}', "{not json"])
    assert err.value.line_number == 2


def test_ingest_empty_text_rejected():
    with pytest.raises(ParseError) as err:
        ingest(['{"text": "   "}'])
    assert err.value.line_number == 1


def test_ingest_100k_records():
    lines = (json.dumps({"text": f"tiny doc {i}"}) for i in range(100_000))
    corpus = ingest(lines)
    assert len(corpus) == 100_000
    assert corpus.documents[99_999].text == "tiny doc 99999"


def test_naive_ids_enumerate():
    corpus = assign_naive_ids(ingest([json.dumps({"text": f"d {i}"}) for i in range(3)]))
    assert [corpus.id_string(i) for i in range(3)] == ["0", "1", "2"]


def test_naive_ids_no_padding():
    corpus = assign_naive_ids(ingest([json.dumps({"text": f"d {i}"}) for i in range(12)]))
    assert corpus.id_string(11) == "11"


def test_naive_ids_injective_at_10k():
    corpus = assign_naive_ids(ingest(json.dumps({"text": f"d {i}"}) for i in range(10_000)))
    ids = {corpus.id_string(i) for i in range(len(corpus))}
    assert len(ids) == 10_000


def test_chunk_stride_arithmetic():
    doc = Document(0, " ".join(f"t{i}" for i in range(10)))
    segments = chunk_document(doc, segment_len=4, overlap=2)
    assert [s.start_token for s in segments] == [0, 2, 4, 6]
    assert all(s.token_length == 4 for s in segments)
    assert segments[-1].start_token + segments[-1].token_length == 10


def test_chunk_short_document():
    doc = Document(0, "only three tokens")
    segments = chunk_document(doc, segment_len=8, overlap=0)
    assert len(segments) == 1
    assert segments[0].token_length == 3


def test_chunk_rejects_bad_overlap():
    doc = Document(0, "a b c d")
    with pytest.raises(ContractViolation):
        chunk_document(doc, segment_len=4, overlap=4)


def test_chunk_text_matches_token_slice():
    corpus = natural_corpus(5, seed=3)
    for doc in corpus.documents:
        tokens = tokenize(doc.text)
        for segment in chunk_document(doc, 7, 3):
            assert tokenize(segment.text) == tokens[segment.start_token : segment.start_token + segment.token_length]


def test_chunk_coverage_on_random_docs():
    corpus = natural_corpus(50, seed=9)
    for doc in corpus.documents:
        n = len(tokenize(doc.text))
        covered = set()
        for segment in chunk_document(doc, 6, 2):
            covered.update(range(segment.start_token, segment.start_token + segment.token_length))
        assert covered == set(range(n))


@settings(max_examples=60, deadline=None)
@given(
    n_tokens=st.integers(min_value=1, max_value=60),
    segment_len=st.integers(min_value=1, max_value=20),
    overlap_frac=st.floats(min_value=0.0, max_value=0.99),
)
def test_chunk_properties(n_tokens, segment_len, overlap_frac):
    overlap = int(segment_len * overlap_frac)
    doc = Document(0, " ".join(f"tok{i}" for i in range(n_tokens)))
    first = chunk_document(doc, segment_len, overlap)
    second = chunk_document(doc, segment_len, overlap)
    assert first == second  # determinism
    covered = set()
    stride = segment_len - overlap
    for i, segment in enumerate(first):
        assert segment.start_token == i * stride
        covered.update(range(segment.start_token, segment.start_token + segment.token_length))
    assert covered == set(range(n_tokens))
    assert first[-1].start_token + first[-1].token_length == n_tokens
    for segment in first[:-1]:
        assert segment.token_length == segment_len


def test_normalize_text():
    assert normalize_text(" a\t b\nc ") == "a b c"
