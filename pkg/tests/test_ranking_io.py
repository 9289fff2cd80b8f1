from __future__ import annotations

import json

import numpy as np
import pytest

from genret.corpus import assign_naive_ids, ingest
from genret.errors import ContractViolation, DependencyError, ParseError
from genret.index_io import load_index, save_bm25_index, save_dense_index
from genret.ranking import RankedEntry, RankedList, ranked_list, read_trec_run, to_trec_lines, write_trec_run
from genret.retrievers import bm25_search, build_bm25_index, build_dense_index, dense_search

from textgen import natural_corpus


def test_ranked_list_builder_and_validation():
    rl = ranked_list("q1", [("5", 2.0), ("3", 1.5), ("9", 1.5)])
    rl.validate()
    assert [e.rank for e in rl.entries] == [1, 2, 3]
    assert rl.doc_ids() == ["5", "3", "9"]


def test_ranked_list_rejects_increasing_scores():
    rl = RankedList("q", (RankedEntry("1", 1.0, 1), RankedEntry("2", 2.0, 2)))
    with pytest.raises(ContractViolation):
        rl.validate()


def test_ranked_list_rejects_duplicates():
    rl = RankedList("q", (RankedEntry("1", 1.0, 1), RankedEntry("1", 0.5, 2)))
    with pytest.raises(ContractViolation):
        rl.validate()


def test_ranked_list_rejects_bad_ranks():
    rl = RankedList("q", (RankedEntry("1", 1.0, 2),))
    with pytest.raises(ContractViolation):
        rl.validate()


def test_trec_lines_format():
    rl = ranked_list("q7", [("12", 3.25), ("4", 1.0)])
    lines = to_trec_lines([rl], tag="mytag")
    assert lines[0] == "q7 Q0 12 1 3.250000 mytag"
    assert lines[1] == "q7 Q0 4 2 1.000000 mytag"


def test_trec_round_trip(tmp_path):
    runs = [ranked_list("qa", [("1", 2.5), ("2", 1.5)]), ranked_list("qb", [("3", 9.0)])]
    path = tmp_path / "run.trec"
    write_trec_run(runs, path)
    back = read_trec_run(path)
    assert [r.query_key for r in back] == ["qa", "qb"]
    assert back[0].doc_ids() == ["1", "2"]
    assert back[0].entries[0].score == pytest.approx(2.5)


def test_bm25_index_round_trip(tmp_path):
    corpus = natural_corpus(25, seed=14)
    index = build_bm25_index(corpus)
    save_bm25_index(index, tmp_path / "bm25")
    loaded = load_index(tmp_path / "bm25")
    for query in ("uq3x1", corpus.documents[5].text, "nothing matches here"):
        a = bm25_search(index, query, 10)
        b = bm25_search(loaded, query, 10)
        assert a.doc_ids() == b.doc_ids()
        assert [e.score for e in a.entries] == pytest.approx([e.score for e in b.entries], rel=1e-12)


def test_dense_index_round_trip(tmp_path):
    corpus = natural_corpus(25, seed=15)
    index = build_dense_index(corpus, dimension=48, seed=3)
    save_dense_index(index, tmp_path / "dense")
    loaded = load_index(tmp_path / "dense")
    assert np.allclose(index.doc_vectors, loaded.doc_vectors)
    query = corpus.documents[3].text
    assert dense_search(index, query, 5).doc_ids() == dense_search(loaded, query, 5).doc_ids()


def test_load_index_missing_manifest(tmp_path):
    with pytest.raises(DependencyError):
        load_index(tmp_path / "nothing")


def test_load_index_bad_magic(tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text(json.dumps({"magic": "other"}))
    with pytest.raises(ParseError):
        load_index(bad)
