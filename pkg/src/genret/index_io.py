"""On-disk index format: a manifest plus binary postings/vector files.

Layout of an index directory:
    manifest.json   magic string, index type, parameters, docids
    arrays.npz      postings arrays (bm25) or doc vectors (dense)
    vocab.json      term table aligned with the idf array
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DependencyError, ParseError
from .retrievers import Bm25Index, DenseIndex, _sign_vector

MAGIC = "genret-index-v1"


def _write_manifest(path: Path, payload: dict) -> None:
    payload = {"magic": MAGIC, **payload}
    (path / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_manifest(path: Path) -> dict:
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise DependencyError(f"missing index manifest: {manifest_path}")
    payload = json.loads(manifest_path.read_text(encoding="utf-8"))
    if payload.get("magic") != MAGIC:
        raise ParseError(f"not a {MAGIC} directory: {path}", 1)
    return payload


def save_bm25_index(index: Bm25Index, directory, extra: dict | None = None) -> None:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    vocab = sorted(index.postings)
    term_offsets = [0]
    docs: list[int] = []
    tfs: list[int] = []
    for term in vocab:
        for doc, tf in index.postings[term]:
            docs.append(doc)
            tfs.append(tf)
        term_offsets.append(len(docs))
    np.savez(
        path / "arrays.npz",
        offsets=np.asarray(term_offsets, dtype=np.int64),
        docs=np.asarray(docs, dtype=np.int64),
        tfs=np.asarray(tfs, dtype=np.int64),
        doc_lengths=np.asarray(index.doc_lengths, dtype=np.int64),
        idf=np.asarray([index.idf[t] for t in vocab]),
    )
    (path / "vocab.json").write_text(json.dumps(vocab), encoding="utf-8")
    _write_manifest(
        path,
        {
            "type": "bm25",
            "k1": index.k1,
            "b": index.b,
            "n_docs": index.n_docs,
            "avg_doc_len": index.avg_doc_len,
            "docids": list(index.docids),
            **(extra or {}),
        },
    )


def save_dense_index(index: DenseIndex, directory, extra: dict | None = None) -> None:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    vocab = sorted(index.idf)
    np.savez(
        path / "arrays.npz",
        doc_vectors=index.doc_vectors,
        idf=np.asarray([index.idf[t] for t in vocab]),
    )
    (path / "vocab.json").write_text(json.dumps(vocab), encoding="utf-8")
    _write_manifest(
        path,
        {
            "type": "dense",
            "dimension": index.dimension,
            "projection_seed": index.projection_seed,
            "docids": list(index.docids),
            **(extra or {}),
        },
    )


def load_index(directory) -> Bm25Index | DenseIndex:
    path = Path(directory)
    manifest = _read_manifest(path)
    arrays = np.load(path / "arrays.npz")
    vocab = json.loads((path / "vocab.json").read_text(encoding="utf-8"))
    docids = tuple(manifest["docids"])
    if manifest["type"] == "bm25":
        offsets = arrays["offsets"]
        docs = arrays["docs"]
        tfs = arrays["tfs"]
        postings = {
            term: [(int(d), int(t)) for d, t in zip(docs[offsets[i] : offsets[i + 1]], tfs[offsets[i] : offsets[i + 1]])]
            for i, term in enumerate(vocab)
        }
        idf = {term: float(v) for term, v in zip(vocab, arrays["idf"])}
        return Bm25Index(
            postings=postings,
            doc_lengths=[int(x) for x in arrays["doc_lengths"]],
            avg_doc_len=float(manifest["avg_doc_len"]),
            n_docs=int(manifest["n_docs"]),
            k1=float(manifest["k1"]),
            b=float(manifest["b"]),
            idf=idf,
            docids=docids,
        )
    if manifest["type"] == "dense":
        dimension = int(manifest["dimension"])
        seed = int(manifest["projection_seed"])
        idf = {term: float(v) for term, v in zip(vocab, arrays["idf"])}
        sign_vectors = {term: _sign_vector(seed, term, dimension) for term in vocab}
        return DenseIndex(
            doc_vectors=arrays["doc_vectors"],
            projection_seed=seed,
            idf=idf,
            dimension=dimension,
            docids=docids,
            sign_vectors=sign_vectors,
        )
    raise ParseError(f"unknown index type {manifest['type']!r}", 1)
