"""Hierarchical-clustering docids built from document embeddings.

Documents are recursively partitioned with seeded k-means; each level
appends the cluster digit to the id prefix, and leaves append a fixed-width
within-leaf index so parsing needs no separators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace

import numpy as np

from .corpus import Corpus, DocId, SEMANTIC
from .errors import ContractViolation

log = logging.getLogger(__name__)

KMEANS_ITERATIONS = 20


def kmeans(points: np.ndarray, k: int, seed: int, n_iter: int = KMEANS_ITERATIONS) -> np.ndarray:
    """Seeded Lloyd k-means; returns a cluster label per row.

    Initialization is farthest-point: the first center is drawn from the
    seeded rng, each next center is the point farthest from all chosen ones.
    Assignment ties break toward the lower cluster index; empty clusters
    keep their previous center.
    """
    n = points.shape[0]
    if k < 1:
        raise ContractViolation("k must be >= 1")
    if n <= k:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    center_idx = [int(rng.integers(n))]
    min_dist = np.linalg.norm(points - points[center_idx[0]], axis=1)
    while len(center_idx) < k:
        nxt = int(np.argmax(min_dist))
        center_idx.append(nxt)
        min_dist = np.minimum(min_dist, np.linalg.norm(points - points[nxt], axis=1))
    centers = points[center_idx].astype(np.float64).copy()

    labels = np.zeros(n, dtype=np.int64)
    point_sq = np.einsum("ij,ij->i", points, points)
    for _ in range(n_iter):
        center_sq = np.einsum("ij,ij->i", centers, centers)
        # squared distances, n x k; argmin breaks ties toward the lower index
        dists = point_sq[:, None] - 2.0 * points @ centers.T + center_sq[None, :]
        labels = np.argmin(dists, axis=1)
        for c in range(k):
            members = points[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    return labels


def leaf_index_width(leaf_size: int) -> int:
    return int(math.ceil(math.log10(max(leaf_size, 2))))


def assign_semantic_ids(
    corpus: Corpus,
    embeddings: np.ndarray,
    branching: int = 10,
    leaf_size: int = 100,
    seed: int = 0,
) -> Corpus:
    """Assign hierarchical-cluster docids; returns a new corpus.

    Clusters larger than ``leaf_size`` are split into ``branching`` k-means
    groups and the group digit is appended to every member's prefix; leaves
    append a zero-padded within-leaf index ordered by internal index.
    Degenerate splits (all points identical) fall back to splitting by
    internal-index order, with a warning.
    """
    if branching < 2 or branching > 10:
        raise ContractViolation("branching must be in [2, 10] (single-digit cluster labels)")
    if leaf_size < 1:
        raise ContractViolation("leaf_size must be >= 1")
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[0] != len(corpus):
        raise ContractViolation(
            f"embedding rows ({embeddings.shape[0]}) must match corpus size ({len(corpus)})"
        )

    width = leaf_index_width(leaf_size)
    id_strings: dict[int, str] = {}

    def emit_leaf(members: np.ndarray, prefix: str) -> None:
        for within, doc_index in enumerate(sorted(int(m) for m in members)):
            id_strings[doc_index] = prefix + str(within).zfill(width)

    def split(members: np.ndarray, prefix: str, path: tuple[int, ...]) -> None:
        if len(members) <= leaf_size:
            emit_leaf(members, prefix)
            return
        node_seed = np.random.SeedSequence(seed, spawn_key=path).generate_state(1)[0]
        labels = kmeans(embeddings[members], branching, seed=int(node_seed))
        groups = [members[labels == c] for c in range(branching)]
        if sum(1 for g in groups if len(g)) < 2:
            log.warning(
                "degenerate embeddings under prefix %r (%d docs); splitting by internal index",
                prefix,
                len(members),
            )
            chunk = math.ceil(len(members) / branching)
            ordered = np.sort(members)
            groups = [ordered[c * chunk : (c + 1) * chunk] for c in range(branching)]
        for digit, group in enumerate(groups):
            if len(group):
                split(group, prefix + str(digit), path + (digit,))

    split(np.arange(len(corpus)), "", ())
    ids = {i: DocId(id_strings[i], SEMANTIC) for i in range(len(corpus))}
    return replace(corpus, ids=ids)
