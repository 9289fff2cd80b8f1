"""Desk-scale generative retrieval lab.

Builds sparse/dense retrievers over a corpus, constructs multi-task
training data from them, trains a small autoregressive docid generator
with trie-constrained decoding, and probes any of the systems for
exclusivity, completeness and relevance ordering.
"""

from .backends import available_backends, get_backend

__version__ = "0.1.0"

__all__ = ["available_backends", "get_backend", "__version__"]
