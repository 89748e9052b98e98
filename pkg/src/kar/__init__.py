"""Keyword augmented retrieval.

Answer context is found by comparing query keywords against keywords
precomputed per chunk at build time, so the query path needs no embedding
calls; a cosine-similarity baseline over chunk embeddings is included for
comparison, along with generation, speech wrapping, a benchmark harness, and
an HTTP service.
"""

__version__ = "0.1.0"
