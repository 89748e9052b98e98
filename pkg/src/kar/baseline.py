"""Regular retrieval baseline: chunk embeddings ranked by cosine similarity.

Exhaustive scan, no approximate search. Stored scores are (1 + cosine) / 2,
an order-preserving map of cosine onto [0, 1] so result scores share the
non-negative domain of keyword scores; identical texts still score 1.0.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ProviderError
from .ingest import SubDocument
from .karindex import DEFAULT_TOP_K, RetrievalResult
from .vectors import cosine

if TYPE_CHECKING:
    from .keywords import Embedder

STORE_FORMAT_VERSION = 1


@dataclass
class VectorStore:
    vectors: dict[str, list[float]]
    dimension: int
    embedder_id: str


def build_store(chunks: list[SubDocument], embedder: "Embedder") -> VectorStore:
    """Embed every chunk text. Embedding failure aborts naming the chunk_id."""
    vectors: dict[str, list[float]] = {}
    dimension = 0
    for chunk in chunks:
        if chunk.chunk_id in vectors:
            raise ValueError(f"duplicate chunk_id: {chunk.chunk_id}")
        try:
            vec = embedder.embed(chunk.text)
        except ProviderError as exc:
            raise ProviderError(f"chunk {chunk.chunk_id}: {exc}", stage=exc.stage,
                                status_code=exc.status_code) from exc
        except Exception as exc:
            raise ProviderError(f"chunk {chunk.chunk_id}: embedder failed: {exc}",
                                stage="embedding") from exc
        if dimension and len(vec) != dimension:
            raise ValueError(f"chunk {chunk.chunk_id}: dimension {len(vec)} != {dimension}")
        dimension = len(vec)
        vectors[chunk.chunk_id] = [float(v) for v in vec]
    return VectorStore(vectors=vectors, dimension=dimension,
                       embedder_id=embedder.embedder_id)


def regular_retrieve(store: VectorStore, query: str, embedder: "Embedder",
                     top_k: int = DEFAULT_TOP_K) -> RetrievalResult:
    """Embed the query (exactly one embedding call), rank every stored chunk
    by cosine, return the top_k. Ties break on ascending chunk_id; elapsed
    includes the embedding call."""
    start = time.perf_counter()
    if top_k < 1:
        raise ValueError(f"top_k must be at least 1, got {top_k}")
    if not store.vectors:
        raise ValueError("vector store is empty")
    try:
        query_vec = embedder.embed(query)
    except ProviderError as exc:
        raise ProviderError(f"query embedding failed: {exc}", stage="embedding",
                            status_code=exc.status_code) from exc
    except Exception as exc:
        raise ProviderError(f"query embedding failed: {exc}", stage="embedding") from exc
    if len(query_vec) != store.dimension:
        raise ValueError(f"query dimension {len(query_vec)} != store dimension "
                         f"{store.dimension}")

    scored = [
        (chunk_id, (1.0 + cosine(query_vec, vec)) / 2.0)
        for chunk_id, vec in store.vectors.items()
    ]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RetrievalResult(
        mode="regular",
        ranked=scored[:top_k],
        query_keywords=None,
        elapsed=time.perf_counter() - start,
    )


def save_store(store: VectorStore, path: str | Path) -> None:
    payload = {
        "format_version": STORE_FORMAT_VERSION,
        "dimension": store.dimension,
        "embedder_id": store.embedder_id,
        "vectors": store.vectors,
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_store(path: str | Path) -> VectorStore:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"store parse error at byte {exc.pos}") from None
    version = payload.get("format_version")
    if version != STORE_FORMAT_VERSION:
        raise ValueError(f"unsupported store version: {version!r}")
    try:
        dimension = int(payload["dimension"])
        vectors = {cid: [float(v) for v in vec]
                   for cid, vec in payload["vectors"].items()}
        embedder_id = payload["embedder_id"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"store missing field: {exc}") from None
    for chunk_id, vec in vectors.items():
        if len(vec) != dimension:
            raise ValueError(f"store vector {chunk_id} has dimension {len(vec)}, "
                             f"expected {dimension}")
    return VectorStore(vectors=vectors, dimension=dimension, embedder_id=embedder_id)
