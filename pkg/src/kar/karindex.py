"""Keyword index: per-chunk keyword sets plus an inverted phrase lookup.

Retrieval compares query keywords against the index by exact normalized
phrase match; no embeddings are computed at query time. The index is
immutable after build; rebuilding is the way to add chunks.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path

from .errors import ProviderError
from .ingest import DEFAULT_CHUNK_BUDGET, SubDocument
from .keywords import (
    Embedder,
    ExtractorConfig,
    Keyword,
    KeywordSet,
    augment_with_headings,
    extract_keywords,
)

INDEX_FORMAT_VERSION = 1
DEFAULT_TOP_K = 4
SCORING_MODES = ("overlap", "weighted-overlap", "jaccard")


@dataclass
class ChunkMeta:
    doc_id: str
    heading_path: list[str]
    token_count: int


@dataclass
class BuildConfig:
    k: int
    ngram_min: int
    ngram_max: int
    diversity: float
    embedder_id: str
    budget: int


@dataclass
class KeywordIndex:
    entries: dict[str, KeywordSet]
    inverted: dict[str, set[str]] = field(repr=False)
    chunk_meta: dict[str, ChunkMeta]
    build_config: BuildConfig


@dataclass
class RetrievalResult:
    mode: str  # kar | regular
    ranked: list[tuple[str, float]]  # (chunk_id, score), best first
    query_keywords: KeywordSet | None
    elapsed: float


def _invert(entries: dict[str, KeywordSet]) -> dict[str, set[str]]:
    inverted: dict[str, set[str]] = {}
    for chunk_id, kw_set in entries.items():
        for kw in kw_set.keywords:
            inverted.setdefault(kw.phrase, set()).add(chunk_id)
    return inverted


def build_index(chunks: list[SubDocument], embedder: Embedder,
                config: ExtractorConfig | None = None,
                budget: int = DEFAULT_CHUNK_BUDGET) -> KeywordIndex:
    """Extract keywords for every chunk, merge in heading titles, invert.

    Extraction or embedding failure aborts the build naming the chunk_id.
    """
    cfg = config or ExtractorConfig()
    entries: dict[str, KeywordSet] = {}
    chunk_meta: dict[str, ChunkMeta] = {}
    for chunk in chunks:
        if chunk.chunk_id in entries:
            raise ValueError(f"duplicate chunk_id: {chunk.chunk_id}")
        try:
            kw_set = extract_keywords(chunk.text, embedder, cfg, origin="chunk")
            kw_set = augment_with_headings(kw_set, chunk.heading_path)
        except ProviderError as exc:
            raise ProviderError(f"chunk {chunk.chunk_id}: {exc}", stage=exc.stage,
                                status_code=exc.status_code) from exc
        except Exception as exc:
            raise ProviderError(f"chunk {chunk.chunk_id}: {exc}",
                                stage="index-build") from exc
        entries[chunk.chunk_id] = kw_set
        chunk_meta[chunk.chunk_id] = ChunkMeta(
            doc_id=chunk.doc_id,
            heading_path=list(chunk.heading_path),
            token_count=chunk.token_count,
        )
    build_config = BuildConfig(
        k=cfg.k, ngram_min=cfg.ngram_min, ngram_max=cfg.ngram_max,
        diversity=cfg.diversity, embedder_id=embedder.embedder_id, budget=budget,
    )
    return KeywordIndex(entries=entries, inverted=_invert(entries),
                        chunk_meta=chunk_meta, build_config=build_config)


def match_query(index: KeywordIndex, query_keywords: KeywordSet,
                top_k: int = DEFAULT_TOP_K, scoring: str = "overlap") -> RetrievalResult:
    """Rank chunks by keyword agreement with the query.

    overlap: number of shared phrases. weighted-overlap: sum of the chunk-side
    weights of shared phrases. jaccard: |shared| / |union|. Chunks scoring 0
    are excluded; ties break on ascending chunk_id. Performs no embedding.
    """
    start = time.perf_counter()
    if top_k < 1:
        raise ValueError(f"top_k must be at least 1, got {top_k}")
    if scoring not in SCORING_MODES:
        raise ValueError(f"unknown scoring mode: {scoring!r}")
    query_phrases = set(query_keywords.phrases())
    if not query_phrases:
        raise ValueError("no query keywords")

    candidates: set[str] = set()
    for phrase in query_phrases:
        candidates |= index.inverted.get(phrase, set())

    scored: list[tuple[str, float]] = []
    for chunk_id in candidates:
        chunk_phrases = set(index.entries[chunk_id].phrases())
        shared = query_phrases & chunk_phrases
        if scoring == "overlap":
            score: float = float(len(shared))
        elif scoring == "weighted-overlap":
            weights = index.entries[chunk_id].weight_map()
            # fsum: the score must not depend on set iteration order, which
            # varies with hash randomization and would make ties unstable.
            score = math.fsum(weights[p] for p in shared)
        else:
            score = len(shared) / len(query_phrases | chunk_phrases)
        if score > 0:
            scored.append((chunk_id, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RetrievalResult(
        mode="kar",
        ranked=scored[:top_k],
        query_keywords=query_keywords,
        elapsed=time.perf_counter() - start,
    )


def _keyword_set_to_obj(kw_set: KeywordSet) -> dict:
    return {
        "origin": kw_set.origin,
        "keywords": [{"phrase": k.phrase, "weight": k.weight} for k in kw_set.keywords],
    }


def _keyword_set_from_obj(obj: dict) -> KeywordSet:
    return KeywordSet(
        keywords=[Keyword(k["phrase"], float(k["weight"])) for k in obj["keywords"]],
        origin=obj["origin"],
    )


def save_index(index: KeywordIndex, path: str | Path) -> None:
    """Versioned JSON; deterministic bytes for identical inputs. The inverted
    table is derived data and is not persisted."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "build_config": asdict(index.build_config),
        "entries": {cid: _keyword_set_to_obj(ks) for cid, ks in index.entries.items()},
        "chunk_meta": {cid: asdict(meta) for cid, meta in index.chunk_meta.items()},
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def load_index(path: str | Path) -> KeywordIndex:
    raw = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValueError(f"index parse error at byte {exc.pos}") from None
    version = payload.get("format_version")
    if version != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index version: {version!r}")
    try:
        entries = {cid: _keyword_set_from_obj(obj)
                   for cid, obj in payload["entries"].items()}
        chunk_meta = {
            cid: ChunkMeta(doc_id=m["doc_id"], heading_path=list(m["heading_path"]),
                           token_count=int(m["token_count"]))
            for cid, m in payload["chunk_meta"].items()
        }
        build_config = BuildConfig(**payload["build_config"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"index missing field: {exc}") from None
    return KeywordIndex(entries=entries, inverted=_invert(entries),
                        chunk_meta=chunk_meta, build_config=build_config)


@dataclass
class IndexStats:
    chunk_count: int
    distinct_keywords: int
    mean_keywords_per_chunk: float  # rounded to 2 decimals


def index_stats(index: KeywordIndex) -> IndexStats:
    if not index.entries:
        return IndexStats(0, 0, 0.0)
    per_chunk = [len(ks.keywords) for ks in index.entries.values()]
    return IndexStats(
        chunk_count=len(index.entries),
        distinct_keywords=len(index.inverted),
        mean_keywords_per_chunk=round(sum(per_chunk) / len(per_chunk), 2),
    )
