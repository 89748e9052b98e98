"""Keyword extraction: normalization, candidate n-grams, and MMR selection.

Chunks get keywords by embedding candidate phrases and the chunk text with a
small embedder and running maximal marginal relevance; queries get keywords
without any embedding calls (candidate enumeration only), which is what makes
the keyword-matching query path cheap.
"""

from __future__ import annotations

import hashlib
import math
import string
import time
import unicodedata
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

from .errors import ProviderError
from .stopwords import ENGLISH_STOPWORDS
from .vectors import cosine

DEFAULT_CHUNK_KEYWORDS = 10
DEFAULT_QUERY_KEYWORDS = 5
DEFAULT_NGRAM_MIN = 1
DEFAULT_NGRAM_MAX = 2
DEFAULT_DIVERSITY = 0.5

_EDGE_PUNCT = string.punctuation + "“”‘’…«»"


def _words(text: str) -> list[str]:
    """Lowercased NFC words with edge punctuation stripped; empties dropped."""
    out = []
    for token in unicodedata.normalize("NFC", text).lower().split():
        token = token.strip(_EDGE_PUNCT)
        if token:
            out.append(token)
    return out


def normalize_phrase(raw: str) -> str:
    """Canonical phrase form: NFC, lowercase, single spaces, edge punctuation
    stripped per word. Idempotent. Raises on phrases that normalize to empty."""
    words = _words(raw)
    if not words:
        raise ValueError(f"empty phrase after normalization: {raw!r}")
    return " ".join(words)


@dataclass(frozen=True)
class Keyword:
    phrase: str
    weight: float


@dataclass
class KeywordSet:
    """Keywords sorted by descending weight (ties: phrase ascending)."""

    keywords: list[Keyword]
    origin: str  # chunk | query | heading

    def phrases(self) -> list[str]:
        return [k.phrase for k in self.keywords]

    def weight_map(self) -> dict[str, float]:
        return {k.phrase: k.weight for k in self.keywords}


def _sorted_keywords(keywords: list[Keyword]) -> list[Keyword]:
    return sorted(keywords, key=lambda k: (-k.weight, k.phrase))


@runtime_checkable
class Embedder(Protocol):
    """Text to fixed-dimension vector. embedder_id identifies the provider."""

    dimension: int
    embedder_id: str

    def embed(self, text: str) -> list[float]: ...

    def embed_many(self, texts: list[str]) -> list[list[float]]: ...


class MockEmbedder:
    """Deterministic embedder: seeded hashing of normalized tokens.

    For each normalized word t (empty text uses the single pseudo-token "")
    and dimension index j, the component contribution is
    u / 2**63 - 1.0 where u is the first 8 bytes, big-endian, of
    SHA-256("{seed}|{t}|{j}"). Token contributions are summed and the result
    is L2-normalized. This is fully specified so fixtures can be reproduced
    in any language. `calls` counts texts embedded; `latency` injects a
    per-call sleep for timing tests.
    """

    def __init__(self, dimension: int, seed: int = 0, latency: float = 0.0):
        if dimension < 2:
            raise ValueError(f"dimension must be at least 2, got {dimension}")
        self.dimension = dimension
        self.seed = seed
        self.latency = latency
        self.embedder_id = f"mock:{dimension}"
        self.calls = 0

    def embed(self, text: str) -> list[float]:
        self.calls += 1
        if self.latency:
            time.sleep(self.latency)
        tokens = _words(text) or [""]
        vec = [0.0] * self.dimension
        for token in tokens:
            for j in range(self.dimension):
                digest = hashlib.sha256(f"{self.seed}|{token}|{j}".encode("utf-8")).digest()
                u = int.from_bytes(digest[:8], "big")
                vec[j] += u / 2**63 - 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            raise ValueError("zero-norm vector from mock embedder")
        return [v / norm for v in vec]

    def embed_many(self, texts: list[str]) -> list[list[float]]:
        return [self.embed(t) for t in texts]


def mock_embedder(dimension: int, seed: int = 0, latency: float = 0.0) -> MockEmbedder:
    return MockEmbedder(dimension, seed=seed, latency=latency)


def generate_candidates(text: str, ngram_min: int = DEFAULT_NGRAM_MIN,
                        ngram_max: int = DEFAULT_NGRAM_MAX,
                        stopwords: frozenset[str] = ENGLISH_STOPWORDS) -> list[str]:
    """Distinct normalized n-grams whose first and last words are not stopwords.

    Enumeration order: all n-grams of size ngram_min first, then the next
    size, in order of first occurrence within each size.
    """
    if not (1 <= ngram_min <= ngram_max <= 3):
        raise ValueError(f"ngram range must satisfy 1 <= min <= max <= 3, "
                         f"got ({ngram_min}, {ngram_max})")
    words = _words(text)
    seen = set()
    candidates = []
    for n in range(ngram_min, ngram_max + 1):
        for i in range(len(words) - n + 1):
            gram = words[i:i + n]
            if gram[0] in stopwords or gram[-1] in stopwords:
                continue
            phrase = " ".join(gram)
            if phrase not in seen:
                seen.add(phrase)
                candidates.append(phrase)
    return candidates


def mmr_select(doc_vec: list[float], cand_vecs: list[list[float]],
               phrases: list[str], k: int, diversity: float) -> list[int]:
    """Maximal-marginal-relevance selection order over candidate indices.

    First pick maximizes cosine(candidate, doc). Each later pick maximizes
    (1 - diversity) * cosine(candidate, doc)
        - diversity * max over selected of cosine(candidate, selected).
    Ties break toward the lexicographically smaller phrase.
    """
    relevance = [cosine(v, doc_vec) for v in cand_vecs]
    remaining = list(range(len(cand_vecs)))
    selected: list[int] = []
    # max cosine to any already-selected candidate; starts below any cosine
    max_sim_to_selected = [-math.inf] * len(cand_vecs)
    while remaining and len(selected) < k:
        if not selected:
            scores = {i: relevance[i] for i in remaining}
        else:
            scores = {
                i: (1 - diversity) * relevance[i] - diversity * max_sim_to_selected[i]
                for i in remaining
            }
        best = min(remaining, key=lambda i: (-scores[i], phrases[i]))
        selected.append(best)
        remaining.remove(best)
        for i in remaining:
            sim = cosine(cand_vecs[i], cand_vecs[best])
            if sim > max_sim_to_selected[i]:
                max_sim_to_selected[i] = sim
    return selected


def select_keywords(text: str, candidates: list[str], embedder: Embedder,
                    k: int = DEFAULT_CHUNK_KEYWORDS,
                    diversity: float = DEFAULT_DIVERSITY,
                    origin: str = "chunk") -> KeywordSet:
    """Pick min(k, len(candidates)) keywords by MMR against the text.

    Keyword weight is cosine(candidate, text) clamped to [0, 1]. Embedder
    failures surface as provider errors tagged "keyword-embedding".
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if not candidates:
        raise ValueError("candidates must be non-empty")
    if not (0.0 <= diversity <= 1.0):
        raise ValueError(f"diversity must be in [0, 1], got {diversity}")
    try:
        doc_vec = embedder.embed(text)
        cand_vecs = embedder.embed_many(list(candidates))
    except ProviderError as exc:
        raise ProviderError(str(exc), stage="keyword-embedding",
                            status_code=exc.status_code) from exc
    except Exception as exc:
        raise ProviderError(f"embedder failed: {exc}", stage="keyword-embedding") from exc

    order = mmr_select(doc_vec, cand_vecs, list(candidates), k, diversity)
    keywords = [
        Keyword(candidates[i], min(1.0, max(0.0, cosine(cand_vecs[i], doc_vec))))
        for i in order
    ]
    return KeywordSet(_sorted_keywords(keywords), origin)


def augment_with_headings(keyword_set: KeywordSet, heading_path: list[str]) -> KeywordSet:
    """Merge normalized heading titles into a chunk keyword set at weight 1.0.

    A phrase present both as extracted keyword and heading keeps weight 1.0
    (headings dominate). Headings that normalize to empty are skipped.
    """
    if keyword_set.origin != "chunk":
        raise ValueError(f"can only augment chunk keyword sets, got origin "
                         f"{keyword_set.origin!r}")
    merged = keyword_set.weight_map()
    for heading in heading_path:
        try:
            phrase = normalize_phrase(heading)
        except ValueError:
            continue
        merged[phrase] = 1.0
    keywords = [Keyword(p, w) for p, w in merged.items()]
    return KeywordSet(_sorted_keywords(keywords), "chunk")


@dataclass
class ExtractorConfig:
    """Knobs for keyword extraction; defaults are the chunk-side defaults."""

    k: int = DEFAULT_CHUNK_KEYWORDS
    ngram_min: int = DEFAULT_NGRAM_MIN
    ngram_max: int = DEFAULT_NGRAM_MAX
    diversity: float = DEFAULT_DIVERSITY
    stopwords: frozenset[str] = field(default=ENGLISH_STOPWORDS, repr=False)


def extract_keywords(text: str, embedder: Embedder, config: ExtractorConfig | None = None,
                     origin: str = "chunk") -> KeywordSet:
    """Candidate generation plus MMR selection; empty candidates give an
    empty set rather than an error."""
    cfg = config or ExtractorConfig()
    candidates = generate_candidates(text, cfg.ngram_min, cfg.ngram_max, cfg.stopwords)
    if not candidates:
        return KeywordSet([], origin)
    return select_keywords(text, candidates, embedder, k=cfg.k,
                           diversity=cfg.diversity, origin=origin)


def extract_query_keywords(query: str, config: ExtractorConfig | None = None) -> KeywordSet:
    """Query keywords without an embedder: first k candidates in enumeration
    order at weight 1.0.

    The matching modes never read query-side weights, so skipping MMR loses
    nothing and keeps the query path free of embedding calls.
    """
    cfg = config or ExtractorConfig(k=DEFAULT_QUERY_KEYWORDS)
    candidates = generate_candidates(query, cfg.ngram_min, cfg.ngram_max, cfg.stopwords)
    keywords = [Keyword(p, 1.0) for p in candidates[:cfg.k]]
    return KeywordSet(_sorted_keywords(keywords), "query")
