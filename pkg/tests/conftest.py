"""Shared fixtures: a small hand corpus and a seeded document generator."""

from __future__ import annotations

import random

import pytest

from kar.baseline import build_store
from kar.generation import by_chunk_id
from kar.ingest import chunk_document, parse_document
from kar.karindex import build_index
from kar.keywords import ExtractorConfig, MockEmbedder

PAGERANK_DOC = """\
# PageRank

PageRank scores pages by the structure of incoming links. A page is important
when important pages link to it. The damping factor models a surfer who
occasionally jumps to a random page.

## Computation

The scores are the stationary distribution of a random walk over the link
graph. Iterative multiplication converges quickly on sparse graphs.

# ExpandRank

ExpandRank grows a small neighborhood graph around the document and runs the
ranking over the expanded graph. Neighborhood expansion brings in related
documents that share vocabulary.

# PositionRank

PositionRank biases the random walk by word position, so words appearing
early in the document receive more weight. Position bias helps on scholarly
documents with informative openings.
"""


@pytest.fixture()
def embedder():
    return MockEmbedder(16)


@pytest.fixture()
def corpus(embedder):
    """Parsed + chunked + indexed + embedded hand corpus."""
    doc = parse_document(PAGERANK_DOC, "markdown", doc_id="ranking")
    chunks = chunk_document(doc, budget=64)
    index = build_index(chunks, embedder, ExtractorConfig(k=8), budget=64)
    store = build_store(chunks, embedder)
    return {
        "doc": doc,
        "chunks": chunks,
        "by_id": by_chunk_id(chunks),
        "index": index,
        "store": store,
        "embedder": embedder,
    }


_WORDS = (
    "graph rank walk node edge damping score link page web crawl corpus "
    "query term vector weight matrix power sparse dense anchor text "
    "neighbor expansion position bias early opening scholarly document"
).split()


def random_markdown(rng: random.Random, max_sections: int = 6) -> str:
    """Seeded random heading-structured document with unique headings."""
    lines = []
    if rng.random() < 0.3:
        lines.append(_random_paragraph(rng))
        lines.append("")
    level = 0
    for i in range(rng.randint(1, max_sections)):
        level = max(1, min(3, level + rng.choice([-1, 0, 1, 1])))
        title_words = rng.sample(_WORDS, rng.randint(1, 3))
        lines.append("#" * level + f" {' '.join(title_words)} {i}")
        lines.append("")
        for _ in range(rng.randint(0, 3)):
            lines.append(_random_paragraph(rng))
            lines.append("")
    return "\n".join(lines)


def _random_paragraph(rng: random.Random) -> str:
    sentences = []
    for _ in range(rng.randint(1, 5)):
        words = [rng.choice(_WORDS) for _ in range(rng.randint(3, 20))]
        sentence = " ".join(words).capitalize() + rng.choice([".", ".", "!", "?"])
        sentences.append(sentence)
    return " ".join(sentences)


class FailingEmbedder:
    """Counting embedder that fails on the nth call."""

    def __init__(self, dimension: int = 8, fail_on_call: int = 1):
        self.inner = MockEmbedder(dimension)
        self.dimension = dimension
        self.embedder_id = f"failing:{dimension}"
        self.fail_on_call = fail_on_call
        self.calls = 0

    def embed(self, text: str) -> list[float]:
        self.calls += 1
        if self.calls >= self.fail_on_call:
            raise RuntimeError("embedder exploded")
        return self.inner.embed(text)

    def embed_many(self, texts: list[str]) -> list[list[float]]:
        return [self.embed(t) for t in texts]
