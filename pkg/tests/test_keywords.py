"""Normalization, candidate generation, MMR selection, heading augmentation."""

from __future__ import annotations

import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kar.errors import ProviderError
from kar.keywords import (
    ExtractorConfig,
    Keyword,
    KeywordSet,
    MockEmbedder,
    augment_with_headings,
    extract_keywords,
    extract_query_keywords,
    generate_candidates,
    mmr_select,
    mock_embedder,
    normalize_phrase,
    select_keywords,
)
from kar.vectors import cosine

from conftest import FailingEmbedder

DATA = Path(__file__).parent / "data"


class TestNormalizePhrase:
    def test_lowercase_and_edge_punctuation(self):
        assert normalize_phrase("Position-Rank,") == "position-rank"

    def test_whitespace_collapse(self):
        assert normalize_phrase("  The   PageRank\tAlgorithm ") == \
            "the pagerank algorithm"

    def test_internal_hyphen_kept(self):
        assert normalize_phrase("state-of-the-art") == "state-of-the-art"

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty phrase"):
            normalize_phrase("   ")

    def test_punctuation_only_rejected(self):
        with pytest.raises(ValueError, match="empty phrase"):
            normalize_phrase("?!...")

    @given(st.text(min_size=1, max_size=60))
    def test_idempotent(self, raw):
        try:
            once = normalize_phrase(raw)
        except ValueError:
            return
        assert normalize_phrase(once) == once


class TestGenerateCandidates:
    def test_unigrams_then_bigrams_first_occurrence_order(self):
        got = generate_candidates("the page rank algorithm", 1, 2,
                                  stopwords=frozenset({"the"}))
        assert got == ["page", "rank", "algorithm", "page rank", "rank algorithm"]

    def test_stopword_edges_excluded(self):
        got = generate_candidates("what is page rank", 1, 2)
        assert got == ["page", "rank", "page rank"]

    def test_duplicates_collapse(self):
        got = generate_candidates("rank rank rank", 1, 2)
        assert got == ["rank", "rank rank"]

    def test_empty_text(self):
        assert generate_candidates("", 1, 2) == []

    def test_bad_ngram_range(self):
        with pytest.raises(ValueError, match="ngram range"):
            generate_candidates("x", 2, 1)
        with pytest.raises(ValueError, match="ngram range"):
            generate_candidates("x", 1, 4)


def _exhaustive_mmr(doc_vec, cand_vecs, phrases, k, diversity):
    """Literal recurrence, recomputed from scratch every step."""
    rel = [cosine(v, doc_vec) for v in cand_vecs]
    selected: list[int] = []
    remaining = list(range(len(cand_vecs)))
    while remaining and len(selected) < k:
        best, best_key = None, None
        for i in remaining:
            if not selected:
                score = rel[i]
            else:
                max_sim = max(cosine(cand_vecs[i], cand_vecs[s]) for s in selected)
                score = (1 - diversity) * rel[i] - diversity * max_sim
            key = (-score, phrases[i])
            if best_key is None or key < best_key:
                best, best_key = i, key
        selected.append(best)
        remaining.remove(best)
    return selected


class TestMmrSelect:
    def test_hand_fixture_selection_sequences(self):
        fixture = json.loads((DATA / "mmr_hand_fixture.json").read_text())
        for case in fixture["cases"]:
            got = mmr_select(fixture["doc_vec"], fixture["cand_vecs"],
                             fixture["phrases"], case["k"], case["diversity"])
            assert [fixture["phrases"][i] for i in got] == case["selection"], \
                f"diversity={case['diversity']} k={case['k']}"

    def test_matches_exhaustive_recurrence_on_random_fixtures(self):
        rng = random.Random(99)
        for trial in range(30):
            n = rng.randint(1, 8)
            phrases = [f"p{i}" for i in range(n)]
            doc_vec = [rng.uniform(-1, 1) for _ in range(4)]
            cand_vecs = [[rng.uniform(-1, 1) for _ in range(4)] for _ in range(n)]
            for diversity in (0.0, 0.25, 0.5, 1.0):
                k = rng.randint(1, n)
                assert mmr_select(doc_vec, cand_vecs, phrases, k, diversity) == \
                    _exhaustive_mmr(doc_vec, cand_vecs, phrases, k, diversity)


class TestSelectKeywords:
    def test_weights_are_clamped_cosine_relevance(self, embedder):
        text = "pagerank ranks pages by incoming links"
        candidates = generate_candidates(text)
        kw = select_keywords(text, candidates, embedder, k=4)
        doc_vec = MockEmbedder(16).embed(text)
        for keyword in kw.keywords:
            expected = min(1.0, max(0.0, cosine(MockEmbedder(16).embed(keyword.phrase),
                                                doc_vec)))
            assert math.isclose(keyword.weight, expected, abs_tol=1e-12)
            assert 0.0 <= keyword.weight <= 1.0

    def test_sorted_by_weight_then_phrase(self, embedder):
        text = "graph ranking with damping and teleportation over sparse links"
        kw = select_keywords(text, generate_candidates(text), embedder, k=8)
        order = [(-k.weight, k.phrase) for k in kw.keywords]
        assert order == sorted(order)

    def test_diversity_zero_equals_relevance_ranking(self, embedder):
        text = "position rank biases the walk by early word positions"
        candidates = generate_candidates(text)
        kw = select_keywords(text, candidates, embedder, k=len(candidates),
                             diversity=0.0)
        doc_vec = MockEmbedder(16).embed(text)
        rel = {c: cosine(MockEmbedder(16).embed(c), doc_vec) for c in candidates}
        expected = sorted(candidates, key=lambda c: (-rel[c], c))
        assert kw.phrases() == expected

    def test_k_at_least_candidate_count_returns_all(self, embedder):
        candidates = ["alpha", "beta"]
        kw = select_keywords("alpha beta", candidates, embedder, k=10)
        assert sorted(kw.phrases()) == ["alpha", "beta"]

    def test_selection_count_is_min_k_candidates(self, embedder):
        text = "graph node edge walk damping anchor corpus term"
        candidates = generate_candidates(text)
        for k in (1, 3, len(candidates) + 5):
            kw = select_keywords(text, candidates, embedder, k=k)
            assert len(kw.keywords) == min(k, len(candidates))

    def test_validation_errors(self, embedder):
        with pytest.raises(ValueError, match="k must be at least 1"):
            select_keywords("x", ["x"], embedder, k=0)
        with pytest.raises(ValueError, match="candidates must be non-empty"):
            select_keywords("x", [], embedder)
        with pytest.raises(ValueError, match="diversity"):
            select_keywords("x", ["x"], embedder, diversity=1.5)

    def test_embedder_failure_tagged_keyword_embedding(self):
        with pytest.raises(ProviderError) as err:
            select_keywords("x y", ["x", "y"], FailingEmbedder(fail_on_call=1))
        assert err.value.stage == "keyword-embedding"


class TestAugmentWithHeadings:
    def _set(self):
        return KeywordSet([Keyword("damping factor", 0.8), Keyword("graph", 0.5)],
                          "chunk")

    def test_headings_merge_at_full_weight(self):
        out = augment_with_headings(self._set(), ["PageRank", "Computation"])
        weights = out.weight_map()
        assert weights["pagerank"] == 1.0
        assert weights["computation"] == 1.0
        assert weights["damping factor"] == 0.8

    def test_heading_dominates_existing_phrase(self):
        out = augment_with_headings(self._set(), ["Graph"])
        assert out.weight_map()["graph"] == 1.0

    def test_output_stays_sorted(self):
        out = augment_with_headings(self._set(), ["Zeta", "Alpha"])
        order = [(-k.weight, k.phrase) for k in out.keywords]
        assert order == sorted(order)

    def test_empty_heading_path_is_identity(self):
        assert augment_with_headings(self._set(), []) == self._set()

    def test_query_origin_rejected(self):
        with pytest.raises(ValueError, match="origin"):
            augment_with_headings(KeywordSet([], "query"), ["A"])

    def test_punctuation_only_heading_skipped(self):
        out = augment_with_headings(self._set(), ["!!!"])
        assert out == self._set()


class TestMockEmbedder:
    def test_deterministic_and_text_sensitive(self):
        e = mock_embedder(8)
        assert e.embed("x") == e.embed("x")
        assert e.embed("x") != e.embed("y")

    def test_matches_committed_reference_vectors(self):
        fixture = json.loads((DATA / "mock_embedder_fixture.json").read_text())
        e = mock_embedder(fixture["dimension"], seed=fixture["seed"])
        for text, expected in fixture["vectors"].items():
            assert e.embed(text) == expected

    def test_normalized_tokens_drive_the_hash(self):
        e = mock_embedder(8)
        assert e.embed("PageRank!") == e.embed("pagerank")
        assert e.embed("page rank") != e.embed("pagerank")

    def test_unit_norm(self):
        vec = mock_embedder(12).embed("anything at all")
        assert math.isclose(math.sqrt(sum(v * v for v in vec)), 1.0, abs_tol=1e-12)

    def test_dimension_validated(self):
        with pytest.raises(ValueError, match="dimension must be at least 2"):
            mock_embedder(1)

    def test_call_counting(self):
        e = mock_embedder(4)
        e.embed("a")
        e.embed_many(["b", "c"])
        assert e.calls == 3


class TestExtractors:
    def test_extract_keywords_empty_text_gives_empty_set(self, embedder):
        assert extract_keywords("", embedder).keywords == []
        assert extract_keywords("the of and", embedder).keywords == []

    def test_extract_query_keywords_needs_no_embedder(self):
        kw = extract_query_keywords("tell me important facts about expandrank")
        assert "expandrank" in kw.phrases()
        assert kw.origin == "query"
        assert all(k.weight == 1.0 for k in kw.keywords)

    def test_extract_query_keywords_caps_at_k(self):
        kw = extract_query_keywords(
            "graph node edge walk damping anchor corpus term",
            ExtractorConfig(k=3))
        assert len(kw.keywords) == 3

    def test_chunk_extraction_uses_configured_k(self, embedder):
        text = "graph node edge walk damping anchor corpus term weight"
        kw = extract_keywords(text, embedder, ExtractorConfig(k=4))
        assert len(kw.keywords) == 4
