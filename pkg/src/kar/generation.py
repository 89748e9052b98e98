"""Answer generation: context assembly, prompt rendering, completion calls.

The prompt template is fixed byte-for-byte; context chunks are joined by a
blank line in rank order under a token budget. answer_query composes one
retrieval arm (keyword matching or embedding baseline) with one completion
call and records per-stage wall times.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Mapping, Protocol

from .baseline import VectorStore, regular_retrieve
from .errors import ProviderError, ProviderTimeout
from .ingest import SubDocument, _WORD_RE, count_tokens
from .karindex import DEFAULT_TOP_K, KeywordIndex, match_query
from .keywords import ExtractorConfig, extract_query_keywords, DEFAULT_QUERY_KEYWORDS

if TYPE_CHECKING:
    from .keywords import Embedder

DEFAULT_CONTEXT_BUDGET = 2048
MIN_CONTEXT_BUDGET = 32
CONTEXT_SEPARATOR = "\n\n"
FALLBACK_ANSWER = "I don't know"

DEFAULT_PROMPT = (
    "Answer the question based on the context below, and if the question "
    "can't be answered based on the context, say \"I don't know\"\n\n"
    "Context: {context}\n\n"
    "Question: {query}\n"
    "Answer:"
)

_PLACEHOLDER_RE = re.compile(r"\{context\}|\{query\}")


@dataclass
class PromptTemplate:
    template: str = DEFAULT_PROMPT


@dataclass
class GenerationConfig:
    model: str = "mock"
    temperature: float = 1e-6
    max_answer_tokens: int = 256
    timeout: float = 30.0
    retries: int = 2


@dataclass
class StageTimings:
    retrieval: float
    generation: float
    total: float


@dataclass
class AnswerRecord:
    answer: str
    answer_length: int  # characters
    mode: str
    timings: StageTimings
    context_chunk_ids: list[str]


class CompletionProvider(Protocol):
    provider_id: str

    def complete(self, prompt: str, config: GenerationConfig) -> str: ...


def _truncate_to_budget(text: str, budget: int,
                        token_counter: Callable[[str], int]) -> str:
    """Longest word-boundary prefix within the token budget."""
    end = 0
    for match in _WORD_RE.finditer(text):
        if token_counter(text[:match.end()]) > budget:
            break
        end = match.end()
    return text[:end]


def assemble_context(chunks: list[SubDocument], budget: int = DEFAULT_CONTEXT_BUDGET,
                     token_counter: Callable[[str], int] = count_tokens) -> str:
    """Join chunk texts in rank order with blank lines, greedily adding whole
    chunks and stopping at the first that would exceed the budget. The top
    chunk is always included, truncated to the budget if necessary."""
    if budget < MIN_CONTEXT_BUDGET:
        raise ValueError(f"context budget must be at least {MIN_CONTEXT_BUDGET}, "
                         f"got {budget}")
    if not chunks:
        raise ValueError("no context")
    first = chunks[0].text
    if token_counter(first) > budget:
        return _truncate_to_budget(first, budget, token_counter)
    assembled = first
    for chunk in chunks[1:]:
        candidate = assembled + CONTEXT_SEPARATOR + chunk.text
        if token_counter(candidate) > budget:
            break
        assembled = candidate
    return assembled


def render_prompt(template: PromptTemplate | str, context: str, query: str) -> str:
    """Byte-exact placeholder substitution; substituted text is not rescanned."""
    text = template.template if isinstance(template, PromptTemplate) else template
    if "{context}" not in text:
        raise ValueError("template missing {context} placeholder")
    if "{query}" not in text:
        raise ValueError("template missing {query} placeholder")
    return _PLACEHOLDER_RE.sub(
        lambda m: context if m.group() == "{context}" else query, text)


def generate_answer(prompt: str, provider: CompletionProvider,
                    config: GenerationConfig | None = None) -> tuple[str, float]:
    """One completion with retries on retryable failures (timeouts, transient
    provider errors). Returns the trimmed answer and the wall time across all
    attempts. Timeout after exhausting retries is tagged "generation-timeout";
    non-retryable provider errors surface immediately."""
    cfg = config or GenerationConfig()
    start = time.perf_counter()
    attempts = cfg.retries + 1
    last: ProviderError | None = None
    for _ in range(attempts):
        try:
            raw = provider.complete(prompt, cfg)
            return raw.strip(), time.perf_counter() - start
        except ProviderError as exc:
            if not exc.retryable:
                raise ProviderError(str(exc), stage="generation",
                                    status_code=exc.status_code) from exc
            last = exc
    assert last is not None
    if isinstance(last, ProviderTimeout):
        raise ProviderError(f"generation-timeout after {attempts} attempts: {last}",
                            stage="generation-timeout") from last
    raise ProviderError(f"generation failed after {attempts} attempts: {last}",
                        stage="generation", status_code=last.status_code) from last


def by_chunk_id(chunks: list[SubDocument]) -> dict[str, SubDocument]:
    return {c.chunk_id: c for c in chunks}


def answer_query(
    query: str,
    mode: str,
    *,
    chunks: Mapping[str, SubDocument],
    llm: CompletionProvider,
    index: KeywordIndex | None = None,
    store: VectorStore | None = None,
    embedder: "Embedder | None" = None,
    top_k: int = DEFAULT_TOP_K,
    scoring: str = "overlap",
    query_config: ExtractorConfig | None = None,
    generation_config: GenerationConfig | None = None,
    template: PromptTemplate | str = DEFAULT_PROMPT,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
    always_call_llm: bool = False,
    token_counter: Callable[[str], int] = count_tokens,
    events: list[tuple[str, float, float]] | None = None,
) -> AnswerRecord:
    """Retrieve context for the query in the given mode, then generate.

    kar mode matches query keywords against the index and never calls an
    embedder; with no keyword match (or no query keywords at all) it answers
    "I don't know" without a completion call unless always_call_llm is set.
    regular mode embeds the query (exactly one embedding call) and ranks the
    store by cosine. timings.total covers the whole call, so it is at least
    retrieval + generation.
    """
    if not query.strip():
        raise ValueError("empty query")
    if mode not in ("kar", "regular"):
        raise ValueError(f"unknown mode: {mode!r}")
    start = time.perf_counter()

    ranked_ids: list[str]
    t0 = time.perf_counter()
    if mode == "kar":
        if index is None:
            raise ValueError("kar mode requires an index")
        q_config = query_config or ExtractorConfig(k=DEFAULT_QUERY_KEYWORDS)
        query_keywords = extract_query_keywords(query, q_config)
        if query_keywords.keywords:
            result = match_query(index, query_keywords, top_k=top_k, scoring=scoring)
            ranked_ids = [cid for cid, _ in result.ranked]
        else:
            ranked_ids = []
    else:
        if store is None or embedder is None:
            raise ValueError("regular mode requires a store and an embedder")
        result = regular_retrieve(store, query, embedder, top_k=top_k)
        ranked_ids = [cid for cid, _ in result.ranked]
    retrieval_elapsed = time.perf_counter() - t0
    if events is not None:
        events.append(("retrieval", t0, t0 + retrieval_elapsed))

    if mode == "kar" and not ranked_ids and not always_call_llm:
        total = time.perf_counter() - start
        return AnswerRecord(
            answer=FALLBACK_ANSWER,
            answer_length=len(FALLBACK_ANSWER),
            mode=mode,
            timings=StageTimings(retrieval=retrieval_elapsed, generation=0.0, total=total),
            context_chunk_ids=[],
        )

    selected: list[SubDocument] = []
    for chunk_id in ranked_ids:
        if chunk_id not in chunks:
            raise ValueError(f"chunk text missing for {chunk_id}")
        selected.append(chunks[chunk_id])
    context = (assemble_context(selected, context_budget, token_counter)
               if selected else "")

    prompt = render_prompt(template, context, query)
    t2 = time.perf_counter()
    answer, generation_elapsed = generate_answer(prompt, llm, generation_config)
    if events is not None:
        events.append(("generation", t2, t2 + generation_elapsed))

    total = time.perf_counter() - start
    return AnswerRecord(
        answer=answer,
        answer_length=len(answer),
        mode=mode,
        timings=StageTimings(retrieval=retrieval_elapsed,
                             generation=generation_elapsed, total=total),
        context_chunk_ids=ranked_ids,
    )
