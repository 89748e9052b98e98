"""Document ingestion: heading-structured parsing and token-budgeted chunking.

A document is parsed into Sections (one per heading, plus any preamble before
the first heading), and each section body is split into SubDocuments (chunks)
that never cross a section boundary and never exceed the token budget.
Chunk texts are contiguous substrings of the section body, so concatenating a
section's chunks reproduces the body up to the whitespace dropped at split
points.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable

DEFAULT_CHUNK_BUDGET = 512
MIN_CHUNK_BUDGET = 16

# Reference tokenizer: whitespace plus punctuation act as separators, tokens
# are maximal word-character runs. Deterministic and model-free.
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

_MD_HEADING_RE = re.compile(r"^(?P<marker>#{1,6})\s+(?P<title>\S.*?)\s*$")
# Plaintext heading markers mirror the markdown rule with '=' instead of '#'.
_PLAIN_HEADING_RE = re.compile(r"^(?P<marker>=+)\s+(?P<title>\S.*?)\s*$")
_FENCE_RE = re.compile(r"^\s{0,3}(```|~~~)")

_SENTENCE_END_RE = re.compile(r"[.!?]+(?=\s|$)")
_WORD_RE = re.compile(r"\S+")


@dataclass
class Section:
    """A heading-scoped region: nested heading titles plus the body text."""

    heading_path: list[str]
    body: str


@dataclass
class Document:
    doc_id: str
    title: str
    sections: list[Section] = field(default_factory=list)


@dataclass
class SubDocument:
    """A retrieval chunk. chunk_ids are dense and sequential per document."""

    chunk_id: str
    doc_id: str
    heading_path: list[str]
    text: str
    token_count: int


def count_tokens(text: str) -> int:
    """Token count under the reference tokenizer (word-character runs)."""
    return len(_TOKEN_RE.findall(text))


def _slug(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "doc"


def parse_document(raw: bytes | str, fmt: str = "markdown", doc_id: str | None = None) -> Document:
    """Parse raw text into a heading-structured Document.

    fmt is "markdown" (#-headings, fenced code blocks shield heading-like
    lines) or "plaintext" (=-prefixed heading lines, no fences). Text before
    the first heading becomes a Section with an empty heading_path; every
    heading line opens a new Section even if its body is empty.
    """
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValueError(f"document is not valid UTF-8: {exc}") from None
    else:
        text = raw
    if fmt == "plaintext-with-heading-markers":
        fmt = "plaintext"
    if fmt not in ("markdown", "plaintext"):
        raise ValueError(f"unsupported format: {fmt!r}")
    if not text.strip():
        raise ValueError("empty document")

    heading_re = _MD_HEADING_RE if fmt == "markdown" else _PLAIN_HEADING_RE
    sections: list[Section] = []
    stack: list[tuple[int, str]] = []  # (level, title), outermost first
    body_lines: list[str] = []
    title = ""
    in_fence = False
    started = False  # a heading has been seen

    def close_section() -> None:
        body = "\n".join(body_lines).strip()
        if started:
            sections.append(Section([t for _, t in stack], body))
        elif body:
            sections.append(Section([], body))
        body_lines.clear()

    for line in text.splitlines():
        if fmt == "markdown" and _FENCE_RE.match(line):
            in_fence = not in_fence
            body_lines.append(line)
            continue
        match = None if in_fence else heading_re.match(line)
        if match is None:
            body_lines.append(line)
            continue
        close_section()
        level = len(match.group("marker"))
        heading = match.group("title")
        while stack and stack[-1][0] >= level:
            stack.pop()
        stack.append((level, heading))
        if not title:
            title = heading
        started = True
    close_section()

    return Document(doc_id=doc_id or _slug(title), title=title, sections=sections)


def _sentence_spans(body: str) -> list[tuple[int, int]]:
    """Spans of sentences (terminator kept); whitespace between spans dropped."""
    spans = []
    start = 0
    for match in _SENTENCE_END_RE.finditer(body):
        spans.append((start, match.end()))
        start = match.end()
    if body[start:].strip():
        spans.append((start, len(body)))
    return [_trim(body, s, e) for s, e in spans if body[s:e].strip()]


def _trim(body: str, start: int, end: int) -> tuple[int, int]:
    while start < end and body[start].isspace():
        start += 1
    while end > start and body[end - 1].isspace():
        end -= 1
    return start, end


def _split_oversized(body: str, span: tuple[int, int], budget: int,
                     counter: Callable[[str], int]) -> list[tuple[int, int]]:
    """Word-boundary split of a span whose token count exceeds the budget."""
    words = [(m.start(), m.end()) for m in _WORD_RE.finditer(body, span[0], span[1])]
    groups: list[tuple[int, int]] = []
    current: tuple[int, int] | None = None
    for w_start, w_end in words:
        if counter(body[w_start:w_end]) > budget:
            raise ValueError(
                f"unsplittable token: {body[w_start:w_end][:40]!r} exceeds budget {budget}"
            )
        if current is not None and counter(body[current[0]:w_end]) <= budget:
            current = (current[0], w_end)
        else:
            if current is not None:
                groups.append(current)
            current = (w_start, w_end)
    if current is not None:
        groups.append(current)
    return groups


def chunk_document(doc: Document, budget: int = DEFAULT_CHUNK_BUDGET,
                   token_counter: Callable[[str], int] = count_tokens) -> list[SubDocument]:
    """Split a Document into budgeted chunks, preferring sentence boundaries.

    Sentences that individually exceed the budget fall back to word-boundary
    splits; a single word over the budget is an error. Chunks never span
    sections. Deterministic: same document and budget give identical chunks.
    """
    if budget < MIN_CHUNK_BUDGET:
        raise ValueError(f"budget must be at least {MIN_CHUNK_BUDGET}, got {budget}")

    chunks: list[SubDocument] = []
    seq = 0
    for section in doc.sections:
        body = section.body
        pieces: list[tuple[int, int]] = []
        for span in _sentence_spans(body):
            if token_counter(body[span[0]:span[1]]) > budget:
                pieces.extend(_split_oversized(body, span, budget, token_counter))
            else:
                pieces.append(span)

        current: tuple[int, int] | None = None
        spans_out: list[tuple[int, int]] = []
        for p_start, p_end in pieces:
            if current is not None and token_counter(body[current[0]:p_end]) <= budget:
                current = (current[0], p_end)
            else:
                if current is not None:
                    spans_out.append(current)
                current = (p_start, p_end)
        if current is not None:
            spans_out.append(current)

        for s, e in spans_out:
            text = body[s:e]
            chunks.append(SubDocument(
                chunk_id=f"{doc.doc_id}#{seq:04d}",
                doc_id=doc.doc_id,
                heading_path=list(section.heading_path),
                text=text,
                token_count=token_counter(text),
            ))
            seq += 1
    return chunks


def chunks_to_jsonl(chunks: Iterable[SubDocument]) -> str:
    """One JSON object per line, fields exactly as the SubDocument type."""
    return "".join(json.dumps(asdict(c), ensure_ascii=False) + "\n" for c in chunks)


def chunks_from_jsonl(text: str) -> list[SubDocument]:
    chunks = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"chunks line {i}: parse error at byte {exc.pos}") from None
        try:
            chunks.append(SubDocument(
                chunk_id=obj["chunk_id"],
                doc_id=obj["doc_id"],
                heading_path=list(obj["heading_path"]),
                text=obj["text"],
                token_count=int(obj["token_count"]),
            ))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"chunks line {i}: missing field {exc}") from None
    return chunks
