"""HTTP facade over ingest, retrieval, generation, and speech.

Queries read an immutable snapshot (chunks, index, store); ingest rebuilds
the artifacts under a write lock, persists them, and swaps the snapshot
atomically. Provider API keys live in environment variables named by the
config and are never logged or echoed in responses.
"""

from __future__ import annotations

import base64
import logging
import os
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import __version__
from .baseline import VectorStore, build_store, load_store, save_store
from .errors import ProviderError
from .generation import (
    DEFAULT_CONTEXT_BUDGET,
    AnswerRecord,
    GenerationConfig,
    answer_query,
)
from .ingest import (
    DEFAULT_CHUNK_BUDGET,
    SubDocument,
    chunk_document,
    chunks_from_jsonl,
    chunks_to_jsonl,
    parse_document,
)
from .karindex import (
    DEFAULT_TOP_K,
    KeywordIndex,
    build_index,
    index_stats,
    load_index,
    save_index,
)
from .keywords import DEFAULT_QUERY_KEYWORDS, ExtractorConfig
from .providers import completion_from_config, embedder_from_config
from .speech import (
    AudioBlob,
    parse_wav,
    synthesizer_from_config,
    transcriber_from_config,
    voice_query,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("kar.service")


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    corpus_dir: Path = Path("corpus")
    embedder: str = "mock:16"
    llm: str = "mock:"
    stt: str = "mock:"
    tts: str = "mock:"
    embedder_api_key_env: str = ""
    llm_api_key_env: str = ""
    stt_api_key_env: str = ""
    tts_api_key_env: str = ""
    top_k: int = DEFAULT_TOP_K
    scoring: str = "overlap"
    chunk_budget: int = DEFAULT_CHUNK_BUDGET
    context_budget: int = DEFAULT_CONTEXT_BUDGET
    keywords_per_chunk: int = 10
    keywords_per_query: int = DEFAULT_QUERY_KEYWORDS
    diversity: float = 0.5
    ngram_min: int = 1
    ngram_max: int = 2
    always_call_llm: bool = False
    model: str = "mock"
    cors_origins: list[str] = field(default_factory=list)

    @property
    def chunks_path(self) -> Path:
        return self.corpus_dir / "chunks.jsonl"

    @property
    def index_path(self) -> Path:
        return self.corpus_dir / "index.json"

    @property
    def store_path(self) -> Path:
        return self.corpus_dir / "store.json"


def load_service_config(path: str | Path) -> ServiceConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = ServiceConfig()
    service = raw.get("service", {})
    cfg.host = service.get("host", cfg.host)
    cfg.port = int(service.get("port", cfg.port))
    cfg.corpus_dir = Path(service.get("corpus_dir", cfg.corpus_dir))
    providers = raw.get("providers", {})
    for name in ("embedder", "llm", "stt", "tts"):
        setattr(cfg, name, providers.get(name, getattr(cfg, name)))
        env_key = f"{name}_api_key_env"
        setattr(cfg, env_key, providers.get(env_key, getattr(cfg, env_key)))
    retrieval = raw.get("retrieval", {})
    cfg.top_k = int(retrieval.get("top_k", cfg.top_k))
    cfg.scoring = retrieval.get("scoring", cfg.scoring)
    cfg.chunk_budget = int(retrieval.get("chunk_budget", cfg.chunk_budget))
    cfg.context_budget = int(retrieval.get("context_budget", cfg.context_budget))
    cfg.keywords_per_chunk = int(retrieval.get("keywords_per_chunk",
                                               cfg.keywords_per_chunk))
    cfg.keywords_per_query = int(retrieval.get("keywords_per_query",
                                               cfg.keywords_per_query))
    cfg.diversity = float(retrieval.get("diversity", cfg.diversity))
    cfg.ngram_min = int(retrieval.get("ngram_min", cfg.ngram_min))
    cfg.ngram_max = int(retrieval.get("ngram_max", cfg.ngram_max))
    generation = raw.get("generation", {})
    cfg.always_call_llm = bool(generation.get("always_call_llm", cfg.always_call_llm))
    cfg.model = generation.get("model", cfg.model)
    cfg.cors_origins = list(raw.get("cors", {}).get("origins", []))
    return cfg


@dataclass
class _Snapshot:
    chunks: dict[str, SubDocument]
    chunk_list: list[SubDocument]
    index: KeywordIndex
    store: VectorStore


class QueryRequest(BaseModel):
    query: str
    mode: str = "kar"
    top_k: int | None = None
    scoring: str | None = None
    always_call_llm: bool | None = None


def _record_payload(record: AnswerRecord, snapshot: _Snapshot) -> dict:
    context = []
    for chunk_id in record.context_chunk_ids:
        chunk = snapshot.chunks.get(chunk_id)
        context.append({
            "chunk_id": chunk_id,
            "heading_path": list(chunk.heading_path) if chunk else [],
        })
    return {
        "answer": record.answer,
        "answer_length": record.answer_length,
        "mode": record.mode,
        "timings": {
            "retrieval": record.timings.retrieval,
            "generation": record.timings.generation,
            "total": record.timings.total,
        },
        "context_chunk_ids": list(record.context_chunk_ids),
        "context": context,
    }


def create_app(config: ServiceConfig, *, embedder=None, llm=None, stt=None,
               tts=None) -> FastAPI:
    """Build the app. Provider arguments override the config (tests inject
    counting or fault-scripted mocks here)."""
    app = FastAPI(title="kar", version=__version__)
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def key_for(name: str) -> str | None:
        env = getattr(config, f"{name}_api_key_env")
        return os.environ.get(env) if env else None

    embedder = embedder or embedder_from_config(config.embedder, key_for("embedder"))
    llm = llm or completion_from_config(config.llm, key_for("llm"))
    stt = stt or transcriber_from_config(config.stt, key_for("stt"))
    tts = tts or synthesizer_from_config(config.tts, key_for("tts"))

    extractor_config = ExtractorConfig(
        k=config.keywords_per_chunk, ngram_min=config.ngram_min,
        ngram_max=config.ngram_max, diversity=config.diversity)
    query_config = ExtractorConfig(
        k=config.keywords_per_query, ngram_min=config.ngram_min,
        ngram_max=config.ngram_max, diversity=config.diversity)
    generation_config = GenerationConfig(model=config.model)

    write_lock = threading.Lock()

    def empty_snapshot() -> _Snapshot:
        return _Snapshot(
            chunks={}, chunk_list=[],
            index=build_index([], embedder, extractor_config,
                              budget=config.chunk_budget),
            store=VectorStore(vectors={}, dimension=0,
                              embedder_id=embedder.embedder_id),
        )

    def load_snapshot() -> _Snapshot:
        if not config.chunks_path.exists():
            return empty_snapshot()
        chunk_list = chunks_from_jsonl(
            config.chunks_path.read_text(encoding="utf-8"))
        if config.index_path.exists() and config.store_path.exists():
            index = load_index(config.index_path)
            store = load_store(config.store_path)
        else:
            index = build_index(chunk_list, embedder, extractor_config,
                                budget=config.chunk_budget)
            store = build_store(chunk_list, embedder)
        return _Snapshot(chunks={c.chunk_id: c for c in chunk_list},
                         chunk_list=chunk_list, index=index, store=store)

    state = {"snapshot": load_snapshot()}

    def provider_error(exc: ProviderError) -> HTTPException:
        return HTTPException(status_code=503,
                             detail={"stage": exc.stage, "error": str(exc)})

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/api/stats")
    def stats() -> dict:
        snapshot = state["snapshot"]
        s = index_stats(snapshot.index)
        documents = sorted({c.doc_id for c in snapshot.chunk_list})
        return {
            "chunk_count": s.chunk_count,
            "distinct_keywords": s.distinct_keywords,
            "mean_keywords_per_chunk": s.mean_keywords_per_chunk,
            "document_count": len(documents),
            "documents": documents,
            "store_dimension": snapshot.store.dimension,
        }

    @app.post("/api/ingest")
    def ingest(file: UploadFile = File(...), format: str = Form("markdown"),
               doc_id: str | None = Form(None),
               budget: int | None = Form(None)) -> dict:
        raw = file.file.read()
        stem = Path(file.filename or "doc").stem or "doc"
        try:
            doc = parse_document(raw, format, doc_id=doc_id or stem)
            new_chunks = chunk_document(doc, budget or config.chunk_budget)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        with write_lock:
            snapshot = state["snapshot"]
            if any(c.doc_id == doc.doc_id for c in snapshot.chunk_list):
                raise HTTPException(status_code=409,
                                    detail=f"document already ingested: {doc.doc_id}")
            chunk_list = snapshot.chunk_list + new_chunks
            try:
                index = build_index(chunk_list, embedder, extractor_config,
                                    budget=config.chunk_budget)
                store = build_store(chunk_list, embedder)
            except ProviderError as exc:
                raise provider_error(exc) from None
            try:
                config.corpus_dir.mkdir(parents=True, exist_ok=True)
                config.chunks_path.write_text(chunks_to_jsonl(chunk_list),
                                              encoding="utf-8")
                save_index(index, config.index_path)
                save_store(store, config.store_path)
            except OSError as exc:
                raise HTTPException(status_code=507,
                                    detail=f"failed to persist artifacts: "
                                           f"{exc.strerror or exc}") from None
            state["snapshot"] = _Snapshot(
                chunks={c.chunk_id: c for c in chunk_list},
                chunk_list=chunk_list, index=index, store=store)
        logger.info("ingested %s: %d chunks", doc.doc_id, len(new_chunks))
        return {"doc_id": doc.doc_id, "chunks_added": len(new_chunks),
                "chunk_count": len(chunk_list)}

    def run_answer(query: str, mode: str, top_k: int | None, scoring: str | None,
                   always_call_llm: bool | None,
                   snapshot: _Snapshot) -> AnswerRecord:
        call_llm = (config.always_call_llm if always_call_llm is None
                    else always_call_llm)
        return answer_query(
            query, mode, chunks=snapshot.chunks, llm=llm,
            index=snapshot.index, store=snapshot.store, embedder=embedder,
            top_k=top_k or config.top_k, scoring=scoring or config.scoring,
            query_config=query_config, generation_config=generation_config,
            context_budget=config.context_budget, always_call_llm=call_llm)

    @app.post("/api/query")
    def query(body: QueryRequest) -> dict:
        snapshot = state["snapshot"]
        try:
            record = run_answer(body.query, body.mode, body.top_k, body.scoring,
                                body.always_call_llm, snapshot)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except ProviderError as exc:
            raise provider_error(exc) from None
        return _record_payload(record, snapshot)

    @app.post("/api/voice-query")
    def voice(file: UploadFile = File(...), mode: str = Form("kar"),
              top_k: int | None = Form(None),
              scoring: str | None = Form(None)) -> dict:
        raw = file.file.read()
        content_type = (file.content_type or "").split(";")[0].strip()
        if content_type not in ("audio/wav", "audio/x-wav", "audio/wave"):
            raise HTTPException(status_code=415,
                                detail=f"unsupported audio content type: "
                                       f"{content_type or 'unknown'}")
        try:
            sample_rate, duration = parse_wav(raw)
            audio = AudioBlob(data=raw, encoding="wav-pcm16",
                              sample_rate=sample_rate, duration=duration)
        except ValueError as exc:
            raise HTTPException(status_code=415, detail=str(exc)) from None

        snapshot = state["snapshot"]
        try:
            result = voice_query(
                audio, mode, stt=stt, tts=tts,
                chunks=snapshot.chunks, llm=llm, index=snapshot.index,
                store=snapshot.store, embedder=embedder,
                top_k=top_k or config.top_k, scoring=scoring or config.scoring,
                query_config=query_config, generation_config=generation_config,
                context_budget=config.context_budget,
                always_call_llm=config.always_call_llm)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        except ProviderError as exc:
            detail: dict = {"stage": exc.stage, "error": str(exc)}
            record = getattr(exc, "answer_record", None)
            if record is not None:
                detail["answer"] = record.answer
                detail["query"] = getattr(exc, "transcript", None)
            raise HTTPException(status_code=503, detail=detail) from None

        payload = _record_payload(result.record, snapshot)
        payload["query"] = result.transcript
        payload["speech_timing"] = {
            "stt_seconds": result.timing.stt_seconds,
            "tts_seconds": result.timing.tts_seconds,
        }
        payload["answer_audio"] = {
            "data": base64.b64encode(result.answer_audio.data).decode("ascii"),
            "encoding": result.answer_audio.encoding,
            "sample_rate": result.answer_audio.sample_rate,
            "duration": result.answer_audio.duration,
        }
        return payload

    return app


def run_service(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
