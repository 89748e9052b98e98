"""Command line entry point: ingest, index, store, query, bench, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baseline import build_store, load_store, save_store
from .bench import (
    check_reference_arithmetic,
    emit_report,
    load_rubric,
    run_benchmark,
)
from .errors import ProviderError
from .generation import GenerationConfig, answer_query, by_chunk_id
from .ingest import (
    DEFAULT_CHUNK_BUDGET,
    chunk_document,
    chunks_from_jsonl,
    chunks_to_jsonl,
    parse_document,
)
from .karindex import build_index, index_stats, load_index, save_index
from .keywords import (
    DEFAULT_CHUNK_KEYWORDS,
    DEFAULT_DIVERSITY,
    DEFAULT_NGRAM_MAX,
    DEFAULT_NGRAM_MIN,
    DEFAULT_QUERY_KEYWORDS,
    ExtractorConfig,
)
from .providers import completion_from_config, embedder_from_config
from .service import load_service_config, run_service


def _read_chunks(path: str):
    return chunks_from_jsonl(Path(path).read_text(encoding="utf-8"))


def _cmd_ingest(args: argparse.Namespace) -> int:
    raw = Path(args.doc).read_bytes()
    doc_id = args.doc_id or Path(args.doc).stem
    doc = parse_document(raw, args.format, doc_id=doc_id)
    chunks = chunk_document(doc, args.budget)
    Path(args.out).write_text(chunks_to_jsonl(chunks), encoding="utf-8")
    print(f"{doc.doc_id}: {len(chunks)} chunks -> {args.out}")
    return 0


def _extractor_config(args: argparse.Namespace) -> ExtractorConfig:
    return ExtractorConfig(k=args.k, ngram_min=args.ngram_min,
                           ngram_max=args.ngram_max, diversity=args.diversity)


def _cmd_index_build(args: argparse.Namespace) -> int:
    chunks = _read_chunks(args.chunks)
    embedder = embedder_from_config(args.embedder)
    index = build_index(chunks, embedder, _extractor_config(args),
                        budget=args.budget)
    save_index(index, args.out)
    stats = index_stats(index)
    print(f"indexed {stats.chunk_count} chunks, {stats.distinct_keywords} "
          f"distinct keywords -> {args.out}")
    return 0


def _cmd_index_stats(args: argparse.Namespace) -> int:
    stats = index_stats(load_index(args.index))
    print(f"chunk_count: {stats.chunk_count}")
    print(f"distinct_keywords: {stats.distinct_keywords}")
    print(f"mean_keywords_per_chunk: {stats.mean_keywords_per_chunk:.2f}")
    return 0


def _cmd_store_build(args: argparse.Namespace) -> int:
    chunks = _read_chunks(args.chunks)
    embedder = embedder_from_config(args.embedder)
    store = build_store(chunks, embedder)
    save_store(store, args.out)
    print(f"embedded {len(store.vectors)} chunks (dimension {store.dimension}) "
          f"-> {args.out}")
    return 0


def _cmd_query(args: argparse.Namespace) -> int:
    chunks = by_chunk_id(_read_chunks(args.chunks))
    llm = completion_from_config(args.llm)
    index = load_index(args.index) if args.index else None
    store = load_store(args.store) if args.store else None
    embedder = embedder_from_config(args.embedder) if args.embedder else None
    record = answer_query(
        args.query, args.mode, chunks=chunks, llm=llm, index=index, store=store,
        embedder=embedder, top_k=args.top_k, scoring=args.scoring,
        query_config=ExtractorConfig(k=args.query_keywords),
        generation_config=GenerationConfig(model=args.model),
        always_call_llm=args.always_call_llm)
    if args.json:
        print(json.dumps({
            "answer": record.answer,
            "answer_length": record.answer_length,
            "mode": record.mode,
            "timings": {
                "retrieval": record.timings.retrieval,
                "generation": record.timings.generation,
                "total": record.timings.total,
            },
            "context_chunk_ids": record.context_chunk_ids,
        }, indent=2, ensure_ascii=False))
    else:
        print(record.answer)
        print(f"[mode={record.mode} retrieval={record.timings.retrieval:.3f}s "
              f"generation={record.timings.generation:.3f}s "
              f"total={record.timings.total:.3f}s "
              f"context={','.join(record.context_chunk_ids) or '-'}]",
              file=sys.stderr)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    if args.verify_arithmetic:
        print("query | computed | recorded | status")
        for check in check_reference_arithmetic():
            status = "ok" if check.note is None else f"DIVERGES ({check.note})"
            print(f"{check.query} | {check.computed:.2f} | "
                  f"{check.reported:.2f} | {status}")
        return 0
    missing = [name for name in ("queries", "chunks", "index", "store")
               if getattr(args, name) is None]
    if missing:
        print(f"error: missing required arguments: "
              f"{', '.join('--' + m for m in missing)}", file=sys.stderr)
        return 2
    queries = [line.strip() for line in
               Path(args.queries).read_text(encoding="utf-8").splitlines()
               if line.strip()]
    chunks = by_chunk_id(_read_chunks(args.chunks))
    rows = run_benchmark(
        queries,
        chunks=chunks,
        index=load_index(args.index),
        store=load_store(args.store),
        embedder=embedder_from_config(args.embedder),
        llm=completion_from_config(args.llm),
        rubric=load_rubric(Path(args.rubric)) if args.rubric else None,
        top_k=args.top_k,
        scoring=args.scoring,
        order=args.order,
    )
    report = emit_report(rows, args.format)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
        print(f"wrote {len(rows)} rows -> {args.out}")
    else:
        print(report, end="")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    run_service(load_service_config(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kar",
                                     description="keyword augmented retrieval")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and chunk a document")
    p.add_argument("--doc", required=True)
    p.add_argument("--format", default="markdown",
                   choices=["markdown", "plaintext", "plaintext-with-heading-markers"])
    p.add_argument("--doc-id", default=None)
    p.add_argument("--budget", type=int, default=DEFAULT_CHUNK_BUDGET)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    index = sub.add_parser("index", help="keyword index operations")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    p = index_sub.add_parser("build", help="build a keyword index from chunks")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embedder", default="mock:16")
    p.add_argument("--k", type=int, default=DEFAULT_CHUNK_KEYWORDS)
    p.add_argument("--ngram-min", type=int, default=DEFAULT_NGRAM_MIN)
    p.add_argument("--ngram-max", type=int, default=DEFAULT_NGRAM_MAX)
    p.add_argument("--diversity", type=float, default=DEFAULT_DIVERSITY)
    p.add_argument("--budget", type=int, default=DEFAULT_CHUNK_BUDGET)
    p.set_defaults(func=_cmd_index_build)
    p = index_sub.add_parser("stats", help="print index statistics")
    p.add_argument("index")
    p.set_defaults(func=_cmd_index_stats)

    store = sub.add_parser("store", help="embedding store operations")
    store_sub = store.add_subparsers(dest="store_command", required=True)
    p = store_sub.add_parser("build", help="embed chunks into a vector store")
    p.add_argument("--chunks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embedder", default="mock:16")
    p.set_defaults(func=_cmd_store_build)

    p = sub.add_parser("query", help="answer a query")
    p.add_argument("--query", required=True)
    p.add_argument("--mode", default="kar", choices=["kar", "regular"])
    p.add_argument("--chunks", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--embedder", default=None)
    p.add_argument("--llm", default="mock:")
    p.add_argument("--model", default="mock")
    p.add_argument("--top-k", type=int, default=4)
    p.add_argument("--scoring", default="overlap",
                   choices=["overlap", "weighted-overlap", "jaccard"])
    p.add_argument("--query-keywords", type=int, default=DEFAULT_QUERY_KEYWORDS)
    p.add_argument("--always-call-llm", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("bench", help="run the paired benchmark")
    p.add_argument("--queries", default=None, help="file with one query per line")
    p.add_argument("--chunks", default=None)
    p.add_argument("--index", default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--embedder", default="mock:16")
    p.add_argument("--llm", default="mock:")
    p.add_argument("--rubric", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="markdown",
                   choices=["markdown", "csv", "json"])
    p.add_argument("--top-k", type=int, default=4)
    p.add_argument("--scoring", default="overlap",
                   choices=["overlap", "weighted-overlap", "jaccard"])
    p.add_argument("--order", default="regular-first",
                   choices=["regular-first", "kar-first", "alternate"])
    p.add_argument("--verify-arithmetic", action="store_true",
                   help="recompute the reference timing table and exit")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ProviderError as exc:
        print(f"error ({exc.stage}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
