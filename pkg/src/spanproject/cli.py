"""Command-line entry point: project, evaluate, sweep, serve-check, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import HttpModelClient
from .config import CANDIDATE_SOURCES, METHODS, SCORERS, RunConfig
from .corpus import CategoryMap, parse_conll
from .errors import (
    BackendError,
    ConfigurationError,
    CorpusFormatError,
    EvaluationError,
    SpanProjectError,
)
from .evaluation import span_f1
from .pipeline import run_project, sweep_candidate_counts


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", default="tprojection", help=f"one of: {', '.join(METHODS)}")
    parser.add_argument("--beams", type=int, default=100, dest="n_beams")
    parser.add_argument("--endpoint", default=None, help="model backend address (http:// or mock://)")
    parser.add_argument("--categories", default=None, help="JSON file mapping raw tags to category names")
    parser.add_argument("--src-lang", default="en")
    parser.add_argument("--tgt-lang", default="es")
    parser.add_argument("--alignments", default=None, help="Pharaoh alignment file (method=alignment)")
    parser.add_argument("--gold", default=None, help="gold target CoNLL for evaluation / oracle")
    parser.add_argument("--report-json", default=None, help="write the evaluation report here")
    parser.add_argument("--scorer", default="translation", help=f"one of: {', '.join(SCORERS)}")
    parser.add_argument(
        "--candidate-source", default="generator", help=f"one of: {', '.join(CANDIDATE_SOURCES)}"
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--cache-dir", default=None)
    parser.add_argument("--max-new-tokens", type=int, default=128)
    parser.add_argument("--ngram-fallback", action="store_true")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        method=args.method,
        n_beams=args.n_beams,
        batch_size=args.batch_size,
        endpoint=args.endpoint,
        categories_path=args.categories,
        src_lang=args.src_lang,
        tgt_lang=args.tgt_lang,
        seed=args.seed,
        cache_dir=args.cache_dir,
        alignments_path=args.alignments,
        gold_path=args.gold,
        scorer=args.scorer,
        candidate_source=args.candidate_source,
        ngram_fallback=args.ngram_fallback,
        workers=args.workers,
        max_new_tokens=args.max_new_tokens,
    )


def _cmd_project(args: argparse.Namespace) -> int:
    report, metadata = run_project(
        _config_from_args(args), args.source, args.target, args.out, args.report_json
    )
    print(f"wrote {args.out} ({metadata['pairs']} sentences, {metadata['assigned']} spans assigned)")
    if report is not None:
        print(report.render_table())
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    category_map = None
    if args.categories:
        category_map = CategoryMap.from_json(Path(args.categories).read_text(encoding="utf-8"))
    predicted = parse_conll(Path(args.pred).read_text(encoding="utf-8").splitlines(), category_map)
    gold = parse_conll(Path(args.gold).read_text(encoding="utf-8").splitlines(), category_map)
    report = span_f1(predicted, gold)
    print(report.render_table())
    if args.report_json:
        Path(args.report_json).write_text(
            json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    rows = sweep_candidate_counts(
        _config_from_args(args), counts, args.source, args.target, args.gold_file
    )
    print(f"{'count':>7}  {'micro F1':>9}")
    for row in rows:
        print(f"{row['count']:>7}  {row['micro_f1']:>9.4f}")
    if args.report_json:
        Path(args.report_json).write_text(
            json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    return 0


def _cmd_serve_check(args: argparse.Namespace) -> int:
    client = HttpModelClient(args.endpoint, timeout=args.timeout)
    try:
        health = client.health()
    finally:
        client.close()
    print(json.dumps(health, indent=2, sort_keys=True))
    status = health.get("status")
    if status != "ok":
        print(f"backend reports status {status!r}", file=sys.stderr)
        return 1
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(args.endpoint), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spanproject",
        description="Project span annotations from a labeled corpus onto parallel translations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project a parallel corpus and write target CoNLL")
    p.add_argument("source", help="labeled source CoNLL file")
    p.add_argument("target", help="unlabeled target file (CoNLL or JSONL with 'tokens')")
    p.add_argument("--out", required=True, help="output CoNLL path")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("evaluate", help="span F1 of a predicted CoNLL file against gold")
    p.add_argument("pred")
    p.add_argument("gold")
    p.add_argument("--categories", default=None)
    p.add_argument("--report-json", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="rerun the pipeline over several beam counts")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--gold-file", required=True, dest="gold_file")
    p.add_argument("--counts", required=True, help="comma-separated ascending beam counts")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve-check", help="probe a model backend's health endpoint")
    p.add_argument("--endpoint", required=True)
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=_cmd_serve_check)

    p = sub.add_parser("serve", help="run the projection HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8100)
    p.add_argument("--endpoint", default=None, help="default model backend for requests")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return 2
    except (CorpusFormatError, EvaluationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except SpanProjectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
