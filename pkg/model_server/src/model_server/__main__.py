"""Run the sidecar: python -m model_server [flags]."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import ServeConfig


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="model-server")
    parser.add_argument("--engine", default="toy", choices=["toy", "hf"])
    parser.add_argument("--generator-model", default=None)
    parser.add_argument("--scorer-model", default=None)
    parser.add_argument("--embedder-model", default=None)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch", type=int, default=8)
    parser.add_argument("--max-new-tokens", type=int, default=256)
    parser.add_argument("--max-n-beams", type=int, default=200)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument("--lexicon", default=None, help="toy engine word map JSON")
    parser.add_argument("--src-lang", default="en")
    parser.add_argument("--tgt-lang", default="es")
    args = parser.parse_args(argv)
    config = ServeConfig(
        engine=args.engine,
        generator_model=args.generator_model,
        scorer_model=args.scorer_model,
        embedder_model=args.embedder_model,
        device=args.device,
        max_batch=args.max_batch,
        max_new_tokens=args.max_new_tokens,
        max_n_beams=args.max_n_beams,
        host=args.host,
        port=args.port,
        lexicon_path=args.lexicon,
        src_lang=args.src_lang,
        tgt_lang=args.tgt_lang,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
