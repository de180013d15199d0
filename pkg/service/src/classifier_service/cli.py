"""Command line entry point: parse flags, build the app, serve it."""

from __future__ import annotations

import argparse
from typing import Sequence

from . import __version__
from .app import Settings, create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classifier-service",
        description="Serve label scoring and next-token distributions over HTTP.",
    )
    parser.add_argument("--version", action="version", version=f"classifier-service {__version__}")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8601)
    parser.add_argument(
        "--classifier",
        default="lexical",
        help="backend spec: 'lexical' or 'hf:<model-id>'",
    )
    parser.add_argument(
        "--auth-token",
        default=None,
        help="require 'Authorization: Bearer <token>' on every endpoint except /health",
    )
    parser.add_argument("--max-text-chars", type=int, default=10_000)
    parser.add_argument("--max-labels", type=int, default=256)
    parser.add_argument("--max-context-tokens", type=int, default=512)
    parser.add_argument("--default-top-k", type=int, default=512)
    return parser


def settings_from_args(args: argparse.Namespace) -> Settings:
    return Settings(
        classifier=args.classifier,
        auth_token=args.auth_token,
        max_text_chars=args.max_text_chars,
        max_labels=args.max_labels,
        max_context_tokens=args.max_context_tokens,
        default_top_k=args.default_top_k,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    app = create_app(settings_from_args(args))

    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
