"""Adapter command line: batch predictions and vector files.

Chat credentials come from KGTEXT_ADAPTER_API_BASE, KGTEXT_ADAPTER_API_KEY,
and KGTEXT_ADAPTER_MODEL. Exit codes: 0 ok, 2 usage, 3 missing file,
4 protocol/encoder error, 5 backend configuration error.
"""

import argparse
import logging
import sys

from .backends import BACKENDS, BackendError, make_backend
from .embed import DEFAULT_DIM, DEFAULT_SBERT_MODEL, ENCODERS, EncoderError, embed_texts, make_encoder
from .protocol import ProtocolError
from .run_batch import run_batch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgtext-adapter", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-batch", help="predict over dataset records, file to file")
    p.add_argument("--records", required=True, help="request records (.jsonl or .jsonl.gz)")
    p.add_argument("--out", required=True, help="response records output path")
    p.add_argument("--backend", choices=BACKENDS, default="echo")
    p.add_argument("--k", type=int, default=50, help="max candidates per query (default 50)")
    p.add_argument("--seed", type=int, default=None, help="decoder seed, where supported")
    p.add_argument("--api-base", dest="api_base", help="chat endpoint base URL")
    p.add_argument("--model", help="chat model name")
    p.set_defaults(func=cmd_run_batch)

    p = sub.add_parser("embed", help="write unit-normalized vectors for key<TAB>text lines")
    p.add_argument("--texts", required=True, help="input TSV of key<TAB>text")
    p.add_argument("--out", required=True, help="vector file output path")
    p.add_argument("--encoder", choices=ENCODERS, default="hash")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM, help="hash encoder width")
    p.add_argument("--model", default=DEFAULT_SBERT_MODEL, help="sentence encoder model name")
    p.set_defaults(func=cmd_embed)

    return parser


def cmd_run_batch(args) -> int:
    kwargs = {}
    if args.backend == "chat":
        kwargs = {"base_url": args.api_base, "model": args.model, "seed": args.seed}
    backend = make_backend(args.backend, **kwargs)
    try:
        print(run_batch(args.records, args.out, backend, k=args.k))
    finally:
        if hasattr(backend, "close"):
            backend.close()
    return 0


def cmd_embed(args) -> int:
    encoder = make_encoder(args.encoder, dim=args.dim, model_name=args.model)
    print(embed_texts(args.texts, args.out, encoder))
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ProtocolError, EncoderError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except BackendError as e:
        print(f"error: {e}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
