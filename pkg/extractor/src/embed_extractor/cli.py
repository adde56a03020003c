"""Command-line interface.

    amr-embed-extract extract --conllu F --model ID --out F
        [--layer penultimate|mean-last-four] [--pooling head|span-average]
        [--max-pieces N] [--window-overlap N] [--device cpu]
    amr-embed-extract verify --embeddings F --conllu F

Models resolve through the standard transformers cache (HF_HOME /
TRANSFORMERS_CACHE environment variables) or a local checkpoint directory.
Exit codes: 0 success, 1 usage, 2 data/verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .extract import LAYER_CHOICES, POOLING_CHOICES, ExtractorConfig, ExtractorError, extract_corpus
from .verify import format_report, verify

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    parser = _Parser(prog="amr-embed-extract", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write contextual embeddings for a corpus")
    p.add_argument("--conllu", required=True)
    p.add_argument("--model", required=True, help="pretrained model id or local path")
    p.add_argument("--out", required=True)
    p.add_argument("--layer", choices=LAYER_CHOICES, default="penultimate")
    p.add_argument("--pooling", choices=POOLING_CHOICES, default="span-average")
    p.add_argument("--max-pieces", type=int, default=None)
    p.add_argument("--window-overlap", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="check an embedding file against its corpus")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--conllu", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def cmd_extract(args):
    config = ExtractorConfig(
        model=args.model,
        layer=args.layer,
        pooling=args.pooling,
        max_pieces=args.max_pieces,
        window_overlap=args.window_overlap,
        device=args.device,
    )
    stats = extract_corpus(args.conllu, config, args.out)
    print(json.dumps(stats))
    return EXIT_OK


def cmd_verify(args):
    report = verify(args.embeddings, args.conllu)
    print(format_report(report))
    return EXIT_OK if report["ok"] else EXIT_DATA


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExtractorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
