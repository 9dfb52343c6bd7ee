"""Command-line entry point.

Subcommands: extract (corpus directory to dataset file) and make-fixture
(synthetic corpus for smoke tests). Exit codes: 0 success, 1
runtime/validation failure (diagnostic on stderr), 2 usage error (from
argparse). Logging goes to stderr; the FICG_EXTRACT_LOG environment
variable (error, info, debug) sets the level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .corpus import CorpusError, load_corpus
from .features import offline_backends
from .fixture import make_fixture
from .pipeline import extract_corpus
from .writer import write_dataset

log = logging.getLogger("ficg_extractor")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("FICG_EXTRACT_LOG", "info").strip().lower()
    level = _LOG_LEVELS.get(name)
    logging.basicConfig(level=logging.INFO if level is None else level,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if level is None and name not in ("", "info"):
        log.warning("unknown FICG_EXTRACT_LOG value %r; using info", name)


def _make_backends(args: argparse.Namespace):
    if args.backend == "offline":
        return offline_backends()
    from .pretrained import pretrained_backends
    return pretrained_backends(layer=args.speech_layer)


def _cmd_extract(args: argparse.Namespace) -> int:
    dialogues = load_corpus(args.corpus)
    backends = _make_backends(args)
    result = extract_corpus(dialogues, backends, jobs=args.jobs)
    write_dataset(list(result.dialogues), result.dims, result.n_speakers,
                  args.out)
    print(f"dialogues={len(result.dialogues)} dropped={len(result.dropped)} "
          f"n_speakers={result.n_speakers} out={args.out}")
    return 0


def _cmd_make_fixture(args: argparse.Namespace) -> int:
    ids = make_fixture(args.out, n_dialogues=args.n_dialogues,
                       turns=args.turns, seed=args.seed,
                       silent_dialogue=args.silent_dialogue)
    print(f"dialogues={len(ids)} out={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ficg-extract",
        description="Extract dialogue features and prosody targets from a "
                    "corpus of transcribed, aligned audio.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="featurize a corpus into a dataset file")
    p.add_argument("--corpus", required=True, help="corpus root directory")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--jobs", type=int, default=1,
                   help="dialogues processed in parallel")
    p.add_argument("--backend", choices=("offline", "pretrained"),
                   default="offline",
                   help="offline hashed/mel features or pretrained encoders")
    p.add_argument("--speech-layer", type=int, default=-1,
                   help="hidden layer of the pretrained speech encoder to use")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("make-fixture", help="write a small synthetic corpus")
    p.add_argument("--out", required=True, help="corpus root directory")
    p.add_argument("--n-dialogues", type=int, default=3)
    p.add_argument("--turns", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--silent-dialogue", action="store_true",
                   help="append one unvoiced dialogue (pipelines must drop it)")
    p.set_defaults(func=_cmd_make_fixture)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
