"""Command-line entry point.

Subcommands: gen-data, build-graph, export-dot, train, eval, ablate,
grad-check. Option precedence is defaults, then command-line flags, then the
--config file: a field present in the config file wins over the flag for the
same field. Exit codes: 0 success, 1 runtime/validation failure (diagnostic
on stderr), 2 usage error (from argparse). Logging goes to stderr; the
FICG_LOG environment variable (error, info, debug) sets the level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .data import (DatasetError, SynthConfig, generate_synthetic,
                   iter_training_samples, load_dataset_with_header, quantize,
                   save_dataset)
from .gradcheck import DEFAULT_TOLERANCE, run_gradient_check
from .graphs import Modality, build_pig, build_sig, export_dot, topology_counts
from .metrics import evaluate, format_report, save_report
from .model import (AblationMode, Checkpoint, load_checkpoint, save_checkpoint)
from .training import (ABLATION_ORDER, TrainConfig, TrainingDiverged,
                       format_ablation_table, run_ablation_suite,
                       split_dialogues, train)

log = logging.getLogger("ficg")

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    name = os.environ.get("FICG_LOG", "info").strip().lower()
    level = _LOG_LEVELS.get(name)
    logging.basicConfig(level=logging.INFO if level is None else level,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if level is None and name not in ("", "info"):
        log.warning("unknown FICG_LOG value %r; using info", name)


def _read_config_file(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed config JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise DatasetError(f"{path}: config must be a JSON object")
    return obj


def _merge_config(flag_values: dict, config_path: str | None) -> dict:
    """Flags first, then config-file fields on top (the file wins)."""
    merged = {k: v for k, v in flag_values.items() if v is not None}
    if config_path is not None:
        merged.update(_read_config_file(config_path))
    return merged


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_data(args: argparse.Namespace) -> int:
    dim_flags = {"word_text": args.dim_word_text, "word_speech": args.dim_word_speech,
                 "utt_text": args.dim_utt_text, "utt_speech": args.dim_utt_speech}
    flags = {"n_dialogues": args.n_dialogues,
             "turns_per_dialogue": args.turns_per_dialogue,
             "words_per_utterance": args.words_per_utterance,
             "keyword_coefficient": args.keyword_coefficient,
             "chain_coefficient": args.chain_coefficient,
             "noise_stddev": args.noise_stddev,
             "seed": args.seed}
    if any(v is not None for v in dim_flags.values()):
        flags["feature_dims"] = {k: (16 if v is None else v)
                                 for k, v in dim_flags.items()}
    config = SynthConfig.from_dict(_merge_config(flags, args.config))
    records = generate_synthetic(config)
    save_dataset(records, args.out)
    log.info("wrote %d dialogues to %s", len(records), args.out)
    return 0


def _graph_for(args: argparse.Namespace):
    _, records = load_dataset_with_header(args.data)
    for rec in records:
        if rec.dialogue_id == args.dialogue:
            build = build_sig if args.modality == Modality.SEMANTIC.value else build_pig
            return build(rec.utterances)
    raise DatasetError(f"dialogue {args.dialogue!r} not found in {args.data}")


def _cmd_build_graph(args: argparse.Namespace) -> int:
    counts = topology_counts(_graph_for(args))
    print(f"nodes={counts.n_nodes} edges={counts.n_edges}")
    for kind in sorted(counts.nodes_by_kind, key=lambda k: k.value):
        print(f"nodes.{kind.value}={counts.nodes_by_kind[kind]}")
    for kind in sorted(counts.edges_by_kind, key=lambda k: k.value):
        print(f"edges.{kind.value}={counts.edges_by_kind[kind]}")
    for degree, n in counts.in_degree_hist.items():
        print(f"in_degree[{degree}]={n}")
    return 0


def _cmd_export_dot(args: argparse.Namespace) -> int:
    Path(args.out).write_text(export_dot(_graph_for(args)), encoding="utf-8")
    log.info("wrote %s", args.out)
    return 0


_TRAIN_FLAG_FIELDS = ("d_model", "d_hidden", "learning_rate", "epochs",
                      "batch_size", "seed", "max_history", "ablation",
                      "optimizer", "passes", "normalize", "speaker_to_prosody")


def _train_config(args: argparse.Namespace) -> TrainConfig:
    flags = {f: getattr(args, f) for f in _TRAIN_FLAG_FIELDS}
    return TrainConfig.from_dict(_merge_config(flags, args.config))


def _load_split_samples(path: str, config: TrainConfig):
    header, records = load_dataset_with_header(path)
    if header.dims is None or not records:
        raise DatasetError(f"{path}: dataset is empty")
    train_recs, val_recs, test_recs = split_dialogues(records, seed=config.seed)
    return header, train_recs, val_recs, test_recs


def _cmd_train(args: argparse.Namespace) -> int:
    config = _train_config(args)
    header, train_recs, val_recs, _ = _load_split_samples(args.data, config)
    train_s = iter_training_samples(train_recs, config.max_history)
    val_s = iter_training_samples(val_recs, config.max_history)
    log.info("training on %d samples (%d dialogues), validating on %d",
             len(train_s), len(train_recs), len(val_s))
    result = train(train_s, val_s, header.dims, header.n_speakers, config)
    ckpt = Checkpoint(params=result.params, dims=header.dims,
                      n_speakers=header.n_speakers,
                      settings=config.encoder_settings(),
                      max_history=config.max_history)
    save_checkpoint(ckpt, args.out)
    log_path = str(args.out) + ".log.jsonl"
    lines = [json.dumps({"epoch": st.epoch, "train_loss": quantize(st.train_loss),
                         "val_loss": quantize(st.val_loss)}, separators=(",", ":"))
             for st in result.history]
    Path(log_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    best_val = result.history[result.best_epoch - 1].val_loss
    print(f"best_epoch={result.best_epoch} val_loss={quantize(best_val):.9g}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    ckpt = load_checkpoint(args.model)
    header, records = load_dataset_with_header(args.data)
    if header.dims is None or not records:
        raise DatasetError(f"{args.data}: dataset is empty")
    if header.dims != ckpt.dims:
        raise DatasetError(f"dataset dims {header.dims.to_dict()} do not match "
                           f"checkpoint dims {ckpt.dims.to_dict()}")
    samples = iter_training_samples(records, ckpt.max_history)
    if not samples:
        raise DatasetError(f"{args.data}: no dialogue has two or more utterances")
    mode = AblationMode(args.mode)
    report = evaluate(ckpt.params, mode, samples, settings=ckpt.settings,
                      jobs=args.jobs)
    sys.stdout.write(format_report(report))
    if args.report is not None:
        save_report(report, args.report)
        log.info("wrote %s", args.report)
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    config = _train_config(args)
    _, train_recs, val_recs, test_recs = _load_split_samples(args.data, config)
    results = run_ablation_suite(train_recs, val_recs, test_recs, config)
    sys.stdout.write(format_ablation_table(results))
    rows = [{"mode": mode.value,
             "mae_pitch": quantize(results[mode].mae_pitch),
             "mae_energy": quantize(results[mode].mae_energy),
             "n_samples": results[mode].n_samples}
            for mode in ABLATION_ORDER]
    Path(args.out).write_text(json.dumps({"rows": rows}, separators=(",", ":"))
                              + "\n", encoding="utf-8")
    return 0


def _cmd_grad_check(args: argparse.Namespace) -> int:
    worst, errors = run_gradient_check(seed=args.seed, d_model=args.dims,
                                       instances=args.instances)
    print(f"instances={len(errors)} max_rel_error={worst:.3e}")
    if worst > DEFAULT_TOLERANCE:
        log.error("gradient check failed: %.3e > %.0e", worst, DEFAULT_TOLERANCE)
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; its fields override flags")
    p.add_argument("--d-model", dest="d_model", type=int, default=None)
    p.add_argument("--d-hidden", dest="d_hidden", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-history", dest="max_history", type=int, default=None,
                   help="history window; omit for the whole dialogue prefix")
    p.add_argument("--ablation", choices=[m.value for m in AblationMode], default=None)
    p.add_argument("--optimizer", choices=["adam", "sgd"], default=None)
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--speaker-to-prosody", dest="speaker_to_prosody",
                   action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ficg",
        description="Dialogue-history graph encoders for pitch/energy prediction.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dialogue dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config file; its fields override flags")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-dialogues", dest="n_dialogues", type=int, default=None)
    p.add_argument("--turns-per-dialogue", dest="turns_per_dialogue", type=int,
                   default=None)
    p.add_argument("--words-per-utterance", dest="words_per_utterance", type=int,
                   default=None)
    p.add_argument("--keyword-coefficient", dest="keyword_coefficient", type=float,
                   default=None)
    p.add_argument("--chain-coefficient", dest="chain_coefficient", type=float,
                   default=None)
    p.add_argument("--noise-stddev", dest="noise_stddev", type=float, default=None)
    p.add_argument("--dim-word-text", dest="dim_word_text", type=int, default=None)
    p.add_argument("--dim-word-speech", dest="dim_word_speech", type=int, default=None)
    p.add_argument("--dim-utt-text", dest="dim_utt_text", type=int, default=None)
    p.add_argument("--dim-utt-speech", dest="dim_utt_speech", type=int, default=None)
    p.set_defaults(func=_cmd_gen_data)

    for name, func in (("build-graph", _cmd_build_graph),
                       ("export-dot", _cmd_export_dot)):
        p = sub.add_parser(name, help=("print topology counts" if name == "build-graph"
                                       else "write a DOT rendering"))
        p.add_argument("--data", required=True)
        p.add_argument("--dialogue", required=True, help="dialogue_id to use")
        p.add_argument("--modality", choices=[m.value for m in Modality],
                       default=Modality.SEMANTIC.value)
        if name == "export-dot":
            p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("train", help="train a model and save a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path; an epoch log is "
                   "written next to it as <out>.log.jsonl")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=[m.value for m in AblationMode],
                   default=AblationMode.FULL.value)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--report", default=None, help="also write a JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="train and score all four ablation modes")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="JSON results path")
    _add_train_flags(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("grad-check", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", type=int, default=8, help="model width to test")
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, TrainingDiverged, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
