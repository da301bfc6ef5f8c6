"""
Command-line interface.

    pkspell train CORPUS -o WEIGHTS [--config FILE] [--figures DIR]
    pkspell infer MIDI --weights WEIGHTS [-o OUT]
    pkspell eval CORPUS (--weights WEIGHTS | --predictions FILE) [--group-by ATTR]
    pkspell augment CORPUS -o OUT
    pkspell quantize MIDI [--figure PNG]

Results go to stdout (tab-separated tables, JSON lines) or to ``-o``;
diagnostics go to stderr. Exit status is 0 on success, 1 on bad input and 2
on internal errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import plots
from .augment import augment_corpus
from .corpus import dumps_corpus, read_corpus, read_predictions, write_predictions
from .errors import EmptyCorpus, InputError
from .evaluate import evaluate, global_key_signature, score
from .midi import read_midi
from .model import load_weights, predict, save_weights
from .quantize import DEFAULT_K, kmeans_1d
from .train import SEED_ENV, TrainConfig, resolve_seed, train

log = logging.getLogger("pkspell")

HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "train_tpc_acc", "train_ks_acc", "val_tpc_acc", "val_ks_acc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="random seed (else $PKSPELL_SEED, else 0)")
    p.add_argument("--k", type=int, default=None, help=f"number of duration classes (default {DEFAULT_K})")
    p.add_argument("-v", "--verbose", action="store_true")
    ablation = p.add_argument_group("ablations")
    ablation.add_argument("--single-rnn", action="store_true", default=None,
                          help="one recurrent stage feeds both heads")
    ablation.add_argument("--separate", action="store_true", default=None,
                          help="independent networks for spelling and key signature")
    ablation.add_argument("--no-durations", action="store_true", default=None,
                          help="pitch-class inputs only")
    ablation.add_argument("--unidirectional", action="store_true", default=None,
                          help="left-to-right recurrence only")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="pkspell", description="Joint pitch spelling and key signature estimation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train", parents=[common], help="train a model on a labeled corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True, help="weight file to write")
    p.add_argument("--config", help="key=value training settings")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--split-fraction", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--clip-norm", type=float)
    p.add_argument("--no-augment", action="store_true", default=None)
    p.add_argument("--figures", help="directory for learning-curve figures")

    p = sub.add_parser("infer", parents=[common], help="spell the notes of a MIDI file")
    p.add_argument("midi")
    p.add_argument("--weights", required=True)
    p.add_argument("-o", "--output")
    p.add_argument("--constrained", action="store_true",
                   help="only allow spellings of each note's own pitch-class")
    p.add_argument("--weighted-global", action="store_true",
                   help="duration-weighted vote for the global key signature")

    p = sub.add_parser("eval", parents=[common], help="error counts on a labeled corpus")
    p.add_argument("corpus")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--weights")
    src.add_argument("--predictions", help="score an existing prediction file instead")
    p.add_argument("--group-by", help="piece attribute to group by, e.g. composer")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--weighted-global", action="store_true")
    p.add_argument("--figures", help="directory for the error-rate figure")

    p = sub.add_parser("augment", parents=[common], help="write transposed variants of a corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("quantize", parents=[common], help="show duration classes of a MIDI file")
    p.add_argument("midi")
    p.add_argument("--figure", help="write a clustering figure to this path")
    return parser


def _emit(text, output):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _train_config(args) -> TrainConfig:
    overrides = {}
    names = {
        "epochs": "epochs", "lr": "lr", "batch_size": "batch_size",
        "split_fraction": "split_fraction", "hidden": "hidden", "dropout": "dropout",
        "clip_norm": "clip_norm", "k": "k", "single_rnn": "single_rnn",
        "separate": "separate", "no_durations": "no_durations",
        "unidirectional": "unidirectional",
    }
    for arg, key in names.items():
        value = getattr(args, arg, None)
        if value is not None:
            overrides[key] = value
    if args.no_augment:
        overrides["augment"] = False
    base = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    # command line, then environment, then config file
    if args.seed is not None or os.environ.get(SEED_ENV):
        overrides["seed"] = resolve_seed(args.seed)
    config = replace(base, **overrides)
    try:
        config.model_config()
    except ValueError as e:
        raise InputError(f"invalid model settings: {e}") from None
    return config


def cmd_train(args):
    config = _train_config(args)
    corpus = read_corpus(args.corpus)
    if not corpus:
        raise EmptyCorpus(f"{args.corpus}: no pieces")

    def progress(row):
        log.info("epoch %d  loss %.4f  tpc %.4f  ks %.4f", row["epoch"], row["train_loss"],
                 row["train_tpc_acc"], row["train_ks_acc"])

    result = train(corpus, config, progress=progress)
    Path(args.output).write_bytes(save_weights(result.model, seed=config.seed))
    lines = ["\t".join(HISTORY_COLUMNS)]
    lines += ["\t".join(_fmt(row[c]) for c in HISTORY_COLUMNS) for row in result.history]
    sys.stdout.write("\n".join(lines) + "\n")
    if args.figures:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plots.learning_curves(result.history, Path(args.figures) / "learning_curves.png")


def _load_model(path):
    model, _ = load_weights(Path(path).read_bytes())
    return model


def cmd_infer(args):
    model = _load_model(args.weights)
    piece = read_midi(Path(args.midi).read_bytes(), piece_id=Path(args.midi).stem)
    if piece.notes:
        tpcs, kss = predict(piece, model, constrained=args.constrained)
        weights = [n.duration for n in piece.notes] if args.weighted_global else None
        gks = global_key_signature(kss, weights)
    else:
        log.warning("%s contains no notes", args.midi)
        tpcs, kss, gks = [], [], None
    data = write_predictions(piece, tpcs, kss, gks)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def cmd_eval(args):
    corpus = read_corpus(args.corpus)
    if not corpus:
        raise EmptyCorpus(f"{args.corpus}: no pieces")
    if args.weights:
        report = evaluate(corpus, _load_model(args.weights), args.group_by,
                          constrained=args.constrained, weighted_global=args.weighted_global)
    else:
        preds = {p.id: p for p in read_predictions(Path(args.predictions).read_bytes())}
        missing = [p.id for p in corpus if p.id not in preds]
        if missing:
            raise InputError(f"no predictions for pieces {missing[:5]}")
        pairs = [([n.tpc for n in preds[p.id].notes], [n.ks for n in preds[p.id].notes]) for p in corpus]
        report = score(corpus, pairs, args.group_by, args.weighted_global)
    sys.stdout.write(report.to_tsv())
    if args.figures:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plots.error_rates(report, Path(args.figures) / "error_rates.png")


def cmd_augment(args):
    corpus = read_corpus(args.corpus)
    out = augment_corpus(corpus)
    log.info("%d pieces -> %d", len(corpus), len(out))
    _emit(dumps_corpus(out), args.output)


def cmd_quantize(args):
    piece = read_midi(Path(args.midi).read_bytes(), piece_id=Path(args.midi).stem)
    if not piece.notes:
        raise InputError(f"{args.midi} contains no notes")
    durations = [n.duration for n in piece.notes]
    clustering = kmeans_1d(durations, args.k or DEFAULT_K)
    for c, centre in enumerate(clustering.centroids):
        log.info("class %d centroid %.6g s", c, centre)
    lines = ["index\tonset\tduration\tpitch\tclass\tcentroid"]
    for i, (note, c) in enumerate(zip(piece.notes, clustering.assignment)):
        lines.append(f"{i}\t{note.onset:.6g}\t{note.duration:.6g}\t{note.pitch}\t{c}\t{clustering.centroids[c]:.6g}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.figure:
        plots.duration_clusters(durations, clustering, args.figure, title=piece.id)


COMMANDS = {
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "augment": cmd_augment,
    "quantize": cmd_quantize,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (InputError, OSError) as e:
        log.error("%s", e)
        return 1
    except Exception:
        log.exception("internal error")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
