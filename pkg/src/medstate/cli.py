"""Command-line interface: one executable, one subcommand per stage.

``reproduce`` chains the whole pipeline (synth, segment, filter, extract,
partition, optional grid search, train-bank, evaluate) and writes
Table-shaped reports.  Every run echoes its effective configuration into
the output directory, and all randomness flows from one ``--seed``.

Exit codes: 0 success, 2 usage error, 3 missing input, 4 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiment.bank import load_bank, save_bank, train_speaker_bank
from .experiment.config import (
    DEFAULT_CONFIG,
    REFERENCE_CONFIGS,
    FeatureSet,
    GlobalConfig,
    full_search_space,
)
from .experiment.manifest import DEFAULT_SPLIT, load_manifest, partition, save_manifest
from .experiment.pipeline import (
    FEATURE_SET_NAMES,
    FeatureRepository,
    extract_stage,
    filter_stage,
    load_filter_models,
    save_filter_models,
    segment_stage,
    speaker_id_features,
    train_therapist_filter,
)
from .experiment.report import evaluate, save_report
from .experiment.search import cells_to_dict, grid_search
from .features import FeatureMatrix, load_features
from .features.types import FeatureKind
from .neuralnet import TrainConfig
from .segmentation import SnsFsmParams, load_segments, save_segments
from .signalio import read_wav
from .speakerid import (
    MapConfig,
    calibrate_threshold,
    filter_therapist,
    load_gmm,
    map_adapt,
    save_gmm,
    train_ubm,
)
from .synthcorpus import CorpusSpec, generate_corpus

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_STAGE_FAILURE = 4


class MissingInputError(FileNotFoundError):
    pass


def _echo_config(out_dir, payload: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _require(path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing {what}: {path}")
    return path


def _load_manifest_checked(corpus_dir, name: str):
    return load_manifest(_require(Path(corpus_dir) / name, f"{name} manifest"))


def _fsm_params(args) -> SnsFsmParams:
    return SnsFsmParams(args.enter, args.exit, args.min_speech_ms, args.min_pause_ms)


def _train_config(args, learning_rate: float) -> TrainConfig:
    return TrainConfig(
        learning_rate=learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=0,
        balance_classes=args.balance_classes,
    )


def _parse_global_config(text: str) -> GlobalConfig:
    return GlobalConfig.from_dict(json.loads(text))


def _search_space(name: str) -> list[GlobalConfig]:
    if name == "reference":
        return list(REFERENCE_CONFIGS)
    if name == "full":
        return full_search_space()
    raise ValueError(f"unknown search space {name!r}")


def cmd_synth(args) -> int:
    spec = CorpusSpec(
        num_speakers=args.speakers,
        num_controls=args.controls,
        effect_delta=args.delta,
        snr_db=args.snr_db,
        master_seed=args.seed,
        duration_scale=args.duration_scale,
        therapist_f0=args.therapist_f0,
    )
    generate_corpus(spec, args.out)
    print(f"synth: wrote corpus to {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    failures = segment_stage(manifest, args.out, _fsm_params(args), args.seed, args.jobs)
    for rec, err in sorted(failures.items()):
        print(f"segment: {rec}: {err}", file=sys.stderr)
    print(f"segment: {len(manifest) - len(failures)}/{len(manifest)} recordings segmented")
    return EXIT_OK if not failures else EXIT_STAGE_FAILURE


def cmd_filter_therapist(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    control = _load_manifest_checked(args.corpus, "control.csv")
    _require(args.segments, "segments directory")
    models, stats = train_therapist_filter(
        control, args.components, args.relevance, args.seed, args.jobs
    )
    out = Path(args.out)
    save_filter_models(out, models, stats)
    failures = filter_stage(manifest, args.segments, out, out / "filtered", args.jobs)
    for rec, err in sorted(failures.items()):
        print(f"filter-therapist: {rec}: {err}", file=sys.stderr)
    print(
        f"filter-therapist: threshold={models.threshold:.4f} "
        f"insertion={stats['insertion_rate']:.4f} deletion={stats['deletion_rate']:.4f}"
    )
    return EXIT_OK if not failures else EXIT_STAGE_FAILURE


def cmd_extract(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    _require(args.filtered, "filtered segments directory")
    feature_sets = tuple(args.features.split(","))
    failures = extract_stage(manifest, args.filtered, args.out, feature_sets, args.jobs)
    for rec, err in sorted(failures.items()):
        print(f"extract: {rec}: {err}", file=sys.stderr)
    print(f"extract: cached {sorted(feature_sets)} for {len(manifest) - len(failures)} recordings")
    return EXIT_OK


def cmd_partition(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    train, dev, test = partition(manifest, DEFAULT_SPLIT)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, subset in (("train", train), ("dev", dev), ("test", test)):
        save_manifest(out / f"{name}.csv", subset)
    print(f"partition: train={len(train)} dev={len(dev)} test={len(test)}")
    return EXIT_OK


def cmd_grid_search(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    repo = FeatureRepository(_require(args.features_dir, "features directory"))
    space = _search_space(args.search)
    best, cells = grid_search(
        repo,
        manifest,
        DEFAULT_SPLIT,
        space,
        args.seed,
        _train_config(args, learning_rate=0.003),
        args.jobs,
    )
    payload = {"best": best.to_dict(), "cells": cells_to_dict(cells), "seed": args.seed}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"grid-search: best {best.describe()}")
    return EXIT_OK


def cmd_train_bank(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    repo = FeatureRepository(_require(args.features_dir, "features directory"))
    config = _parse_global_config(args.config) if args.config else DEFAULT_CONFIG
    bank = train_speaker_bank(
        repo,
        manifest,
        DEFAULT_SPLIT,
        config,
        args.seed,
        _train_config(args, config.learning_rate),
        args.jobs,
    )
    save_bank(args.out, bank)
    for speaker, reason in sorted(bank.excluded.items()):
        print(f"train-bank: excluded {speaker}: {reason}", file=sys.stderr)
    print(f"train-bank: trained {bank.size} speaker models ({config.describe()})")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = _load_manifest_checked(args.corpus, "manifest.csv")
    repo = FeatureRepository(_require(args.features_dir, "features directory"))
    bank_dir = Path(args.bank)
    if not (bank_dir / "bank.json").exists():
        raise MissingInputError(f"missing model bank: {bank_dir}")
    bank = load_bank(bank_dir)
    report = evaluate(bank, repo, manifest, DEFAULT_SPLIT, args.split)
    save_report(args.out, report)
    print(
        f"evaluate[{args.split}]: accuracy {100.0 * report.overall.accuracy:.2f}% "
        f"({report.overall.correct}/{report.overall.total})"
    )
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    config = _parse_global_config(args.config) if args.config else DEFAULT_CONFIG
    effective = {
        "seed": args.seed,
        "speakers": args.speakers,
        "controls": args.controls,
        "delta": args.delta,
        "snr_db": args.snr_db,
        "duration_scale": args.duration_scale,
        "therapist_f0": args.therapist_f0,
        "fsm": {
            "enter": args.enter,
            "exit": args.exit,
            "min_speech_ms": args.min_speech_ms,
            "min_pause_ms": args.min_pause_ms,
        },
        "ubm_components": args.components,
        "relevance": args.relevance,
        "config": config.to_dict(),
        "train": {
            "batch_size": args.batch_size,
            "max_epochs": args.max_epochs,
            "patience": args.patience,
            "balance_classes": args.balance_classes,
        },
        "grid_search": args.grid_search,
        "search": args.search,
    }
    _echo_config(out, effective)

    spec = CorpusSpec(
        num_speakers=args.speakers,
        num_controls=args.controls,
        effect_delta=args.delta,
        snr_db=args.snr_db,
        master_seed=args.seed,
        duration_scale=args.duration_scale,
        therapist_f0=args.therapist_f0,
    )
    print("reproduce: synthesizing corpus")
    manifest, control = generate_corpus(spec, out / "corpus")

    print("reproduce: segmenting")
    seg_failures = segment_stage(
        manifest, out / "segments", _fsm_params(args), args.seed, args.jobs
    )
    if seg_failures:
        for rec, err in sorted(seg_failures.items()):
            print(f"reproduce: segmentation failed for {rec}: {err}", file=sys.stderr)
        return EXIT_STAGE_FAILURE

    print("reproduce: training therapist filter")
    models, stats = train_therapist_filter(
        control, args.components, args.relevance, args.seed, args.jobs
    )
    save_filter_models(out / "speakerid", models, stats)
    filter_failures = filter_stage(
        manifest, out / "segments", out / "speakerid", out / "speakerid" / "filtered", args.jobs
    )
    if filter_failures:
        for rec, err in sorted(filter_failures.items()):
            print(f"reproduce: filtering failed for {rec}: {err}", file=sys.stderr)
        return EXIT_STAGE_FAILURE

    if args.grid_search:
        space = _search_space(args.search)
        needed = sorted({c.feature_set.value for c in space})
    else:
        needed = [config.feature_set.value]
    print(f"reproduce: extracting features {needed}")
    extract_failures = extract_stage(
        manifest, out / "speakerid" / "filtered", out / "features", tuple(needed), args.jobs
    )
    for rec, err in sorted(extract_failures.items()):
        print(f"reproduce: extraction skipped {rec}: {err}", file=sys.stderr)

    train_m, dev_m, test_m = partition(manifest, DEFAULT_SPLIT)
    part_dir = out / "partition"
    part_dir.mkdir(parents=True, exist_ok=True)
    for name, subset in (("train", train_m), ("dev", dev_m), ("test", test_m)):
        save_manifest(part_dir / f"{name}.csv", subset)

    repo = FeatureRepository(out / "features")
    if args.grid_search:
        print("reproduce: grid search")
        config, cells = grid_search(
            repo,
            manifest,
            DEFAULT_SPLIT,
            _search_space(args.search),
            args.seed,
            _train_config(args, 0.003),
            args.jobs,
        )
        (out / "gridsearch.json").write_text(
            json.dumps(
                {"best": config.to_dict(), "cells": cells_to_dict(cells), "seed": args.seed},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )

    print(f"reproduce: training bank ({config.describe()})")
    bank = train_speaker_bank(
        repo,
        manifest,
        DEFAULT_SPLIT,
        config,
        args.seed,
        _train_config(args, config.learning_rate),
        args.jobs,
    )
    save_bank(out / "bank", bank)
    for speaker, reason in sorted(bank.excluded.items()):
        print(f"reproduce: excluded {speaker}: {reason}", file=sys.stderr)

    print("reproduce: evaluating")
    for split in ("dev", "test"):
        report = evaluate(bank, repo, manifest, DEFAULT_SPLIT, split)
        save_report(out / "reports", report)
        print(
            f"reproduce[{split}]: accuracy {100.0 * report.overall.accuracy:.2f}% "
            f"({report.overall.correct}/{report.overall.total})"
        )
    return EXIT_OK


def cmd_train_ubm(args) -> int:
    frames = np.vstack([load_features(_require(p, "feature file")).values for p in args.features])
    model = train_ubm(
        FeatureMatrix(frames, FeatureKind.MFCC26), args.components, args.seed
    )
    save_gmm(args.out, model)
    print(f"train-ubm: {model.num_components} components on {frames.shape[0]} frames")
    return EXIT_OK


def cmd_adapt_therapist(args) -> int:
    ubm = load_gmm(_require(args.ubm, "UBM model"))
    frames = np.vstack([load_features(_require(p, "feature file")).values for p in args.features])
    adapted = map_adapt(ubm, FeatureMatrix(frames, FeatureKind.MFCC26), MapConfig(args.relevance))
    save_gmm(args.out, adapted)
    print(f"adapt-therapist: adapted means on {frames.shape[0]} enrolment frames")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ubm = load_gmm(_require(args.ubm, "UBM model"))
    therapist = load_gmm(_require(args.therapist, "therapist model"))
    segments = [
        (load_features(_require(p, "feature file")).values, "PATIENT") for p in args.patient_feats
    ] + [
        (load_features(_require(p, "feature file")).values, "THERAPIST")
        for p in args.therapist_feats
    ]
    threshold = calibrate_threshold(segments, ubm, therapist)
    if args.out:
        Path(args.out).write_text(repr(threshold) + "\n")
    print(f"calibrate: threshold {threshold!r}")
    return EXIT_OK


def cmd_filter(args) -> int:
    ubm = load_gmm(_require(args.ubm, "UBM model"))
    therapist = load_gmm(_require(args.therapist, "therapist model"))
    clip = read_wav(_require(args.wav, "WAV file"))
    segments = load_segments(_require(args.segments, "segments file"))
    feat = speaker_id_features(clip)
    rows = []
    for seg in segments.segments:
        start = min(seg.start_frame, feat.num_frames)
        end = min(seg.end_frame, feat.num_frames)
        rows.append(feat.values[start:end] if end > start else None)
    labeled = filter_therapist(segments, rows, ubm, therapist, args.threshold)
    save_segments(args.out, labeled)
    print(f"filter: wrote labeled segments to {args.out}")
    return EXIT_OK


def _add_common_fsm(parser) -> None:
    parser.add_argument("--enter", type=float, default=0.7, help="enter-speech posterior")
    parser.add_argument("--exit", type=float, default=0.3, help="exit-speech posterior")
    parser.add_argument("--min-speech-ms", type=float, default=100.0)
    parser.add_argument("--min-pause-ms", type=float, default=200.0)


def _add_train_flags(parser, max_epochs: int, patience: int) -> None:
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-epochs", type=int, default=max_epochs)
    parser.add_argument("--patience", type=int, default=patience)
    parser.add_argument("--balance-classes", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medstate",
        description="Speech-based ON/OFF medication-state assessment pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, default=20)
    p.add_argument("--controls", type=int, default=6)
    p.add_argument("--delta", type=float, default=1.0, help="ON/OFF effect size in [0,1]")
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration-scale", type=float, default=1.0)
    p.add_argument("--therapist-f0", type=float, default=300.0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("segment", help="speech/non-speech segmentation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_common_fsm(p)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("filter-therapist", help="train filter models and label segments")
    p.add_argument("--corpus", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--components", type=int, default=64)
    p.add_argument("--relevance", type=float, default=16.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_filter_therapist)

    p = sub.add_parser("extract", help="clean-speech feature extraction")
    p.add_argument("--corpus", required=True)
    p.add_argument("--filtered", required=True, help="labeled segments directory")
    p.add_argument("--out", required=True)
    p.add_argument("--features", default="mfcc_delta", help=f"comma list from {FEATURE_SET_NAMES}")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("partition", help="task-based train/dev/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_partition)

    p = sub.add_parser("grid-search", help="select the global configuration")
    p.add_argument("--corpus", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", required=True, help="JSON result path")
    p.add_argument("--search", choices=("reference", "full"), default="reference")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_train_flags(p, max_epochs=40, patience=8)
    p.set_defaults(fn=cmd_grid_search)

    p = sub.add_parser("train-bank", help="train one model per speaker")
    p.add_argument("--corpus", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="GlobalConfig as JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    _add_train_flags(p, max_epochs=60, patience=10)
    p.set_defaults(fn=cmd_train_bank)

    p = sub.add_parser("evaluate", help="score a split with a trained bank")
    p.add_argument("--corpus", required=True)
    p.add_argument("--features-dir", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("reproduce", help="run the whole pipeline end to end")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speakers", type=int, default=20)
    p.add_argument("--controls", type=int, default=6)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--duration-scale", type=float, default=1.0)
    p.add_argument("--therapist-f0", type=float, default=300.0)
    p.add_argument("--components", type=int, default=64)
    p.add_argument("--relevance", type=float, default=16.0)
    p.add_argument("--config", help="GlobalConfig as JSON (default: reference winner)")
    p.add_argument("--grid-search", action="store_true")
    p.add_argument("--search", choices=("reference", "full"), default="reference")
    p.add_argument("--jobs", type=int, default=1)
    _add_common_fsm(p)
    _add_train_flags(p, max_epochs=60, patience=10)
    p.set_defaults(fn=cmd_reproduce)

    p = sub.add_parser("train-ubm", help="train a UBM from feature cache files")
    p.add_argument("features", nargs="+")
    p.add_argument("--components", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_ubm)

    p = sub.add_parser("adapt-therapist", help="MAP-adapt a UBM toward enrolment features")
    p.add_argument("features", nargs="+")
    p.add_argument("--ubm", required=True)
    p.add_argument("--relevance", type=float, default=16.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_adapt_therapist)

    p = sub.add_parser("calibrate", help="pick the therapist decision threshold")
    p.add_argument("--ubm", required=True)
    p.add_argument("--therapist", required=True)
    p.add_argument("--patient-feats", nargs="+", default=[])
    p.add_argument("--therapist-feats", nargs="+", default=[])
    p.add_argument("--out")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("filter", help="label one recording's segments")
    p.add_argument("--ubm", required=True)
    p.add_argument("--therapist", required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--segments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_filter)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
