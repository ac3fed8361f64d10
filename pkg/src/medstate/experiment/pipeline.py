"""Corpus-level orchestration: segmentation, therapist removal, extraction.

Stages communicate through files so any stage can be rerun or inspected
in isolation: segment files under ``segments/``, labeled segment files
under ``speakerid/filtered/``, and per-recording feature caches under
``features/<set>/``.  All stage seeds derive from the master seed.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..features import (
    FeatureKind,
    FeatureMatrix,
    delta,
    egemaps_lld,
    load_features,
    mfcc,
    save_features,
    znorm_per_file,
)
from ..features.types import MfccConfig
from ..seeds import derive_seed
from ..segmentation import (
    SegmentList,
    SnsFsmParams,
    SnsLabel,
    load_segments,
    save_segments,
    segment_recording,
)
from ..signalio import AudioClip, read_wav
from ..speakerid import (
    GmmModel,
    MapConfig,
    calibrate_threshold,
    filter_therapist,
    load_gmm,
    map_adapt,
    patient_speech_mask,
    save_gmm,
    score_segment,
    train_ubm,
)
from .manifest import CorpusManifest, ManifestEntry

FRAME_SHIFT_SAMPLES = 160
MIN_CLEAN_SPEECH_S = 0.5
SPEAKER_ID_FEATURE_NOTE = "mfcc26-raw-fullrec"


def _write_echo(out_dir: Path, name: str, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def parallel_map(fn, items, jobs: int):
    """Order-preserving map, inline for jobs == 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def speaker_id_features(clip: AudioClip) -> FeatureMatrix:
    """MFCC plus deltas over the full recording, unnormalized.

    Speaker identity lives in the absolute spectral envelope; per-recording
    standardization would erase it on recordings dominated by a single
    sustained vowel, so the GMMs see raw coefficients.
    """
    return delta(mfcc(clip))


def _segment_one(args) -> tuple[str, str | None]:
    wav_path, seg_path, params, seed = args
    try:
        clip = read_wav(wav_path)
        segments = segment_recording(clip, params, seed)
        save_segments(seg_path, segments)
        return Path(wav_path).stem, None
    except Exception as exc:  # surfaced per recording, the stage continues
        return Path(wav_path).stem, str(exc)


def segment_stage(
    manifest: CorpusManifest,
    out_dir,
    params: SnsFsmParams = SnsFsmParams(),
    seed: int = 0,
    jobs: int = 1,
) -> dict[str, str]:
    """Speech/non-speech segmentation for every recording in the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            str(manifest.resolve(e)),
            str(out / f"{e.recording_id}.seg"),
            params,
            derive_seed(seed, "segment", e.recording_id),
        )
        for e in manifest.entries
    ]
    failures = {
        rec: err for rec, err in parallel_map(_segment_one, tasks, jobs) if err is not None
    }
    _write_echo(
        out,
        "segment_config.json",
        {
            "enter": params.enter_speech_posterior,
            "exit": params.exit_speech_posterior,
            "min_speech_ms": params.min_speech_ms,
            "min_pause_ms": params.min_pause_ms,
            "seed": seed,
            "failures": failures,
        },
    )
    return failures


def _segment_feature_rows(feat: FeatureMatrix, segments: SegmentList):
    """Feature rows per segment, or None for non-speech segments."""
    rows = []
    limit = feat.num_frames
    for seg in segments.segments:
        if seg.sns != SnsLabel.SPEECH:
            rows.append(None)
            continue
        start = min(seg.start_frame, limit)
        end = min(seg.end_frame, limit)
        rows.append(feat.values[start:end] if end > start else np.empty((0, feat.dim)))
    return rows


def _control_stats(args):
    wav_path, truth_path = args
    clip = read_wav(wav_path)
    feat = speaker_id_features(clip)
    truth = load_segments(truth_path)
    rows = _segment_feature_rows(feat, truth)
    pooled, therapist, segments = [], [], []
    for seg, values in zip(truth.segments, rows):
        if values is None or values.shape[0] == 0:
            continue
        pooled.append(values)
        if seg.speaker.value == "THERAPIST":
            therapist.append(values)
        segments.append((values, seg.speaker.value))
    return pooled, therapist, segments


@dataclass
class TherapistFilterModels:
    ubm: GmmModel
    therapist: GmmModel
    threshold: float


def train_therapist_filter(
    control_manifest: CorpusManifest,
    num_components: int = 64,
    relevance_factor: float = 16.0,
    seed: int = 0,
    jobs: int = 1,
) -> tuple[TherapistFilterModels, dict]:
    """UBM on all control speech, MAP therapist model, calibrated threshold."""
    tasks = [
        (str(control_manifest.resolve(e)), str(control_manifest.resolve_truth(e)))
        for e in control_manifest.entries
    ]
    if not tasks:
        raise ValueError("control manifest is empty")
    results = parallel_map(_control_stats, tasks, jobs)
    pooled = [v for res in results for v in res[0]]
    therapist_rows = [v for res in results for v in res[1]]
    calibration_segments = [pair for res in results for pair in res[2]]
    if not therapist_rows:
        raise ValueError("control recordings contain no therapist speech")

    ubm_frames = FeatureMatrix(np.vstack(pooled), FeatureKind.MFCC26)
    ubm = train_ubm(ubm_frames, num_components, derive_seed(seed, "ubm"))
    enrol = FeatureMatrix(np.vstack(therapist_rows), FeatureKind.MFCC26)
    therapist = map_adapt(ubm, enrol, MapConfig(relevance_factor))
    threshold = calibrate_threshold(calibration_segments, ubm, therapist)

    n_th = n_pat = ins = dele = 0
    for values, label in calibration_segments:
        verdict = score_segment(ubm, therapist, values, threshold).verdict.value
        if label == "THERAPIST":
            n_th += 1
            ins += verdict == "PATIENT"
        else:
            n_pat += 1
            dele += verdict == "THERAPIST"
    stats = {
        "threshold": threshold,
        "control_segments": len(calibration_segments),
        "therapist_segments": n_th,
        "patient_segments": n_pat,
        "insertion_rate": ins / n_th if n_th else 0.0,
        "deletion_rate": dele / n_pat if n_pat else 0.0,
        "ubm_components": num_components,
        "relevance_factor": relevance_factor,
        "features": SPEAKER_ID_FEATURE_NOTE,
    }
    return TherapistFilterModels(ubm, therapist, threshold), stats


def save_filter_models(out_dir, models: TherapistFilterModels, stats: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_gmm(out / "ubm.gmm", models.ubm)
    save_gmm(out / "therapist.gmm", models.therapist)
    (out / "threshold.txt").write_text(repr(models.threshold) + "\n")
    _write_echo(out, "calibration.json", stats)


def load_filter_models(model_dir) -> TherapistFilterModels:
    model_dir = Path(model_dir)
    return TherapistFilterModels(
        load_gmm(model_dir / "ubm.gmm"),
        load_gmm(model_dir / "therapist.gmm"),
        float((model_dir / "threshold.txt").read_text().strip()),
    )


def _filter_one(args) -> tuple[str, str | None]:
    wav_path, seg_path, out_path, model_dir = args
    try:
        models = _filter_one.cache.get(model_dir)
        if models is None:
            models = load_filter_models(model_dir)
            _filter_one.cache[model_dir] = models
        clip = read_wav(wav_path)
        feat = speaker_id_features(clip)
        segments = load_segments(seg_path)
        rows = _segment_feature_rows(feat, segments)
        labeled = filter_therapist(segments, rows, models.ubm, models.therapist, models.threshold)
        save_segments(out_path, labeled)
        return Path(wav_path).stem, None
    except Exception as exc:
        return Path(wav_path).stem, str(exc)


_filter_one.cache = {}


def filter_stage(
    manifest: CorpusManifest,
    segments_dir,
    model_dir,
    out_dir,
    jobs: int = 1,
) -> dict[str, str]:
    """Label every speech segment PATIENT or THERAPIST for all recordings."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            str(manifest.resolve(e)),
            str(Path(segments_dir) / f"{e.recording_id}.seg"),
            str(out / f"{e.recording_id}.seg"),
            str(model_dir),
        )
        for e in manifest.entries
    ]
    failures = {rec: err for rec, err in parallel_map(_filter_one, tasks, jobs) if err is not None}
    _write_echo(out, "filter_config.json", {"model_dir_note": "ubm+therapist+threshold", "failures": failures})
    return failures


def patient_clean_clip(clip: AudioClip, labeled: SegmentList) -> AudioClip | None:
    """Concatenate the samples of PATIENT-labeled speech segments."""
    mask = patient_speech_mask(labeled)
    spans = []
    start = None
    for t, keep in enumerate(mask):
        if keep and start is None:
            start = t
        elif not keep and start is not None:
            spans.append((start, t))
            start = None
    if start is not None:
        spans.append((start, mask.size))
    pieces = [
        clip.samples[a * FRAME_SHIFT_SAMPLES : b * FRAME_SHIFT_SAMPLES] for a, b in spans
    ]
    if not pieces:
        return None
    samples = np.concatenate(pieces)
    if samples.size < MIN_CLEAN_SPEECH_S * clip.sample_rate:
        return None
    return AudioClip(samples, clip.sample_rate, clip.meta)


FEATURE_SET_NAMES = ("mfcc", "mfcc_delta", "egemaps")


def clean_features(clip: AudioClip, set_name: str) -> FeatureMatrix:
    if set_name == "mfcc":
        return znorm_per_file(mfcc(clip, MfccConfig()))
    if set_name == "mfcc_delta":
        return znorm_per_file(delta(mfcc(clip, MfccConfig())))
    if set_name == "egemaps":
        return znorm_per_file(egemaps_lld(clip))
    raise ValueError(f"unknown feature set {set_name!r}")


def _extract_one(args) -> tuple[str, str | None]:
    wav_path, filtered_path, out_paths = args
    try:
        clip = read_wav(wav_path)
        labeled = load_segments(filtered_path)
        clean = patient_clean_clip(clip, labeled)
        if clean is None:
            return Path(wav_path).stem, "insufficient patient speech"
        for set_name, out_path in out_paths.items():
            save_features(out_path, clean_features(clean, set_name))
        return Path(wav_path).stem, None
    except Exception as exc:
        return Path(wav_path).stem, str(exc)


def extract_stage(
    manifest: CorpusManifest,
    filtered_dir,
    out_dir,
    feature_sets=("mfcc_delta",),
    jobs: int = 1,
) -> dict[str, str]:
    """Per-recording clean-speech feature caches for the requested sets."""
    unknown = set(feature_sets) - set(FEATURE_SET_NAMES)
    if unknown:
        raise ValueError(f"unknown feature sets: {sorted(unknown)}")
    out = Path(out_dir)
    for set_name in feature_sets:
        (out / set_name).mkdir(parents=True, exist_ok=True)
    tasks = [
        (
            str(manifest.resolve(e)),
            str(Path(filtered_dir) / f"{e.recording_id}.seg"),
            {s: str(out / s / f"{e.recording_id}.feat") for s in feature_sets},
        )
        for e in manifest.entries
    ]
    failures = {rec: err for rec, err in parallel_map(_extract_one, tasks, jobs) if err is not None}
    _write_echo(out, "extract_config.json", {"feature_sets": list(feature_sets), "failures": failures})
    return failures


class FeatureRepository:
    """Lookup of cached clean-speech features by manifest entry and set name."""

    def __init__(self, features_dir):
        self.features_dir = Path(features_dir)

    def path_for(self, entry: ManifestEntry, set_name: str) -> Path:
        return self.features_dir / set_name / f"{entry.recording_id}.feat"

    def has(self, entry: ManifestEntry, set_name: str) -> bool:
        return self.path_for(entry, set_name).exists()

    def load(self, entry: ManifestEntry, set_name: str) -> FeatureMatrix:
        return load_features(self.path_for(entry, set_name))
