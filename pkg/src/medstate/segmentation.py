"""Speech/non-speech segmentation from frame log-energies.

A two-component Gaussian mixture is fit per recording by EM; the speech
component is defined as the one with the higher mean.  Frame posteriors
drive a two-state machine with hysteresis thresholds, and segments shorter
than a minimum duration are merged into their longer neighbor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .signalio import AudioClip, frame_log_energies, frame_signal

VARIANCE_FLOOR = 1e-4
EM_TOL = 1e-6
EM_MAX_ITERS = 200


class SegmentationError(ValueError):
    """Raised when a recording cannot be segmented (degenerate energies)."""


class SnsLabel(enum.Enum):
    SPEECH = "SPEECH"
    NON_SPEECH = "NON_SPEECH"


class SpeakerLabel(enum.Enum):
    PATIENT = "PATIENT"
    THERAPIST = "THERAPIST"
    UNASSIGNED = "UNASSIGNED"


@dataclass(frozen=True)
class Segment:
    start_frame: int
    end_frame: int           # exclusive
    sns: SnsLabel
    speaker: SpeakerLabel = SpeakerLabel.UNASSIGNED

    @property
    def num_frames(self) -> int:
        return self.end_frame - self.start_frame

    def with_speaker(self, speaker: SpeakerLabel) -> "Segment":
        return Segment(self.start_frame, self.end_frame, self.sns, speaker)


@dataclass
class SegmentList:
    """Contiguous, non-overlapping segments covering all frames."""

    segments: list[Segment]
    frame_period_ms: float = 10.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("SegmentList must contain at least one segment")
        previous_end = 0
        for seg in self.segments:
            if seg.start_frame != previous_end:
                raise ValueError("segments must tile the frame axis without gaps")
            if seg.end_frame <= seg.start_frame:
                raise ValueError("segments must be non-empty")
            previous_end = seg.end_frame
        for left, right in zip(self.segments, self.segments[1:]):
            if (left.sns, left.speaker) == (right.sns, right.speaker):
                raise ValueError("adjacent segments must differ in label")

    @property
    def num_frames(self) -> int:
        return self.segments[-1].end_frame

    def frame_labels(self) -> np.ndarray:
        """Boolean speech mask, one entry per frame."""
        mask = np.zeros(self.num_frames, dtype=bool)
        for seg in self.segments:
            if seg.sns == SnsLabel.SPEECH:
                mask[seg.start_frame : seg.end_frame] = True
        return mask

    def speaker_labels(self) -> list[SpeakerLabel]:
        labels = [SpeakerLabel.UNASSIGNED] * self.num_frames
        for seg in self.segments:
            for t in range(seg.start_frame, seg.end_frame):
                labels[t] = seg.speaker
        return labels


@dataclass(frozen=True)
class SnsFsmParams:
    enter_speech_posterior: float = 0.7
    exit_speech_posterior: float = 0.3
    min_speech_ms: float = 100.0
    min_pause_ms: float = 200.0

    def __post_init__(self):
        if not 0.0 < self.exit_speech_posterior <= self.enter_speech_posterior < 1.0:
            raise ValueError("need 0 < exit <= enter < 1 for hysteresis")


@dataclass
class BiGaussian:
    """1-D two-component mixture; index 1 is the speech (higher-mean) component."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.asarray(self.means, dtype=np.float64)
        self.variances = np.asarray(self.variances, dtype=np.float64)
        if not abs(self.weights.sum() - 1.0) < 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(self.variances < VARIANCE_FLOOR - 1e-15):
            raise ValueError("variances below the floor")
        if self.means[1] < self.means[0]:
            raise ValueError("speech component (index 1) must have the higher mean")

    @property
    def speech_mean(self) -> float:
        return float(self.means[1])

    @property
    def nonspeech_mean(self) -> float:
        return float(self.means[0])


def _log_normal(x: np.ndarray, mean: float, var: float) -> np.ndarray:
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mean) ** 2 / var)


def _component_logliks(model_means, model_vars, model_weights, x):
    parts = np.stack(
        [
            np.log(model_weights[k]) + _log_normal(x, model_means[k], model_vars[k])
            for k in range(2)
        ],
        axis=1,
    )
    return parts


def fit_bigaussian(
    log_energies: np.ndarray,
    seed: int = 0,
    init_means: tuple[float, float] | None = None,
    return_trace: bool = False,
):
    """EM fit of the two-component log-energy mixture.

    Initialized from the 25th/75th percentiles unless ``init_means`` is
    given.  Components are relabeled at the end so index 1 has the higher
    mean.  ``seed`` is accepted for interface uniformity; the fit itself
    is deterministic.
    """
    del seed
    x = np.asarray(log_energies, dtype=np.float64)
    if x.ndim != 1 or x.size < 20:
        raise SegmentationError("need at least 20 frames to fit the energy model")
    if float(np.ptp(x)) < 1e-12:
        raise SegmentationError("degenerate input: all log-energies identical")

    if init_means is None:
        m = np.array([np.percentile(x, 25.0), np.percentile(x, 75.0)])
    else:
        m = np.array(init_means, dtype=np.float64)
    if abs(m[1] - m[0]) < 1e-9:
        spread = max(x.std(), 1e-3)
        m = np.array([m[0] - spread / 2.0, m[1] + spread / 2.0])
    w = np.array([0.5, 0.5])
    v = np.full(2, max(x.var() / 4.0, VARIANCE_FLOOR))

    trace = []
    previous = -np.inf
    for _ in range(EM_MAX_ITERS):
        parts = _component_logliks(m, v, w, x)
        top = parts.max(axis=1, keepdims=True)
        log_norm = top[:, 0] + np.log(np.exp(parts - top).sum(axis=1))
        loglik = float(np.mean(log_norm))
        trace.append(loglik)
        resp = np.exp(parts - log_norm[:, None])
        counts = resp.sum(axis=0)
        counts = np.maximum(counts, 1e-12)
        w = counts / x.size
        m = (resp * x[:, None]).sum(axis=0) / counts
        v = (resp * (x[:, None] - m[None, :]) ** 2).sum(axis=0) / counts
        v = np.maximum(v, VARIANCE_FLOOR)
        if loglik - previous < EM_TOL and np.isfinite(previous):
            break
        previous = loglik

    if m[0] > m[1]:
        w, m, v = w[::-1].copy(), m[::-1].copy(), v[::-1].copy()
    model = BiGaussian(w / w.sum(), m, v)
    if return_trace:
        return model, np.asarray(trace)
    return model


def frame_speech_posterior(model: BiGaussian, log_energy) -> np.ndarray | float:
    """Posterior probability of the speech component, stable in the log domain."""
    x = np.asarray(log_energy, dtype=np.float64)
    parts = _component_logliks(model.means, model.variances, model.weights, np.atleast_1d(x))
    top = parts.max(axis=1, keepdims=True)
    log_norm = top + np.log(np.exp(parts - top).sum(axis=1, keepdims=True))
    post = np.exp(parts[:, 1] - log_norm[:, 0])
    return float(post[0]) if x.ndim == 0 else post


def _merge_short_segments(runs: list[list], min_frames: dict[SnsLabel, int]) -> list[list]:
    """Merge any run shorter than its minimum into its longer neighbor."""
    runs = [list(r) for r in runs]
    while len(runs) > 1:
        shortest_idx = -1
        shortest_len = None
        for i, (label, start, end) in enumerate(runs):
            length = end - start
            if length < min_frames[label]:
                if shortest_len is None or length < shortest_len:
                    shortest_idx, shortest_len = i, length
        if shortest_idx < 0:
            break
        i = shortest_idx
        if i == 0:
            target = 1
        elif i == len(runs) - 1:
            target = i - 1
        else:
            before = runs[i - 1][2] - runs[i - 1][1]
            after = runs[i + 1][2] - runs[i + 1][1]
            target = i - 1 if before >= after else i + 1  # tie: preceding wins
        runs[i][0] = runs[target][0]
        merged = []
        for label, start, end in runs:
            if merged and merged[-1][0] == label:
                merged[-1][2] = end
            else:
                merged.append([label, start, end])
        runs = merged
    return runs


def sns_fsm(
    posteriors: np.ndarray,
    params: SnsFsmParams = SnsFsmParams(),
    frame_period_ms: float = 10.0,
) -> SegmentList:
    """Hysteresis state machine over speech posteriors plus min-duration merging."""
    post = np.asarray(posteriors, dtype=np.float64)
    if post.ndim != 1 or post.size == 0:
        raise ValueError("posterior sequence must be non-empty and 1-D")
    state = SnsLabel.NON_SPEECH
    labels = []
    for p in post:
        if state == SnsLabel.NON_SPEECH and p >= params.enter_speech_posterior:
            state = SnsLabel.SPEECH
        elif state == SnsLabel.SPEECH and p <= params.exit_speech_posterior:
            state = SnsLabel.NON_SPEECH
        labels.append(state)

    runs: list[list] = []
    for t, label in enumerate(labels):
        if runs and runs[-1][0] == label:
            runs[-1][2] = t + 1
        else:
            runs.append([label, t, t + 1])

    min_frames = {
        SnsLabel.SPEECH: max(int(round(params.min_speech_ms / frame_period_ms)), 1),
        SnsLabel.NON_SPEECH: max(int(round(params.min_pause_ms / frame_period_ms)), 1),
    }
    runs = _merge_short_segments(runs, min_frames)
    segments = [Segment(start, end, label) for label, start, end in runs]
    return SegmentList(segments, frame_period_ms)


def segment_recording(
    clip: AudioClip,
    params: SnsFsmParams = SnsFsmParams(),
    seed: int = 0,
    frame_ms: float = 25.0,
    shift_ms: float = 10.0,
) -> SegmentList:
    """Full per-recording pipeline: log-energies, EM fit, posteriors, FSM."""
    if clip.duration_s < 1.0:
        raise SegmentationError("recording shorter than 1 s")
    energies = frame_log_energies(frame_signal(clip, frame_ms, shift_ms))
    try:
        model = fit_bigaussian(energies, seed)
    except SegmentationError as exc:
        raise SegmentationError(f"unsegmentable recording: {exc}") from exc
    posteriors = frame_speech_posterior(model, energies)
    return sns_fsm(posteriors, params, shift_ms)


def save_segments(path, segments: SegmentList) -> None:
    """One line per segment: start_s<TAB>end_s<TAB>SNS<TAB>speaker, 3 decimals."""
    period_s = segments.frame_period_ms / 1000.0
    with open(path, "w", encoding="ascii") as fh:
        for seg in segments.segments:
            fh.write(
                f"{seg.start_frame * period_s:.3f}\t{seg.end_frame * period_s:.3f}"
                f"\t{seg.sns.value}\t{seg.speaker.value}\n"
            )


def load_segments(path, frame_period_ms: float = 10.0) -> SegmentList:
    segments = []
    period_s = frame_period_ms / 1000.0
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            start_s, end_s, sns, speaker = line.split("\t")
            segments.append(
                Segment(
                    int(round(float(start_s) / period_s)),
                    int(round(float(end_s) / period_s)),
                    SnsLabel(sns),
                    SpeakerLabel(speaker),
                )
            )
    return SegmentList(segments, frame_period_ms)
