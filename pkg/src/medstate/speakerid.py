"""GMM-UBM speaker modeling for therapist-speech removal.

A diagonal-covariance universal background model is trained on pooled
control speech, adapted to the therapist with means-only MAP, and speech
segments are kept or discarded by a per-frame-averaged log-likelihood
ratio against a calibrated threshold.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .features.types import FeatureMatrix
from .segmentation import Segment, SegmentList, SnsLabel, SpeakerLabel

GMM_VARIANCE_FLOOR = 1e-4
UBM_EM_TOL = 1e-5
UBM_FINAL_ITERS = 100
UBM_SPLIT_ITERS = 10
SPLIT_OFFSET = 0.2
CALIBRATION_MARGIN = 1.0
GMM_FORMAT_VERSION = 1


class Verdict(enum.Enum):
    THERAPIST = "THERAPIST"
    PATIENT = "PATIENT"


@dataclass(eq=False)
class GmmModel:
    """Diagonal-covariance Gaussian mixture."""

    weights: np.ndarray      # (K,)
    means: np.ndarray        # (K, dim)
    variances: np.ndarray    # (K, dim)
    feature_kind: str = ""

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("mixture weights must sum to 1")
        if np.any(self.weights < 0):
            raise ValueError("mixture weights must be non-negative")
        if np.any(self.variances < GMM_VARIANCE_FLOOR - 1e-15):
            raise ValueError("variance below floor")

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class MapConfig:
    relevance_factor: float = 16.0

    def __post_init__(self):
        if self.relevance_factor <= 0:
            raise ValueError("relevance_factor must be positive")


@dataclass(frozen=True)
class LlrDecision:
    llr: float
    threshold: float
    verdict: Verdict

    @staticmethod
    def from_llr(llr: float, threshold: float) -> "LlrDecision":
        verdict = Verdict.THERAPIST if llr > threshold else Verdict.PATIENT
        return LlrDecision(llr, threshold, verdict)


def _as_array(frames) -> np.ndarray:
    values = frames.values if isinstance(frames, FeatureMatrix) else np.asarray(frames)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise ValueError("empty frame matrix")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite feature values")
    return values


def _component_logliks(model: GmmModel, x: np.ndarray) -> np.ndarray:
    """(frames, K) log of weight_k * N(x | mean_k, var_k)."""
    inv_var = 1.0 / model.variances
    const = np.log(model.weights) - 0.5 * (
        model.dim * np.log(2.0 * np.pi) + np.log(model.variances).sum(axis=1)
    )
    quad = (
        (x * x) @ (0.5 * inv_var).T
        - x @ (model.means * inv_var).T
        + 0.5 * np.sum(model.means**2 * inv_var, axis=1)
    )
    return const[None, :] - quad


def _logsumexp_rows(parts: np.ndarray) -> np.ndarray:
    top = parts.max(axis=1, keepdims=True)
    return (top + np.log(np.exp(parts - top).sum(axis=1, keepdims=True)))[:, 0]


def gmm_frame_logliks(model: GmmModel, frames) -> np.ndarray:
    x = _as_array(frames)
    if x.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: frames {x.shape[1]}, model {model.dim}")
    return _logsumexp_rows(_component_logliks(model, x))


def gmm_avg_loglik(model: GmmModel, frames) -> float:
    """Mean per-frame log-likelihood under the mixture."""
    return float(np.mean(gmm_frame_logliks(model, frames)))


def _responsibilities(model: GmmModel, x: np.ndarray) -> np.ndarray:
    parts = _component_logliks(model, x)
    return np.exp(parts - _logsumexp_rows(parts)[:, None])


def _em_iterations(x, weights, means, variances, iterations, tol):
    """Run EM on diagonal GMM parameters; returns params plus loglik trace."""
    trace = []
    previous = -np.inf
    n = x.shape[0]
    for _ in range(iterations):
        model = GmmModel(weights, means, variances)
        parts = _component_logliks(model, x)
        log_norm = _logsumexp_rows(parts)
        trace.append(float(np.mean(log_norm)))
        resp = np.exp(parts - log_norm[:, None])
        counts = np.maximum(resp.sum(axis=0), 1e-10)
        weights = counts / n
        weights = weights / weights.sum()
        means = (resp.T @ x) / counts[:, None]
        second = (resp.T @ (x * x)) / counts[:, None]
        variances = np.maximum(second - means**2, GMM_VARIANCE_FLOOR)
        if np.isfinite(previous) and trace[-1] - previous < tol:
            break
        previous = trace[-1]
    return weights, means, variances, trace


def train_ubm(frames, num_components: int, seed: int = 0, return_trace: bool = False):
    """Train a diagonal-covariance UBM by binary splitting plus EM.

    Starts from the closed-form single Gaussian and doubles the component
    count (perturbing means by +-SPLIT_OFFSET standard deviations) with a
    short EM pass after each split, then runs EM to convergence.  The seed
    is accepted for interface uniformity; training is deterministic.
    """
    del seed
    x = _as_array(frames)
    kind = frames.kind.value if isinstance(frames, FeatureMatrix) else ""
    if num_components < 1 or num_components & (num_components - 1) != 0:
        raise ValueError("component count must be a power of two")
    if x.shape[0] < 2 * num_components:
        raise ValueError(
            f"insufficient data: {x.shape[0]} frames for {num_components} components"
        )

    weights = np.array([1.0])
    means = x.mean(axis=0, keepdims=True)
    variances = np.maximum(x.var(axis=0, keepdims=True), GMM_VARIANCE_FLOOR)
    traces = []
    if num_components == 1:
        model = GmmModel(weights, means, variances, kind)
        return (model, [np.array([gmm_avg_loglik(model, x)])]) if return_trace else model

    while means.shape[0] < num_components:
        offset = SPLIT_OFFSET * np.sqrt(variances)
        means = np.vstack([means - offset, means + offset])
        variances = np.vstack([variances, variances])
        weights = np.concatenate([weights, weights]) / 2.0
        iters = UBM_FINAL_ITERS if means.shape[0] == num_components else UBM_SPLIT_ITERS
        tol = UBM_EM_TOL if means.shape[0] == num_components else UBM_EM_TOL * 10
        weights, means, variances, trace = _em_iterations(x, weights, means, variances, iters, tol)
        traces.append(np.asarray(trace))

    model = GmmModel(weights, means, variances, kind)
    return (model, traces) if return_trace else model


def map_adapt(ubm: GmmModel, enrolment, cfg: MapConfig = MapConfig()) -> GmmModel:
    """Means-only MAP adaptation toward the enrolment data.

    m_k = (n_k * xbar_k + r * m_k) / (n_k + r) with soft counts n_k under
    the UBM; weights and variances are copied unchanged.
    """
    x = _as_array(enrolment)
    if x.shape[1] != ubm.dim:
        raise ValueError(f"dimension mismatch: enrolment {x.shape[1]}, UBM {ubm.dim}")
    resp = _responsibilities(ubm, x)
    counts = resp.sum(axis=0)
    weighted_sum = resp.T @ x
    r = cfg.relevance_factor
    data_mean = np.divide(
        weighted_sum,
        counts[:, None],
        out=np.array(ubm.means, copy=True),
        where=counts[:, None] > 0,
    )
    alpha = (counts / (counts + r))[:, None]
    adapted = alpha * data_mean + (1.0 - alpha) * ubm.means
    return GmmModel(ubm.weights.copy(), adapted, ubm.variances.copy(), ubm.feature_kind)


def score_segment(ubm: GmmModel, therapist: GmmModel, segment_frames, threshold: float) -> LlrDecision:
    """Per-frame-averaged log-likelihood ratio, therapist vs. UBM."""
    if ubm.dim != therapist.dim or ubm.feature_kind != therapist.feature_kind:
        raise ValueError("UBM and therapist model must share dim and feature kind")
    llr = gmm_avg_loglik(therapist, segment_frames) - gmm_avg_loglik(ubm, segment_frames)
    return LlrDecision.from_llr(llr, threshold)


def calibrate_threshold(
    control_segments: list[tuple],
    ubm: GmmModel,
    therapist: GmmModel,
) -> float:
    """Pick the threshold minimizing therapist-insertion errors on control data.

    ``control_segments`` pairs each segment's frames with its true speaker
    label (SpeakerLabel or the string "THERAPIST"/"PATIENT").  Candidates
    are the observed LLR values plus one below-everything sentinel; ties
    are broken by lower patient-deletion rate, then by lower threshold.
    """
    if not control_segments:
        raise ValueError("no control segments")
    llrs = []
    is_therapist = []
    for frames, label in control_segments:
        name = label.value if isinstance(label, SpeakerLabel) else str(label)
        llrs.append(score_segment(ubm, therapist, frames, 0.0).llr)
        is_therapist.append(name == SpeakerLabel.THERAPIST.value)
    llrs = np.asarray(llrs)
    is_therapist = np.asarray(is_therapist)
    if is_therapist.all() or not is_therapist.any():
        if not is_therapist.any():
            raise ValueError("control segments contain no therapist examples")
        return float(llrs.min() - CALIBRATION_MARGIN)

    n_therapist = int(is_therapist.sum())
    n_patient = int((~is_therapist).sum())
    candidates = np.concatenate([[llrs.min() - CALIBRATION_MARGIN], np.unique(llrs)])
    best = None
    for threshold in candidates:
        kept_as_patient = llrs <= threshold
        insertions = int(np.sum(kept_as_patient & is_therapist)) / n_therapist
        deletions = int(np.sum(~kept_as_patient & ~is_therapist)) / n_patient
        key = (insertions, deletions, threshold)
        if best is None or key < best:
            best = key
    return float(best[2])


def filter_therapist(
    segments: SegmentList,
    segment_features: list,
    ubm: GmmModel,
    therapist: GmmModel,
    threshold: float,
) -> SegmentList:
    """Assign PATIENT/THERAPIST to every speech segment by LLR scoring.

    ``segment_features`` runs parallel to ``segments.segments``; entries
    for NON_SPEECH segments may be None and are never scored.
    """
    if len(segment_features) != len(segments.segments):
        raise ValueError("need one feature entry per segment")
    labeled = []
    for seg, frames in zip(segments.segments, segment_features):
        if seg.sns != SnsLabel.SPEECH:
            labeled.append(seg.with_speaker(SpeakerLabel.UNASSIGNED))
            continue
        if frames is None:
            raise ValueError(f"speech segment {seg.start_frame}:{seg.end_frame} lacks features")
        decision = score_segment(ubm, therapist, frames, threshold)
        speaker = (
            SpeakerLabel.THERAPIST if decision.verdict == Verdict.THERAPIST else SpeakerLabel.PATIENT
        )
        labeled.append(seg.with_speaker(speaker))
    return SegmentList(labeled, segments.frame_period_ms)


def patient_speech_mask(segments: SegmentList) -> np.ndarray:
    """Frames labeled SPEECH and PATIENT after therapist filtering."""
    mask = np.zeros(segments.num_frames, dtype=bool)
    for seg in segments.segments:
        if seg.sns == SnsLabel.SPEECH and seg.speaker == SpeakerLabel.PATIENT:
            mask[seg.start_frame : seg.end_frame] = True
    return mask


def _format_vector(vec: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in vec)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()], dtype=np.float64)


def save_gmm(path, model: GmmModel) -> None:
    lines = [
        f"gmmmodel v{GMM_FORMAT_VERSION}",
        f"components {model.num_components}",
        f"dim {model.dim}",
        f"feature_kind {model.feature_kind}",
        "weights " + _format_vector(model.weights),
    ]
    lines += ["mean " + _format_vector(row) for row in model.means]
    lines += ["variance " + _format_vector(row) for row in model.variances]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gmm(path) -> GmmModel:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != f"gmmmodel v{GMM_FORMAT_VERSION}":
        raise ValueError(f"{path}: not a v{GMM_FORMAT_VERSION} GMM model file")
    fields = {}
    means, variances = [], []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "mean":
            means.append(_parse_vector(rest))
        elif key == "variance":
            variances.append(_parse_vector(rest))
        else:
            fields[key] = rest
    model = GmmModel(
        _parse_vector(fields["weights"]),
        np.vstack(means),
        np.vstack(variances),
        fields.get("feature_kind", ""),
    )
    if model.num_components != int(fields["components"]) or model.dim != int(fields["dim"]):
        raise ValueError(f"{path}: inconsistent GMM dimensions")
    return model
