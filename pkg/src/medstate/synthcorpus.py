"""Parametric synthetic corpus with known ground truth.

Source-filter synthesis (glottal pulse train through formant resonators)
produces speaker-specific recordings for the nine vocal tasks in both
medication states.  The OFF state applies scaled deviations — pitch and
loudness monotony, raised jitter/shimmer and breathiness, vowel
centralization, longer pauses — so the downstream pipeline has a
controllable, fully-labeled substrate.  Crude on purpose: the statistics
are controllable, realism is not a goal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .experiment.manifest import CorpusManifest, ManifestEntry, save_manifest
from .seeds import derive_seed
from .segmentation import Segment, SegmentList, SnsLabel, SpeakerLabel, save_segments
from .signalio import (
    CANONICAL_RATE,
    AudioClip,
    RecordingMeta,
    State,
    TaskKind,
    num_frames_for,
    write_wav,
)

FRAME_LEN = 400     # 25 ms at 16 kHz, the grid all ground-truth masks use
FRAME_SHIFT = 160   # 10 ms

# Vowel formant multipliers relative to the speaker's /a/ formants.
VOWELS = {
    "a": (1.00, 1.00, 1.00),
    "e": (0.62, 1.45, 1.06),
    "i": (0.45, 1.80, 1.12),
    "o": (0.68, 0.72, 0.98),
    "u": (0.52, 0.62, 0.94),
}
VOWEL_CENTROID = (0.72, 1.05, 1.02)
FORMANT_BANDWIDTHS = (80.0, 110.0, 160.0)


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    base_f0: float
    formants: tuple[float, float, float]
    base_intensity_db: float
    base_jitter: float
    base_shimmer: float
    seed: int

    def __post_init__(self):
        if not 70.0 <= self.base_f0 <= 300.0:
            raise ValueError("base_f0 must lie in [70, 300] Hz")
        if not 0.0 <= self.base_jitter <= 0.1 or not 0.0 <= self.base_shimmer <= 0.1:
            raise ValueError("jitter/shimmer must lie in [0, 0.1]")


@dataclass(frozen=True)
class StateEffect:
    """delta = 0 leaves ON and OFF identical; delta = 1 is the full effect."""

    delta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass(frozen=True)
class RenderParams:
    f0_excursion: float      # slow phrase-level F0 movement, relative
    f0_wobble: float         # fast modulation depth, relative
    loudness_mod_db: float   # syllable/second-scale loudness swing
    intensity_db: float
    jitter: float
    shimmer: float
    breath_level: float
    pause_scale: float
    centralization: float
    tremor_depth: float      # 4-7 Hz amplitude tremor, relative
    formant_wander: float    # articulatory instability, relative step per 160 ms


def render_params(profile: SpeakerProfile, state: State, effect: StateEffect) -> RenderParams:
    """Per-state generation parameters; OFF deviations scale with delta."""
    d = effect.delta if state == State.OFF else 0.0
    return RenderParams(
        f0_excursion=0.12 * (1.0 - 0.85 * d),
        f0_wobble=0.030 * (1.0 - 0.80 * d),
        loudness_mod_db=5.0 * (1.0 - 0.80 * d),
        intensity_db=profile.base_intensity_db - 6.0 * d,
        jitter=profile.base_jitter + 0.035 * d,
        shimmer=profile.base_shimmer + 0.090 * d,
        breath_level=0.035 + 0.050 * d,
        pause_scale=1.0 + 0.6 * d,
        centralization=0.55 * d,
        tremor_depth=0.30 * d,
        formant_wander=0.030 * d,
    )


@dataclass
class GroundTruth:
    state: State
    speech_mask: np.ndarray      # bool per 25/10 frame
    therapist_mask: np.ndarray   # bool per frame, subset of speech_mask
    planned_speech_ratio: float
    frame_period_ms: float = 10.0

    def __post_init__(self):
        if self.speech_mask.shape != self.therapist_mask.shape:
            raise ValueError("masks must cover the same frames")

    @property
    def num_frames(self) -> int:
        return int(self.speech_mask.size)


def _resonator(wave: np.ndarray, freq: float, bandwidth: float, rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / rate)
    theta = 2.0 * np.pi * freq / rate
    return lfilter([1.0 - r * r], [1.0, -2.0 * r * np.cos(theta), r * r], wave)


def _render_voiced(
    rng: np.random.Generator,
    rate: int,
    dur_s: float,
    f0_start: float,
    f0_end: float,
    wobble_depth: float,
    wobble_hz: float,
    formants: tuple[float, float, float],
    rms: float,
    jitter: float,
    shimmer: float,
    breath_level: float,
    slow_amp_depth: float = 0.0,
    slow_amp_hz: float = 0.5,
    tremor_depth: float = 0.0,
    formant_wander: float = 0.0,
) -> np.ndarray:
    """One voiced chunk: jittered pulse train, glottal tilt, formant cascade."""
    n = max(int(round(dur_s * rate)), FRAME_LEN)
    t = np.arange(n) / rate
    f0_line = f0_start + (f0_end - f0_start) * (t / max(dur_s, 1e-9))
    wobble_phase = rng.uniform(0.0, 2.0 * np.pi)
    f0_contour = f0_line * (1.0 + wobble_depth * np.sin(2.0 * np.pi * wobble_hz * t + wobble_phase))

    excitation = np.zeros(n)
    pos = 0.0
    while pos < n - 1:
        idx = int(pos)
        period = rate / max(f0_contour[idx], 30.0)
        period *= 1.0 + jitter * rng.standard_normal()
        amp = 1.0 + shimmer * rng.standard_normal()
        excitation[idx] += max(amp, 0.05)
        pos += max(period, 8.0)

    # Glottal tilt (double one-pole), radiation (differencer), formant cascade.
    voiced = lfilter([1.0], [1.0, -0.96], excitation)
    voiced = lfilter([1.0], [1.0, -0.96], voiced)
    voiced = np.diff(voiced, prepend=0.0)
    noise = rng.standard_normal(n)
    source = voiced + breath_level * noise * 4.0

    # Articulatory instability: formants random-walk across 160 ms spans,
    # blended by overlap-add so the excitation stays continuous.
    if formant_wander > 0.0 and n > int(0.4 * rate):
        span = int(0.16 * rate)
        fade = int(0.02 * rate)
        out = np.zeros(n)
        weight = np.zeros(n)
        walk = np.zeros(3)
        start = 0
        while start < n:
            stop = min(start + span, n)
            lo = max(start - fade, 0)
            hi = min(stop + fade, n)
            walk = np.clip(walk + formant_wander * rng.standard_normal(3), -0.08, 0.08)
            piece = source[lo:hi]
            for base, drift, bandwidth in zip(formants, walk, FORMANT_BANDWIDTHS):
                piece = _resonator(piece, base * (1.0 + drift), bandwidth, rate)
            taper = np.ones(hi - lo)
            edge = min(fade, (hi - lo) // 2)
            if edge > 0:
                ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, edge))
                if lo > 0:
                    taper[:edge] = ramp
                if hi < n:
                    taper[-edge:] = np.minimum(taper[-edge:], ramp[::-1])
            out[lo:hi] += piece * taper
            weight[lo:hi] += taper
            start = stop
        out /= np.maximum(weight, 1e-9)
    else:
        out = source
        for freq, bandwidth in zip(formants, FORMANT_BANDWIDTHS):
            out = _resonator(out, freq, bandwidth, rate)

    if slow_amp_depth > 0.0:
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out = out * (1.0 + slow_amp_depth * np.sin(2.0 * np.pi * slow_amp_hz * t + phase))

    if tremor_depth > 0.0:
        tremor_hz = rng.uniform(4.5, 6.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out = out * (1.0 + tremor_depth * np.sin(2.0 * np.pi * tremor_hz * t + phase))

    # Attack/release taper so chunk edges never click.
    edge = min(int(0.02 * rate), n // 4)
    if edge > 0:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0.0, np.pi, edge))
        out[:edge] *= ramp
        out[-edge:] *= ramp[::-1]

    level = np.sqrt(np.mean(out * out))
    if level > 0:
        out *= rms / level
    return out


def _centralized(multipliers: tuple[float, float, float], amount: float):
    return tuple(
        m * (1.0 - amount) + c * amount for m, c in zip(multipliers, VOWEL_CENTROID)
    )


@dataclass
class _Syllable:
    dur_s: float
    vowel: str
    gap_s: float       # silence after the syllable, still inside the phrase
    accent: float      # relative F0 offset
    loud_db: float     # relative loudness offset


@dataclass
class _Phrase:
    syllables: list[_Syllable]

    @property
    def dur_s(self) -> float:
        return sum(s.dur_s + s.gap_s for s in self.syllables)


def _make_phrase(
    rng: np.random.Generator,
    num_syllables: int,
    params: RenderParams,
    syl_dur=(0.16, 0.30),
    gap=(0.02, 0.05),
    vowel_pool: str = "aeiou",
) -> _Phrase:
    syllables = []
    for _ in range(num_syllables):
        syllables.append(
            _Syllable(
                dur_s=rng.uniform(*syl_dur),
                vowel=vowel_pool[rng.integers(len(vowel_pool))],
                gap_s=rng.uniform(*gap),
                accent=rng.uniform(-1.0, 1.0),
                loud_db=rng.uniform(-0.5, 0.5) * params.loudness_mod_db,
            )
        )
    syllables[-1].gap_s = 0.0
    return _Phrase(syllables)


def _plan_events(
    task: TaskKind, rng: np.random.Generator, params: RenderParams, scale: float
) -> list:
    """Sequence of ("pause", dur_s) and ("phrase", _Phrase, prosody) events.

    Pauses are stretched by the state's pause_scale; the leading pause
    leaves room for a therapist instruction turn.
    """
    pause_k = params.pause_scale

    def pause(lo, hi):
        return ("pause", float(rng.uniform(lo, hi) * pause_k))

    events = [("pause", float(rng.uniform(2.4, 3.2)))]  # lead-in, not state-scaled
    if task == TaskKind.VOWEL_A:
        for _ in range(3):
            phrase = _Phrase([_Syllable(rng.uniform(2.0, 2.8) * scale, "a", 0.0, 0.0, 0.0)])
            events += [("phrase", phrase, 0.15), pause(0.6, 1.0)]
    elif task == TaskKind.MPT:
        for _ in range(2):
            phrase = _Phrase([_Syllable(rng.uniform(5.0, 6.5) * scale, "a", 0.0, 0.0, 0.0)])
            events += [("phrase", phrase, 0.15), pause(0.8, 1.2)]
    elif task == TaskKind.DDK:
        runs = max(int(round(4 * scale)), 2)
        for _ in range(runs):
            phrase = _make_phrase(
                rng, 9 + int(rng.integers(4)), params,
                syl_dur=(0.075, 0.105), gap=(0.035, 0.055), vowel_pool="aia",
            )
            events += [("phrase", phrase, 0.4), pause(0.4, 0.7)]
    elif task == TaskKind.READ_WORDS:
        for _ in range(10):
            phrase = _make_phrase(rng, 1 + int(rng.integers(2)), params, syl_dur=(0.20, 0.34))
            events += [("phrase", phrase, 0.8), pause(0.45, 0.75)]
    elif task == TaskKind.READ_SENTENCES:
        for _ in range(10):
            phrase = _make_phrase(rng, 5 + int(rng.integers(4)), params)
            events += [("phrase", phrase, 1.0), pause(0.5, 0.9)]
    elif task == TaskKind.READ_TEXT:
        for _ in range(int(round(6 * scale)) or 1):
            phrase = _make_phrase(rng, 9 + int(rng.integers(5)), params)
            events += [("phrase", phrase, 1.0), pause(0.4, 0.7)]
    elif task == TaskKind.READ_PROSODIC:
        for _ in range(8):
            phrase = _make_phrase(rng, 6 + int(rng.integers(4)), params)
            events += [("phrase", phrase, 1.8), pause(0.5, 0.9)]
    elif task == TaskKind.STORYTELLING:
        for _ in range(int(round(7 * scale)) or 1):
            phrase = _make_phrase(rng, 7 + int(rng.integers(6)), params)
            events += [("phrase", phrase, 1.4), pause(0.35, 1.0)]
    elif task == TaskKind.CONVERSATION:
        for _ in range(int(round(8 * scale)) or 1):
            phrase = _make_phrase(rng, 6 + int(rng.integers(7)), params)
            events += [("phrase", phrase, 1.2), pause(0.5, 1.5)]
    else:
        raise ValueError(f"no plan for task {task}")
    events.append(("pause", float(rng.uniform(0.7, 1.1))))
    return events


def _masks_from_spans(total_samples: int, spans: list[tuple[int, int, bool]]):
    """Frame masks via the frame-center rule on sample-level spans."""
    count = num_frames_for(total_samples, FRAME_LEN, FRAME_SHIFT)
    centers = FRAME_SHIFT * np.arange(count) + FRAME_LEN // 2
    speech = np.zeros(count, dtype=bool)
    therapist = np.zeros(count, dtype=bool)
    for start, end, is_therapist in spans:
        inside = (centers >= start) & (centers < end)
        speech |= inside
        if is_therapist:
            therapist |= inside
    return speech, therapist


def synth_utterance(
    profile: SpeakerProfile,
    state: State,
    task: TaskKind,
    effect: StateEffect = StateEffect(),
    seed: int = 0,
    snr_db: float = 20.0,
    duration_scale: float = 1.0,
    rate: int = CANONICAL_RATE,
) -> tuple[AudioClip, GroundTruth]:
    """Synthesize one recording plus its frame-level ground truth."""
    rng = np.random.default_rng(derive_seed(seed, profile.seed, state.value, task.value))
    params = render_params(profile, state, effect)
    events = _plan_events(task, rng, params, duration_scale)

    pieces: list[np.ndarray] = []
    spans: list[tuple[int, int, bool]] = []
    cursor = 0
    speech_planned = 0.0
    total_planned = 0.0
    base_amp = 10.0 ** (params.intensity_db / 20.0)

    for event in events:
        if event[0] == "pause":
            dur = event[1]
            n = int(round(dur * rate))
            pieces.append(np.zeros(n))
            cursor += n
            total_planned += dur
            continue
        _, phrase, prosody = event
        start_cursor = cursor
        f0_phrase = profile.base_f0 * (
            1.0 + params.f0_excursion * prosody * rng.uniform(-0.3, 1.0)
        )
        declination = 1.0 - 0.4 * params.f0_excursion * prosody
        num_syl = len(phrase.syllables)
        for i, syl in enumerate(phrase.syllables):
            frac = i / max(num_syl - 1, 1)
            f0_mid = f0_phrase * (1.0 - (1.0 - declination) * frac)
            f0_mid *= 1.0 + 0.5 * params.f0_excursion * prosody * syl.accent
            f0_span = 1.0 + 0.3 * params.f0_excursion * prosody * rng.uniform(-1.0, 1.0)
            formants = tuple(
                f * m
                for f, m in zip(
                    profile.formants, _centralized(VOWELS[syl.vowel], params.centralization)
                )
            )
            rms = base_amp * 10.0 ** (syl.loud_db / 20.0)
            long_vowel = syl.dur_s > 1.0
            chunk = _render_voiced(
                rng,
                rate,
                syl.dur_s,
                f0_mid / f0_span,
                f0_mid * f0_span,
                params.f0_wobble,
                rng.uniform(4.0, 6.5),
                formants,
                rms,
                params.jitter,
                params.shimmer,
                params.breath_level,
                slow_amp_depth=(params.loudness_mod_db / 17.4 if long_vowel else 0.0),
                slow_amp_hz=rng.uniform(0.3, 0.8),
                tremor_depth=params.tremor_depth,
                formant_wander=params.formant_wander,
            )
            pieces.append(chunk)
            cursor += chunk.size
            if syl.gap_s > 0:
                gap_n = int(round(syl.gap_s * rate))
                pieces.append(np.zeros(gap_n))
                cursor += gap_n
        spans.append((start_cursor, cursor, False))
        speech_planned += phrase.dur_s
        total_planned += phrase.dur_s

    samples = np.concatenate(pieces)
    speech_rms = np.sqrt(np.mean(samples[samples != 0.0] ** 2)) if np.any(samples != 0.0) else 1.0
    noise_std = speech_rms * 10.0 ** (-snr_db / 20.0)
    samples = samples + noise_std * rng.standard_normal(samples.size)
    peak = np.max(np.abs(samples))
    if peak > 0.95:
        samples *= 0.95 / peak

    speech_mask, therapist_mask = _masks_from_spans(samples.size, spans)
    truth = GroundTruth(state, speech_mask, therapist_mask, speech_planned / total_planned)
    meta = RecordingMeta(profile.speaker_id, task, state)
    return AudioClip(samples, rate, meta), truth


def therapist_render_params(profile: SpeakerProfile) -> RenderParams:
    return RenderParams(
        f0_excursion=0.10,
        f0_wobble=0.02,
        loudness_mod_db=4.0,
        intensity_db=profile.base_intensity_db,
        jitter=profile.base_jitter,
        shimmer=profile.base_shimmer,
        breath_level=0.03,
        pause_scale=1.0,
        centralization=0.0,
        tremor_depth=0.0,
        formant_wander=0.0,
    )


def inject_therapist(
    clip: AudioClip,
    truth: GroundTruth,
    therapist_profile: SpeakerProfile,
    turns: list[tuple[float, float]],
    seed: int = 0,
) -> tuple[AudioClip, GroundTruth]:
    """Insert therapist speech at (start_s, dur_s) turns inside non-speech.

    Turns may extend past the end of the clip, which appends matching
    background noise.  Overlapping turns or turns colliding with existing
    speech are rejected.
    """
    if not turns:
        return clip, truth
    rate = clip.sample_rate
    ordered = sorted(turns)
    for (s1, d1), (s2, _) in zip(ordered, ordered[1:]):
        if s1 + d1 > s2:
            raise ValueError("therapist turns overlap")

    samples = clip.samples.copy()
    rng = np.random.default_rng(derive_seed(seed, therapist_profile.seed, "inject"))
    params = therapist_render_params(therapist_profile)

    end_needed = int(round((ordered[-1][0] + ordered[-1][1]) * rate))
    if end_needed > samples.size:
        lead = samples[: int(0.2 * rate)]
        noise_std = float(np.std(lead)) if lead.size else 1e-4
        pad = noise_std * rng.standard_normal(end_needed - samples.size)
        samples = np.concatenate([samples, pad])

    spans: list[tuple[int, int, bool]] = []
    base_amp = 10.0 ** (params.intensity_db / 20.0)
    for start_s, dur_s in ordered:
        start = int(round(start_s * rate))
        end = start + int(round(dur_s * rate))
        count = num_frames_for(clip.samples.size, FRAME_LEN, FRAME_SHIFT)
        centers = FRAME_SHIFT * np.arange(count) + FRAME_LEN // 2
        colliding = (centers >= start) & (centers < end) & truth.speech_mask[:count]
        if np.any(colliding):
            raise ValueError(f"turn at {start_s:.2f}s collides with existing speech")
        cursor = start
        while cursor < end - int(0.12 * rate):
            phrase = _make_phrase(rng, 2 + int(rng.integers(4)), params, syl_dur=(0.14, 0.24))
            f0_mid = therapist_profile.base_f0 * (1.0 + 0.08 * rng.uniform(-1.0, 1.0))
            for syl in phrase.syllables:
                formants = tuple(
                    f * m for f, m in zip(therapist_profile.formants, VOWELS[syl.vowel])
                )
                chunk = _render_voiced(
                    rng, rate, syl.dur_s, f0_mid, f0_mid,
                    params.f0_wobble, 5.0, formants,
                    base_amp * 10.0 ** (syl.loud_db / 20.0),
                    params.jitter, params.shimmer, params.breath_level,
                )
                stop = min(cursor + chunk.size, end)
                samples[cursor:stop] += chunk[: stop - cursor]
                cursor = stop + int(round(syl.gap_s * rate))
                if cursor >= end - int(0.12 * rate):
                    break
            cursor += int(0.06 * rate)
        spans.append((start, end, True))

    new_speech, new_therapist = _masks_from_spans(samples.size, spans)
    count = new_speech.size
    speech_mask = new_speech.copy()
    speech_mask[: truth.speech_mask.size] |= truth.speech_mask[:count]
    therapist_mask = new_therapist.copy()
    therapist_mask[: truth.therapist_mask.size] |= truth.therapist_mask[:count]
    peak = np.max(np.abs(samples))
    if peak > 0.95:
        samples *= 0.95 / peak
    new_truth = GroundTruth(
        truth.state, speech_mask, therapist_mask, truth.planned_speech_ratio
    )
    return AudioClip(samples, rate, clip.meta), new_truth


def truth_to_segments(truth: GroundTruth) -> SegmentList:
    """Masks as the standard segment list (SPEECH/PATIENT, SPEECH/THERAPIST, pause)."""
    labels = []
    for speech, therapist in zip(truth.speech_mask, truth.therapist_mask):
        if not speech:
            labels.append((SnsLabel.NON_SPEECH, SpeakerLabel.UNASSIGNED))
        elif therapist:
            labels.append((SnsLabel.SPEECH, SpeakerLabel.THERAPIST))
        else:
            labels.append((SnsLabel.SPEECH, SpeakerLabel.PATIENT))
    segments = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            segments.append(Segment(start, t, labels[start][0], labels[start][1]))
            start = t
    return SegmentList(segments, truth.frame_period_ms)


def segments_to_truth(segments: SegmentList, state: State = State.UNKNOWN) -> GroundTruth:
    speech = segments.frame_labels()
    therapist = np.array(
        [lab == SpeakerLabel.THERAPIST for lab in segments.speaker_labels()], dtype=bool
    )
    return GroundTruth(state, speech, therapist, float(speech.mean()))


@dataclass(frozen=True)
class CorpusSpec:
    num_speakers: int = 20
    num_controls: int = 6
    effect_delta: float = 1.0
    snr_db: float = 20.0
    master_seed: int = 0
    duration_scale: float = 1.0
    therapist_turns: bool = True
    therapist_f0: float = 300.0
    # Controls follow the same nine-task protocol as patients.
    control_tasks: tuple[TaskKind, ...] = tuple(TaskKind)


def make_speaker_profile(master_seed: int, speaker_id: str) -> SpeakerProfile:
    rng = np.random.default_rng(derive_seed(master_seed, "profile", speaker_id))
    return SpeakerProfile(
        speaker_id=speaker_id,
        base_f0=float(rng.uniform(95.0, 195.0)),
        formants=(
            float(rng.uniform(640.0, 760.0)),
            float(rng.uniform(1080.0, 1260.0)),
            float(rng.uniform(2400.0, 2700.0)),
        ),
        base_intensity_db=float(rng.uniform(-26.0, -20.0)),
        base_jitter=float(rng.uniform(0.003, 0.008)),
        base_shimmer=float(rng.uniform(0.015, 0.035)),
        seed=derive_seed(master_seed, "profile-seed", speaker_id),
    )


def make_therapist_profile(spec: CorpusSpec) -> SpeakerProfile:
    rng = np.random.default_rng(derive_seed(spec.master_seed, "therapist"))
    return SpeakerProfile(
        speaker_id="therapist",
        base_f0=spec.therapist_f0,
        formants=(
            float(rng.uniform(920.0, 980.0)),
            float(rng.uniform(1980.0, 2120.0)),
            float(rng.uniform(3150.0, 3350.0)),
        ),
        base_intensity_db=-22.0,
        base_jitter=0.004,
        base_shimmer=0.02,
        seed=derive_seed(spec.master_seed, "therapist-seed"),
    )


def plan_corpus(spec: CorpusSpec) -> tuple[list[tuple], list[tuple]]:
    """Deterministic (speaker_id, task, state) plans for patients and controls."""
    patients = [
        (f"spk{idx:03d}", task, state)
        for idx in range(spec.num_speakers)
        for task in TaskKind
        for state in (State.ON, State.OFF)
    ]
    controls = [
        (f"ctl{idx:03d}", task, State.UNKNOWN)
        for idx in range(spec.num_controls)
        for task in spec.control_tasks
    ]
    return patients, controls


def _synthesize_recording(spec: CorpusSpec, profile, therapist, task, state, is_control):
    seed = derive_seed(
        spec.master_seed, "control" if is_control else "patient",
        profile.speaker_id, task.value, state.value,
    )
    if is_control:
        # Healthy controls span the whole voice-quality range so the
        # background model covers rough/breathy/monotone speech too.
        quality = float(np.random.default_rng(derive_seed(seed, "quality")).uniform(0.0, 1.0))
        effect = StateEffect(quality)
        use_state = State.OFF
    else:
        effect = StateEffect(spec.effect_delta)
        use_state = state
    clip, truth = synth_utterance(
        profile, use_state, task, effect, seed, spec.snr_db, spec.duration_scale
    )
    truth = replace_state(truth, state)
    turn_rng = np.random.default_rng(derive_seed(seed, "turns"))
    turns = []
    if spec.therapist_turns and (is_control or turn_rng.uniform() < 0.8):
        turns.append((0.25, float(turn_rng.uniform(1.3, 1.9))))
    if turns:
        clip, truth = inject_therapist(clip, truth, therapist, turns, seed)
    clip = AudioClip(clip.samples, clip.sample_rate, RecordingMeta(profile.speaker_id, task, state))
    return clip, truth


def replace_state(truth: GroundTruth, state: State) -> GroundTruth:
    return GroundTruth(
        state, truth.speech_mask, truth.therapist_mask,
        truth.planned_speech_ratio, truth.frame_period_ms,
    )


def generate_corpus(spec: CorpusSpec, out_dir) -> tuple[CorpusManifest, CorpusManifest]:
    """Write the full corpus to disk; returns (patient, control) manifests."""
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    therapist = make_therapist_profile(spec)
    patient_plan, control_plan = plan_corpus(spec)

    def render(plan, is_control):
        entries = []
        for speaker_id, task, state in plan:
            profile = make_speaker_profile(spec.master_seed, speaker_id)
            clip, truth = _synthesize_recording(spec, profile, therapist, task, state, is_control)
            rec_id = f"{speaker_id}_{task.value}_{state.value}"
            wav_rel = f"audio/{rec_id}.wav"
            truth_rel = f"truth/{rec_id}.seg"
            write_wav(out / wav_rel, clip)
            save_segments(out / truth_rel, truth_to_segments(truth))
            entries.append(ManifestEntry(wav_rel, speaker_id, task, state, truth_rel))
        return entries

    patient_manifest = CorpusManifest(render(patient_plan, False), root=out)
    control_manifest = CorpusManifest(render(control_plan, True), root=out)
    save_manifest(out / "manifest.csv", patient_manifest)
    save_manifest(out / "control.csv", control_manifest)
    echo = {
        "num_speakers": spec.num_speakers,
        "num_controls": spec.num_controls,
        "effect_delta": spec.effect_delta,
        "snr_db": spec.snr_db,
        "master_seed": spec.master_seed,
        "duration_scale": spec.duration_scale,
        "therapist_turns": spec.therapist_turns,
        "therapist_f0": spec.therapist_f0,
        "control_tasks": [t.value for t in spec.control_tasks],
    }
    (out / "genspec.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    return patient_manifest, control_manifest
