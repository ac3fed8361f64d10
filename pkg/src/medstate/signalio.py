"""Audio I/O, framing, windowing and frame log-energy.

Everything downstream (segmentation, features, speaker ID) consumes the
primitives defined here.  The toolkit is deliberately narrow: PCM 16-bit
mono WAV at the canonical 16 kHz rate, rectangular framing with the
trailing partial frame dropped, and a floored log-energy.
"""

from __future__ import annotations

import enum
import wave
from dataclasses import dataclass, field

import numpy as np

CANONICAL_RATE = 16000
ENERGY_FLOOR = 1e-10
INT16_SCALE = 32768.0


class AudioFormatError(ValueError):
    """Raised for files that are not PCM 16-bit mono WAV at the canonical rate."""


class TooShortError(ValueError):
    """Raised when a clip is shorter than one analysis frame."""


class TaskKind(enum.Enum):
    """The nine vocal production tasks, in increasing order of complexity."""

    VOWEL_A = "vowel_a"            # three repetitions of sustained /a/
    MPT = "mpt"                    # maximum phonation time
    DDK = "ddk"                    # oral diadochokinesia (fast "pataka")
    READ_WORDS = "read_words"      # reading aloud 10 words
    READ_SENTENCES = "read_sentences"  # reading aloud 10 sentences
    READ_TEXT = "read_text"        # reading aloud a short text
    READ_PROSODIC = "read_prosodic"    # sentences with marked prosody
    STORYTELLING = "storytelling"  # visually guided storytelling
    CONVERSATION = "conversation"  # spontaneous conversation


class State(enum.Enum):
    ON = "ON"
    OFF = "OFF"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class RecordingMeta:
    speaker_id: str = ""
    task: TaskKind = TaskKind.VOWEL_A
    state: State = State.UNKNOWN
    split_hint: str | None = None


@dataclass(eq=False)
class AudioClip:
    """Mono PCM samples in [-1, 1] plus rate and provenance metadata."""

    samples: np.ndarray
    sample_rate: int
    meta: RecordingMeta = field(default_factory=RecordingMeta)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("AudioClip requires a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if np.max(np.abs(self.samples)) > 1.0 + 1e-9:
            raise ValueError("samples must lie within [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(np.clip(self.samples * gain, -1.0, 1.0), self.sample_rate, self.meta)


@dataclass(eq=False)
class FrameSet:
    """Rectangular frames cut from a clip: (num_frames, frame_length)."""

    frames: np.ndarray
    frame_shift: int
    frame_length: int
    origin_rate: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_period_ms(self) -> float:
        return 1000.0 * self.frame_shift / self.origin_rate


def num_frames_for(num_samples: int, frame_length: int, frame_shift: int) -> int:
    """Frame count with the trailing partial frame dropped."""
    if num_samples < frame_length:
        return 0
    return (num_samples - frame_length) // frame_shift + 1


def read_wav(path, expected_rate: int | None = CANONICAL_RATE) -> AudioClip:
    """Read a PCM 16-bit mono WAV file into an AudioClip.

    Rejects anything that is not plain 16-bit mono PCM; by default the
    sample rate must equal the canonical 16 kHz (pass ``expected_rate=None``
    to accept any rate).  Samples are scaled by 1/32768.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            nchannels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            comptype = wf.getcomptype()
            nframes = wf.getnframes()
            payload = wf.readframes(nframes)
    except (wave.Error, EOFError) as exc:
        raise AudioFormatError(f"unreadable WAV file {path}: {exc}") from exc
    if comptype != "NONE":
        raise AudioFormatError(f"{path}: compressed WAV ({comptype}) not supported")
    if nchannels != 1:
        raise AudioFormatError(f"{path}: expected mono, got {nchannels} channels")
    if sampwidth != 2:
        raise AudioFormatError(f"{path}: expected 16-bit PCM, got {8 * sampwidth}-bit")
    if expected_rate is not None and rate != expected_rate:
        raise AudioFormatError(
            f"{path}: sample rate {rate} Hz differs from required {expected_rate} Hz"
        )
    if nframes == 0:
        raise AudioFormatError(f"{path}: empty audio payload")
    raw = np.frombuffer(payload, dtype="<i2")
    return AudioClip(raw.astype(np.float64) / INT16_SCALE, rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write an AudioClip as PCM 16-bit mono WAV."""
    quantized = np.clip(np.round(clip.samples * INT16_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(quantized.tobytes())


def frame_signal(clip: AudioClip, frame_ms: float = 25.0, shift_ms: float = 10.0) -> FrameSet:
    """Cut a clip into rectangular frames; the trailing partial frame is dropped."""
    frame_length = int(round(clip.sample_rate * frame_ms / 1000.0))
    frame_shift = int(round(clip.sample_rate * shift_ms / 1000.0))
    if frame_length <= 0 or frame_shift <= 0:
        raise ValueError("frame and shift durations must be positive")
    n = num_frames_for(clip.samples.size, frame_length, frame_shift)
    if n < 1:
        raise TooShortError(
            f"clip of {clip.samples.size} samples is shorter than one "
            f"{frame_length}-sample frame"
        )
    idx = frame_shift * np.arange(n)[:, None] + np.arange(frame_length)[None, :]
    return FrameSet(clip.samples[idx], frame_shift, frame_length, clip.sample_rate)


_WINDOWS = {
    "hamming": np.hamming,
    "hann": np.hanning,
}


def window_coefficients(kind: str, length: int) -> np.ndarray:
    try:
        fn = _WINDOWS[kind]
    except KeyError:
        raise ValueError(f"unknown window kind {kind!r}; choose from {sorted(_WINDOWS)}")
    return fn(length)


def apply_window(frame: np.ndarray, kind: str = "hamming") -> np.ndarray:
    """Multiply a frame (or frame matrix) element-wise by an analysis window."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("cannot window an empty frame")
    return frame * window_coefficients(kind, frame.shape[-1])


def log_energy(frame: np.ndarray) -> float:
    """log(sum of squares + floor); the floor keeps silent frames finite."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size == 0:
        raise ValueError("cannot compute energy of an empty frame")
    return float(np.log(np.sum(frame * frame) + ENERGY_FLOOR))


def frame_log_energies(frames: FrameSet) -> np.ndarray:
    """Vector of per-frame log-energies for a FrameSet."""
    return np.log(np.sum(frames.frames * frames.frames, axis=1) + ENERGY_FLOOR)
