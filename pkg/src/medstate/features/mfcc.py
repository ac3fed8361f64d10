"""Mel-frequency cepstral coefficients.

Per frame: pre-emphasis, Hamming window, FFT power spectrum, triangular
mel filterbank, log with a floor, DCT-II.  This is a clean re-implementation
of the conventional recipe, not a numerical clone of any specific toolkit.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct

from ..signalio import AudioClip, frame_signal, window_coefficients
from .types import FeatureKind, FeatureMatrix, MfccConfig

LOG_FLOOR = 1e-10


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, nfft: int, sample_rate: int,
                   low_hz: float = 0.0, high_hz: float | None = None) -> np.ndarray:
    """Triangular mel filters as a (num_filters, nfft//2 + 1) weight matrix."""
    if high_hz is None:
        high_hz = sample_rate / 2.0
    high_hz = min(high_hz, sample_rate / 2.0)
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), num_filters + 2))
    bin_freqs = np.arange(nfft // 2 + 1) * sample_rate / nfft
    bank = np.zeros((num_filters, bin_freqs.size))
    for i in range(num_filters):
        left, center, right = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_freqs - left) / max(center - left, 1e-12)
        falling = (right - bin_freqs) / max(right - center, 1e-12)
        bank[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def next_pow2(n: int) -> int:
    size = 1
    while size < n:
        size *= 2
    return size


def pre_emphasize_frames(frames: np.ndarray, coeff: float) -> np.ndarray:
    """First-order pre-emphasis applied within each frame row."""
    if coeff <= 0.0:
        return frames
    out = frames.copy()
    out[:, 1:] -= coeff * frames[:, :-1]
    out[:, 0] *= 1.0 - coeff
    return out


def power_spectrum(frames: np.ndarray, nfft: int) -> np.ndarray:
    spectrum = np.fft.rfft(frames, nfft, axis=1)
    return (spectrum.real**2 + spectrum.imag**2)


def mfcc(clip: AudioClip, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """13 cepstral coefficients per frame (c0..c12 by default)."""
    frameset = frame_signal(clip, cfg.frame_ms, cfg.shift_ms)
    frames = pre_emphasize_frames(frameset.frames, cfg.pre_emphasis)
    frames = frames * window_coefficients("hamming", frameset.frame_length)
    nfft = next_pow2(frameset.frame_length)
    pspec = power_spectrum(frames, nfft)
    bank = mel_filterbank(cfg.num_filters, nfft, clip.sample_rate, cfg.low_hz, cfg.high_hz)
    fbank = np.log(np.maximum(pspec @ bank.T, LOG_FLOOR))
    ceps = dct(fbank, type=2, axis=1, norm="ortho")
    if cfg.use_c0:
        ceps = ceps[:, : cfg.num_ceps]
    else:
        ceps = ceps[:, 1 : cfg.num_ceps + 1]
    if cfg.lifter > 0:
        n = np.arange(ceps.shape[1])
        ceps = ceps * (1.0 + (cfg.lifter / 2.0) * np.sin(np.pi * n / cfg.lifter))
    return FeatureMatrix(
        ceps,
        FeatureKind.MFCC13,
        frame_period_ms=cfg.shift_ms,
        history=(f"mfcc(nc={cfg.num_ceps},nf={cfg.num_filters},c0={cfg.use_c0})",),
    )
