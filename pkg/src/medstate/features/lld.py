"""Prosodic and voice-quality low-level descriptors (eGeMAPS-style).

23 descriptors per 10 ms frame: pitch-family values (log-F0, jitter,
shimmer, HNR, formant relative amplitudes, harmonic differences) from
60 ms windows, spectral-family values (loudness proxy, spectral balance
and slopes, flux, formant frequencies/bandwidth, cepstra 1-4) from 20 ms
windows.  Pitch-dependent descriptors are zero on unvoiced frames.

These are plain-formula estimators (autocorrelation pitch, peak-picking
perturbation measures, LPC formants); no numerical compatibility with any
external toolkit is intended.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dct
from scipy.linalg import solve_toeplitz
from scipy.signal import find_peaks

from ..signalio import AudioClip, TooShortError, num_frames_for, window_coefficients
from .mfcc import mel_filterbank
from .types import FeatureKind, FeatureMatrix

PITCH_WINDOW_MS = 60.0
SPECTRAL_WINDOW_MS = 20.0
SHIFT_MS = 10.0
F0_MIN_HZ = 55.0
F0_MAX_HZ = 400.0
VOICING_RHO = 0.45
VOICING_ENERGY_FLOOR = 1e-6
LPC_ORDER = 12
MAG_DB_FLOOR = -120.0

DEFAULT_LLD_NAMES = (
    "log_f0",
    "jitter",
    "shimmer",
    "hnr_db",
    "loudness",
    "alpha_ratio_db",
    "hammarberg_db",
    "slope_0_500",
    "slope_500_1500",
    "spectral_flux",
    "f1_freq",
    "f1_bw",
    "f1_amp_rel_db",
    "f2_freq",
    "f2_amp_rel_db",
    "f3_freq",
    "f3_amp_rel_db",
    "h1_h2_db",
    "h1_a3_db",
    "cep1",
    "cep2",
    "cep3",
    "cep4",
)

# The wider reading of the descriptor set: adds the second and third
# formant bandwidths and an explicit voicing flag.
EXTENDED_LLD_NAMES = DEFAULT_LLD_NAMES + ("f2_bw", "f3_bw", "voiced_flag")

PITCH_FAMILY = frozenset(
    {
        "log_f0",
        "jitter",
        "shimmer",
        "hnr_db",
        "f1_amp_rel_db",
        "f2_amp_rel_db",
        "f3_amp_rel_db",
        "h1_h2_db",
        "h1_a3_db",
    }
)


def _frame_matrix(samples: np.ndarray, frame_len: int, shift: int, count: int) -> np.ndarray:
    idx = shift * np.arange(count)[:, None] + np.arange(frame_len)[None, :]
    return samples[idx]


def _autocorr_frames(frames: np.ndarray, max_lag: int) -> np.ndarray:
    """Unbiased-enough FFT autocorrelation of each row up to max_lag."""
    n = frames.shape[1]
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    spectrum = np.fft.rfft(frames, nfft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    acorr = np.fft.irfft(power, nfft, axis=1)[:, : max_lag + 1]
    return acorr


def _parabolic_refine(values: np.ndarray, idx: int) -> float:
    """Sub-sample peak location around integer index by parabola fit."""
    if idx <= 0 or idx >= values.size - 1:
        return float(idx)
    left, mid, right = values[idx - 1], values[idx], values[idx + 1]
    denom = left - 2.0 * mid + right
    if abs(denom) < 1e-30:
        return float(idx)
    return idx + 0.5 * (left - right) / denom


def _db(power: np.ndarray | float) -> np.ndarray | float:
    return 10.0 * np.log10(np.maximum(power, 10.0 ** (MAG_DB_FLOOR / 10.0)))


def track_pitch(clip: AudioClip) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-frame (f0_hz, rho, voiced) from 60 ms autocorrelation windows.

    f0 is 0 where unvoiced; rho is the normalized autocorrelation peak.
    """
    rate = clip.sample_rate
    frame_len = int(round(rate * PITCH_WINDOW_MS / 1000.0))
    shift = int(round(rate * SHIFT_MS / 1000.0))
    count = num_frames_for(clip.samples.size, frame_len, shift)
    if count < 1:
        raise TooShortError("clip shorter than one 60 ms pitch window")
    frames = _frame_matrix(clip.samples, frame_len, shift, count)
    frames = frames - frames.mean(axis=1, keepdims=True)
    lag_min = int(np.floor(rate / F0_MAX_HZ))
    lag_max = int(np.ceil(rate / F0_MIN_HZ))
    lag_max = min(lag_max, frame_len - 1)
    acorr = _autocorr_frames(frames, lag_max)
    r0 = acorr[:, 0]
    f0 = np.zeros(count)
    rho = np.zeros(count)
    voiced = np.zeros(count, dtype=bool)
    for t in range(count):
        if r0[t] < VOICING_ENERGY_FLOOR:
            continue
        window = acorr[t, lag_min : lag_max + 1]
        best = int(np.argmax(window))
        lag = _parabolic_refine(acorr[t], lag_min + best)
        peak_rho = window[best] / r0[t]
        rho[t] = peak_rho
        if peak_rho > VOICING_RHO:
            voiced[t] = True
            f0[t] = rate / lag
    return f0, rho, voiced


def _perturbation(frame: np.ndarray, period_samples: float) -> tuple[float, float]:
    """Cycle-to-cycle (jitter, shimmer) from waveform peak picking."""
    distance = max(int(0.7 * period_samples), 1)
    peaks, _ = find_peaks(frame, distance=distance)
    if peaks.size < 3:
        return 0.0, 0.0
    periods = np.diff(peaks).astype(np.float64)
    amps = np.abs(frame[peaks])
    jitter = 0.0
    if periods.size >= 2:
        jitter = float(np.mean(np.abs(np.diff(periods))) / max(np.mean(periods), 1e-12))
    mean_amp = float(np.mean(amps))
    shimmer = 0.0
    if amps.size >= 2 and mean_amp > 1e-12:
        shimmer = float(np.mean(np.abs(np.diff(amps))) / mean_amp)
    return jitter, shimmer


def _band_indices(freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.flatnonzero((freqs >= lo) & (freqs < hi))


def _spectral_slope(freqs: np.ndarray, power: np.ndarray, lo: float, hi: float) -> float:
    """Least-squares slope of the dB spectrum over [lo, hi), in dB per kHz."""
    band = _band_indices(freqs, lo, hi)
    if band.size < 2:
        return 0.0
    x = freqs[band] / 1000.0
    y = _db(power[band])
    x = x - x.mean()
    denom = float(np.sum(x * x))
    if denom <= 0.0:
        return 0.0
    return float(np.sum(x * (y - y.mean())) / denom)


def _lpc_formants(frame: np.ndarray, rate: int) -> list[tuple[float, float]]:
    """(frequency, bandwidth) pairs from LPC root angles, ascending frequency."""
    emphasized = np.empty_like(frame)
    emphasized[0] = frame[0]
    emphasized[1:] = frame[1:] - 0.97 * frame[:-1]
    windowed = emphasized * np.hamming(frame.size)
    full = np.correlate(windowed, windowed, mode="full")
    r = full[windowed.size - 1 : windowed.size + LPC_ORDER]
    if r[0] < 1e-12:
        return []
    r = r / r[0]
    r[0] += 1e-9
    try:
        a = solve_toeplitz((r[:LPC_ORDER], r[:LPC_ORDER]), -r[1 : LPC_ORDER + 1])
    except np.linalg.LinAlgError:
        return []
    roots = np.roots(np.concatenate(([1.0], a)))
    roots = roots[np.imag(roots) > 1e-6]
    formants = []
    for root in roots:
        freq = float(np.angle(root) * rate / (2.0 * np.pi))
        bandwidth = float(-rate / np.pi * np.log(min(abs(root), 0.9999)))
        if 90.0 < freq < 5500.0 and bandwidth < 1200.0:
            formants.append((freq, bandwidth))
    formants.sort()
    return formants[:3]


def _harmonic_db(mag_db: np.ndarray, bin_hz: float, target_hz: float) -> float:
    """dB magnitude of the strongest bin within one bin of the target frequency."""
    if target_hz <= 0.0:
        return MAG_DB_FLOOR
    center = int(round(target_hz / bin_hz))
    lo = max(center - 1, 0)
    hi = min(center + 2, mag_db.size)
    if lo >= hi:
        return MAG_DB_FLOOR
    return float(np.max(mag_db[lo:hi]))


def egemaps_lld(clip: AudioClip, descriptors: tuple[str, ...] = DEFAULT_LLD_NAMES) -> FeatureMatrix:
    """Extract the configured LLD columns at a 10 ms frame period."""
    unknown = set(descriptors) - set(EXTENDED_LLD_NAMES)
    if unknown:
        raise ValueError(f"unknown descriptors: {sorted(unknown)}")
    rate = clip.sample_rate
    shift = int(round(rate * SHIFT_MS / 1000.0))
    pitch_len = int(round(rate * PITCH_WINDOW_MS / 1000.0))
    spec_len = int(round(rate * SPECTRAL_WINDOW_MS / 1000.0))
    count = num_frames_for(clip.samples.size, pitch_len, shift)
    if count < 1:
        raise TooShortError("clip shorter than the 60 ms analysis window")

    f0, rho, voiced = track_pitch(clip)
    pitch_frames = _frame_matrix(clip.samples, pitch_len, shift, count)
    spec_frames = _frame_matrix(clip.samples, spec_len, shift, count)

    # Spectral family: 20 ms Hamming-windowed power spectra.
    nfft = 512
    windowed = spec_frames * window_coefficients("hamming", spec_len)
    spectrum = np.fft.rfft(windowed, nfft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    freqs = np.arange(nfft // 2 + 1) * rate / nfft
    magnitude = np.sqrt(power)

    bank = mel_filterbank(26, nfft, rate, 0.0, min(8000.0, rate / 2.0))
    fbank = np.log(np.maximum(power @ bank.T, 1e-10))
    ceps = dct(fbank, type=2, axis=1, norm="ortho")[:, 1:5]

    low_band = _band_indices(freqs, 50.0, 1000.0)
    high_band = _band_indices(freqs, 1000.0, 5000.0)
    ham_low = _band_indices(freqs, 0.0, 2000.0)
    ham_high = _band_indices(freqs, 2000.0, 5000.0)

    # Pitch-family spectra: finer resolution over the 60 ms window.
    nfft_pitch = 2048
    pitch_windowed = pitch_frames * window_coefficients("hamming", pitch_len)
    pitch_mag_db = 20.0 * np.log10(
        np.maximum(np.abs(np.fft.rfft(pitch_windowed, nfft_pitch, axis=1)), 1e-6)
    )
    bin_hz = rate / nfft_pitch

    values = np.zeros((count, len(descriptors)))
    col = {name: i for i, name in enumerate(descriptors)}

    def put(name: str, t: int, value: float) -> None:
        if name in col:
            values[t, col[name]] = value

    prev_mag = None
    for t in range(count):
        put("loudness", t, float(np.sqrt(np.mean(spec_frames[t] ** 2))))
        put("alpha_ratio_db", t, float(_db(power[t, low_band].sum()) - _db(power[t, high_band].sum())))
        put(
            "hammarberg_db",
            t,
            float(_db(power[t, ham_low].max(initial=0.0)) - _db(power[t, ham_high].max(initial=0.0))),
        )
        put("slope_0_500", t, _spectral_slope(freqs, power[t], 0.0, 500.0))
        put("slope_500_1500", t, _spectral_slope(freqs, power[t], 500.0, 1500.0))
        if prev_mag is not None:
            put("spectral_flux", t, float(np.mean((magnitude[t] - prev_mag) ** 2)))
        prev_mag = magnitude[t]
        for i in range(4):
            put(f"cep{i + 1}", t, float(ceps[t, i]))

        formants = _lpc_formants(spec_frames[t], rate)
        for i, (freq, bandwidth) in enumerate(formants, start=1):
            put(f"f{i}_freq", t, freq)
            put(f"f{i}_bw", t, bandwidth)

        if not voiced[t]:
            continue
        put("voiced_flag", t, 1.0)
        put("log_f0", t, float(np.log(f0[t])))
        period = rate / f0[t]
        jitter, shimmer = _perturbation(pitch_frames[t], period)
        put("jitter", t, jitter)
        put("shimmer", t, shimmer)
        rho_clipped = min(rho[t], 1.0 - 1e-6)
        put("hnr_db", t, float(np.clip(10.0 * np.log10(rho_clipped / (1.0 - rho_clipped)), -40.0, 60.0)))

        h1 = _harmonic_db(pitch_mag_db[t], bin_hz, f0[t])
        h2 = _harmonic_db(pitch_mag_db[t], bin_hz, 2.0 * f0[t])
        put("h1_h2_db", t, h1 - h2)
        for i, (freq, _bw) in enumerate(formants, start=1):
            harmonic = max(round(freq / f0[t]), 1) * f0[t]
            put(f"f{i}_amp_rel_db", t, _harmonic_db(pitch_mag_db[t], bin_hz, harmonic) - h1)
        if len(formants) == 3:
            f3_freq = formants[2][0]
            harmonic = max(round(f3_freq / f0[t]), 1) * f0[t]
            put("h1_a3_db", t, h1 - _harmonic_db(pitch_mag_db[t], bin_hz, harmonic))

    return FeatureMatrix(
        values,
        FeatureKind.EGEMAPS23,
        frame_period_ms=SHIFT_MS,
        history=(f"lld(n={len(descriptors)})",),
    )
