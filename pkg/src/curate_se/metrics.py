"""Intrusive evaluation metrics implemented from their definitions: SDR,
SI-SDR, ESTOI and LSD, plus the SNR measurement used to validate mixing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioBuffer, _resample_signal

SENTINEL_DB = 1e9  # serialized stand-in for +inf (identical signals)

LSD_NFFT = 2048
LSD_HOP = 512
LSD_EPS = 1e-8

ESTOI_RATE = 10000
ESTOI_NFFT = 512
ESTOI_HOP = 256
ESTOI_BANDS = 15
ESTOI_BAND_START_HZ = 150.0
ESTOI_SEGMENT = 30
ESTOI_VAD_RANGE_DB = 40.0


@dataclass
class EvalResult:
    utterance_id: str
    sdr_db: float
    si_sdr_db: float
    estoi: float
    lsd: float

    def as_row(self) -> dict:
        """JSON-safe row: +inf becomes the 1e9 sentinel, ESTOI clips to [0, 1]."""

        def fin(x: float) -> float:
            return SENTINEL_DB if math.isinf(x) else x

        return {
            "utterance_id": self.utterance_id,
            "sdr_db": fin(self.sdr_db),
            "si_sdr_db": fin(self.si_sdr_db),
            "estoi": min(max(self.estoi, 0.0), 1.0),
            "lsd": self.lsd,
        }


def _check_pair(reference: np.ndarray, estimate: np.ndarray) -> None:
    if reference.shape != estimate.shape:
        raise ValueError(f"length mismatch: {reference.size} vs {estimate.size}")


def sdr(reference: AudioBuffer, estimate: AudioBuffer) -> float:
    """Plain energy-ratio SDR: 10*log10(sum r^2 / sum (r-e)^2).

    Not the BSS-eval projection variant; numbers are not 1:1 comparable with
    toolkits that allow a short distortion filter.
    """
    r, e = reference.samples, estimate.samples
    _check_pair(r, e)
    residual = float(np.sum((r - e) ** 2))
    if residual < 1e-30:
        return math.inf
    return float(10.0 * np.log10(np.sum(r**2) / residual))


def si_sdr(reference: AudioBuffer, estimate: AudioBuffer) -> float:
    """Scale-invariant SDR: project the estimate onto the reference and
    compare the projection against the projection residual."""
    r, e = reference.samples, estimate.samples
    _check_pair(r, e)
    ref_energy = float(np.dot(r, r))
    if ref_energy < 1e-30:
        raise ValueError("zero-energy reference")
    target = (np.dot(e, r) / ref_energy) * r
    residual = float(np.sum((e - target) ** 2))
    if residual < 1e-30:
        return math.inf
    return float(10.0 * np.log10(np.sum(target**2) / residual))


def measured_snr(clean: AudioBuffer, noise_component: AudioBuffer) -> float:
    """Full-utterance energy SNR of a decomposed mixture."""
    c, n = clean.samples, noise_component.samples
    _check_pair(c, n)
    noise_energy = float(np.sum(n**2))
    if noise_energy < 1e-30:
        raise ValueError("zero-energy noise component")
    return float(10.0 * np.log10(np.sum(c**2) / noise_energy))


def _circular_power_frames(x: np.ndarray) -> np.ndarray:
    """Hann-windowed power spectrogram on a circular frame grid (frame starts
    at multiples of the hop, wrapping at the end) so whole-hop circular shifts
    of the input permute frames instead of changing them."""
    n = x.size
    if n < LSD_NFFT:
        raise ValueError(f"need at least {LSD_NFFT} samples, got {n}")
    window = np.hanning(LSD_NFFT)
    starts = np.arange(n // LSD_HOP) * LSD_HOP
    idx = (starts[:, None] + np.arange(LSD_NFFT)[None, :]) % n
    frames = x[idx] * window
    return np.abs(np.fft.rfft(frames, axis=1)) ** 2


def lsd(reference: AudioBuffer, estimate: AudioBuffer) -> float:
    """Log-spectral distance: RMS over frequency of the dB-scale log-power
    difference, averaged over frames. STFT 2048/512 Hann, eps 1e-8."""
    r, e = reference.samples, estimate.samples
    _check_pair(r, e)
    if reference.sample_rate_hz != estimate.sample_rate_hz:
        raise ValueError("sample rate mismatch")
    p_ref = _circular_power_frames(r)
    p_est = _circular_power_frames(e)
    diff_db = 10.0 * (np.log10(p_ref + LSD_EPS) - np.log10(p_est + LSD_EPS))
    return float(np.mean(np.sqrt(np.mean(diff_db**2, axis=1))))


def _third_octave_matrix() -> np.ndarray:
    """Boolean (bands x bins) masks for 15 one-third-octave bands from 150 Hz
    over a 512-point rfft grid at 10 kHz."""
    freqs = np.fft.rfftfreq(ESTOI_NFFT, 1.0 / ESTOI_RATE)
    centers = ESTOI_BAND_START_HZ * 2.0 ** (np.arange(ESTOI_BANDS) / 3.0)
    lo = centers * 2.0 ** (-1.0 / 6.0)
    hi = centers * 2.0 ** (1.0 / 6.0)
    return (freqs[None, :] >= lo[:, None]) & (freqs[None, :] < hi[:, None])


def _stft_frames(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    n_frames = 1 + (x.size - ESTOI_NFFT) // ESTOI_HOP
    idx = (np.arange(n_frames) * ESTOI_HOP)[:, None] + np.arange(ESTOI_NFFT)[None, :]
    return np.fft.rfft(x[idx] * window, axis=1)


def estoi(reference: AudioBuffer, estimate: AudioBuffer, sample_rate_hz: int | None = None) -> float:
    """Extended short-time objective intelligibility.

    Both signals are resampled to 10 kHz; frames whose reference energy falls
    more than 40 dB below the loudest frame are discarded; one-third-octave
    band envelopes over 30-frame segments are row- and column-normalized and
    correlated. Returns the raw mean correlation in [-1, 1] (callers report it
    clipped to [0, 1]).
    """
    r, e = reference.samples, estimate.samples
    _check_pair(r, e)
    rate = sample_rate_hz or reference.sample_rate_hz
    if reference.duration_s < 0.5:
        raise ValueError("estoi needs at least 0.5 s of audio")
    if rate != ESTOI_RATE:
        r = _resample_signal(r, rate, ESTOI_RATE)
        e = _resample_signal(e, rate, ESTOI_RATE)

    window = np.hanning(ESTOI_NFFT)
    if r.size < ESTOI_NFFT:
        raise ValueError("too short after resampling")
    spec_r = _stft_frames(r, window)
    spec_e = _stft_frames(e, window)

    frame_energy = np.sum(np.abs(spec_r) ** 2, axis=1)
    peak = frame_energy.max()
    if peak <= 0.0:
        raise ValueError("all-silent reference")
    keep = 10.0 * np.log10(frame_energy + 1e-300) > 10.0 * np.log10(peak) - ESTOI_VAD_RANGE_DB
    spec_r, spec_e = spec_r[keep], spec_e[keep]
    if spec_r.shape[0] < ESTOI_SEGMENT:
        raise ValueError("too few active frames for a 30-frame segment")

    bands = _third_octave_matrix()
    # (frames x bands) band envelopes
    env_r = np.sqrt((np.abs(spec_r) ** 2) @ bands.T)
    env_e = np.sqrt((np.abs(spec_e) ** 2) @ bands.T)

    def _normalize(seg: np.ndarray) -> np.ndarray:
        # seg: (bands x frames); rows then columns to zero mean, unit norm
        seg = seg - seg.mean(axis=1, keepdims=True)
        seg = seg / np.maximum(np.linalg.norm(seg, axis=1, keepdims=True), 1e-20)
        seg = seg - seg.mean(axis=0, keepdims=True)
        seg = seg / np.maximum(np.linalg.norm(seg, axis=0, keepdims=True), 1e-20)
        return seg

    n_frames = env_r.shape[0]
    correlations = []
    for m in range(ESTOI_SEGMENT, n_frames + 1):
        x = _normalize(env_r[m - ESTOI_SEGMENT : m].T)
        y = _normalize(env_e[m - ESTOI_SEGMENT : m].T)
        correlations.append(np.sum(x * y) / ESTOI_SEGMENT)
    return float(np.mean(correlations))


def evaluate_pair(utterance_id: str, reference: AudioBuffer, estimate: AudioBuffer) -> EvalResult:
    """All four intrusive metrics for one aligned clean/processed pair."""
    return EvalResult(
        utterance_id=utterance_id,
        sdr_db=sdr(reference, estimate),
        si_sdr_db=si_sdr(reference, estimate),
        estoi=estoi(reference, estimate),
        lsd=lsd(reference, estimate),
    )
