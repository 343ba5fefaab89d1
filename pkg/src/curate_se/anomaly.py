"""Signal-based detectors for common defects in nominally clean speech:
clipping, infrasound contamination, elevated noise floor, band truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import welch

from .audio_io import AudioBuffer

CLIP_LEVEL_REL = 0.999
CLIP_PEAK_GATE = 0.5
INFRASOUND_EDGE_HZ = 75.0
BANDWIDTH_WINDOW_HZ = 250.0
BANDWIDTH_THRESHOLD_DB = 60.0
FLOOR_MIN_DBFS = -120.0


@dataclass
class AnomalyReport:
    clipping_fraction: float
    infrasound_ratio_db: float
    noise_floor_dbfs: float
    effective_bandwidth_hz: float

    def as_scores(self) -> dict[str, float]:
        """Manifest score names used by the `detect` CLI subcommand."""
        return {
            "CLIP_FRAC": self.clipping_fraction,
            "INFRA_DB": self.infrasound_ratio_db,
            "FLOOR_DBFS": self.noise_floor_dbfs,
            "BW_HZ": self.effective_bandwidth_hz,
        }


def detect_clipping(buffer: AudioBuffer) -> float:
    """Fraction of samples at/near the signal's own full scale.

    Counts samples with |s| >= 0.999 * max|s|, but only when max|s| >= 0.5;
    quiet recordings cannot be clipped at their own (low) peak.
    """
    peak = np.max(np.abs(buffer.samples))
    if peak < CLIP_PEAK_GATE:
        return 0.0
    return float(np.mean(np.abs(buffer.samples) >= CLIP_LEVEL_REL * peak))


def _require_duration(buffer: AudioBuffer, min_s: float) -> None:
    if buffer.duration_s < min_s:
        raise ValueError(f"buffer too short: need >= {min_s} s, got {buffer.duration_s:.3f} s")


def detect_infrasound(buffer: AudioBuffer) -> float:
    """Mean power density in [1, 75] Hz relative to [75, Nyquist], in dB.

    Welch-averaged periodograms with 1 s segments (1 Hz bins). Narrowband
    infrasound tones push this ratio strongly positive because the reference
    band is three orders of magnitude wider.
    """
    if buffer.sample_rate_hz < 8000:
        raise ValueError("detect_infrasound requires sample_rate_hz >= 8000")
    _require_duration(buffer, 1.0)
    fs = buffer.sample_rate_hz
    freqs, psd = welch(buffer.samples, fs=fs, window="hann", nperseg=fs, noverlap=fs // 2)
    low = psd[(freqs >= 1.0) & (freqs <= INFRASOUND_EDGE_HZ)]
    high = psd[freqs > INFRASOUND_EDGE_HZ]
    tiny = np.finfo(np.float64).tiny
    return float(10.0 * np.log10((low.mean() + tiny) / (high.mean() + tiny)))


def estimate_noise_floor(buffer: AudioBuffer) -> float:
    """Stationary noise-floor estimate: 10th percentile of 32 ms frame RMS
    (16 ms hop) in dBFS, floored at -120 dBFS."""
    _require_duration(buffer, 1.0)
    fs = buffer.sample_rate_hz
    frame = int(round(0.032 * fs))
    hop = int(round(0.016 * fs))
    frames = np.lib.stride_tricks.sliding_window_view(buffer.samples, frame)[::hop]
    rms = np.sqrt(np.mean(frames**2, axis=1))
    p10 = np.percentile(rms, 10)
    return float(max(20.0 * np.log10(max(p10, 1e-12)), FLOOR_MIN_DBFS))


def estimate_effective_bandwidth(buffer: AudioBuffer) -> float:
    """Highest frequency still carrying content within 60 dB of the spectral peak.

    Two scans over a Welch PSD (Blackman-Harris, 1 Hz bins): the top edge of
    the per-bin support above (peak - 60 dB), and the highest 250 Hz-wide
    window whose mean density clears the same threshold. The minimum of the
    two suppresses both single-bin estimation noise and window-edge leakage.
    """
    _require_duration(buffer, 1.0)
    fs = buffer.sample_rate_hz
    nperseg = min(buffer.samples.size, fs)
    freqs, psd = welch(
        buffer.samples, fs=fs, window="blackmanharris", nperseg=nperseg, noverlap=nperseg // 2
    )
    psd, freqs = psd[1:], freqs[1:]  # DC bin is not bandwidth
    peak = psd.max()
    if peak <= 0.0:
        return 0.0
    threshold = peak * 10.0 ** (-BANDWIDTH_THRESHOLD_DB / 10.0)

    above = np.nonzero(psd > threshold)[0]
    support_top = freqs[above[-1]] if above.size else 0.0

    df = freqs[1] - freqs[0]
    width = max(int(round(BANDWIDTH_WINDOW_HZ / df)), 1)
    csum = np.concatenate([[0.0], np.cumsum(psd)])
    window_mean = (csum[width:] - csum[:-width]) / width  # window ending at bin i+width-1
    passing = np.nonzero(window_mean > threshold)[0]
    window_top = freqs[passing[-1] + width - 1] if passing.size else 0.0

    return float(min(support_top, window_top))


def analyze(buffer: AudioBuffer) -> AnomalyReport:
    return AnomalyReport(
        clipping_fraction=detect_clipping(buffer),
        infrasound_ratio_db=detect_infrasound(buffer),
        noise_floor_dbfs=estimate_noise_floor(buffer),
        effective_bandwidth_hz=estimate_effective_bandwidth(buffer),
    )
