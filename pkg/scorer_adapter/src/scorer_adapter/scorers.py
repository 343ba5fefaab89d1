"""Scorer backends.

Two kinds: lightweight built-in signal proxies (always available, version
"builtin-0.1.0", useful for offline runs and CI), and TorchScript artifacts
supplied by the user (the real pretrained predictors; loaded lazily and
identified by content digest). Scores are deterministic for a fixed backend
version: inference is eval-mode and single-threaded.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import resample_poly

BUILTIN_VERSION = "builtin-0.1.0"

ScoreFn = Callable[[np.ndarray, int], float]


@dataclass
class LoadedScorer:
    metric: str
    version: str
    score: ScoreFn


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + np.exp(-x))


def _signal_features(x: np.ndarray, fs: int) -> dict[str, float]:
    frame = max(int(0.032 * fs), 16)
    hop = max(frame // 2, 8)
    n_frames = max((x.size - frame) // hop + 1, 1)
    idx = (np.arange(n_frames) * hop)[:, None] + np.arange(frame)[None, :]
    idx = np.minimum(idx, x.size - 1)
    rms = np.sqrt(np.mean(x[idx] ** 2, axis=1))
    level = float(np.percentile(rms, 90))
    floor = float(np.percentile(rms, 10))
    snr_db = 20.0 * np.log10(max(level, 1e-6) / max(floor, 1e-6))
    peak = float(np.max(np.abs(x))) or 1.0
    clip_frac = float(np.mean(np.abs(x) >= 0.999 * peak)) if peak >= 0.5 else 0.0
    spec = np.abs(np.fft.rfft(x[: min(x.size, fs)])) ** 2
    freqs = np.fft.rfftfreq(min(x.size, fs), 1.0 / fs)
    centroid = float(np.sum(freqs * spec) / (np.sum(spec) + 1e-30))
    return {"snr_db": snr_db, "clip_frac": clip_frac, "centroid_hz": centroid}


def _mos_proxy(weights: tuple[float, float, float]) -> ScoreFn:
    snr_mid, snr_width, clip_penalty = weights

    def score(x: np.ndarray, fs: int) -> float:
        f = _signal_features(x, fs)
        value = 1.0 + 4.0 * _sigmoid((f["snr_db"] - snr_mid) / snr_width)
        return float(value - clip_penalty * f["clip_frac"])

    return score


def _squim_sdr_proxy(x: np.ndarray, fs: int) -> float:
    f = _signal_features(x, fs)
    return float(np.clip(f["snr_db"] - 5.0, -10.0, 40.0))


# Distinct coefficient sets keep the five proxies decorrelated enough to
# exercise multi-metric thresholds; they are stand-ins, not the published
# predictors, which is why the version string travels with every manifest.
_BUILTINS: dict[str, ScoreFn] = {
    "DNSMOS": _mos_proxy((12.0, 8.0, 2.0)),
    "NISQA": _mos_proxy((15.0, 10.0, 1.5)),
    "SIGMOS": _mos_proxy((10.0, 9.0, 2.5)),
    "UTMOS": _mos_proxy((18.0, 7.0, 1.0)),
    "SQUIM_SDR": _squim_sdr_proxy,
}


def builtin_metrics() -> list[tuple[str, str]]:
    return [(name, BUILTIN_VERSION) for name in sorted(_BUILTINS)]


def load_builtin(metric: str) -> LoadedScorer:
    if metric not in _BUILTINS:
        raise ValueError(f"no builtin scorer for {metric!r}")
    return LoadedScorer(metric=metric, version=BUILTIN_VERSION, score=_BUILTINS[metric])


def load_torchscript(metric: str, artifact_path: str, input_rate_hz: int | None) -> LoadedScorer:
    """Load a TorchScript predictor. Convention: the module maps a float32
    waveform tensor of shape (1, n) at input_rate_hz to a scalar (or 1-element)
    score tensor. Model load failures are fatal by design."""
    import torch  # heavyweight; imported only when an artifact is requested

    model = torch.jit.load(artifact_path, map_location="cpu")
    model.eval()
    digest = hashlib.sha256(open(artifact_path, "rb").read()).hexdigest()[:12]

    def score(x: np.ndarray, fs: int) -> float:
        wave = x
        if input_rate_hz is not None and fs != input_rate_hz:
            wave = resample_poly(wave, input_rate_hz, fs)
        with torch.no_grad():
            out = model(torch.as_tensor(wave, dtype=torch.float32).unsqueeze(0))
        return float(torch.as_tensor(out).reshape(-1).mean())

    return LoadedScorer(metric=metric, version=f"artifact:{digest}", score=score)
