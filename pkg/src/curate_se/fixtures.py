"""Synthetic fixtures: score manifests with controllable pass rates, the
published threshold table as a config file, and small audio corpora
(speech-like files, noises, RIRs) for pipeline tests."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import TBF_METRICS
from .audio_io import AudioBuffer, write_wav
from .manifest import ScoreRecord

THRESHOLD_TABLE = {
    "Default": {"DNSMOS": 3.0, "SIGMOS": 3.0, "UTMOS": 3.0, "NISQA": 4.0, "SQUIM_SDR": 20.0},
    "EARS": {"DNSMOS": 2.5, "SIGMOS": 2.5, "UTMOS": 2.5, "NISQA": 3.0, "SQUIM_SDR": 0.0},
    "commonvoice_zh": {"DNSMOS": 3.0, "SIGMOS": 3.0, "UTMOS": 3.0, "NISQA": 4.0, "SQUIM_SDR": 0.0},
}


def write_threshold_config(
    path,
    budget_hours: float = 700.0,
    seed: int = 0,
    excluded_datasets: tuple[str, ...] = ("wsj",),
    strict_missing: bool = False,
    ranking_metrics: tuple[str, ...] = TBF_METRICS,
) -> Path:
    """Write a TOML curation config carrying the published threshold table."""
    lines = []
    for dataset, row in THRESHOLD_TABLE.items():
        lines.append(f'[thresholds."{dataset}"]')
        for metric, value in row.items():
            lines.append(f"{metric} = {value}")
        lines.append("")
    lines.append("[ranking]")
    for metric in ranking_metrics:
        lines.append(f"{metric} = true")
    lines.append("")
    lines.append("[selection]")
    lines.append(f"budget_hours = {budget_hours}")
    lines.append(f"seed = {seed}")
    excluded = ", ".join(f'"{d}"' for d in excluded_datasets)
    lines.append(f"excluded_datasets = [{excluded}]")
    lines.append(f"strict_missing = {str(strict_missing).lower()}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def make_score_manifest(
    n: int,
    seed: int = 0,
    datasets: tuple[str, ...] = ("vctk", "ears", "commonvoice_zh", "librivox", "wsj"),
    metrics: tuple[str, ...] = TBF_METRICS,
) -> list[ScoreRecord]:
    """Randomized score records spanning the threshold boundaries.

    MOS-family metrics draw from [1, 5] and SQUIM_SDR from [-10, 40], so both
    sides of every published threshold are well populated.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    for i in range(n):
        dataset = datasets[int(rng.integers(0, len(datasets)))]
        scores = {}
        for metric in metrics:
            if metric == "SQUIM_SDR":
                scores[metric] = float(np.round(rng.uniform(-10.0, 40.0), 4))
            else:
                scores[metric] = float(np.round(rng.uniform(1.0, 5.0), 4))
        records.append(
            ScoreRecord(
                utterance_id=f"utt-{i:06d}",
                path=f"audio/utt-{i:06d}.wav",
                dataset=dataset,
                duration_s=float(np.round(rng.uniform(2.0, 15.0), 3)),
                sample_rate_hz=16000,
                scores=scores,
            )
        )
    return records


# Published per-dataset durations (hours): full pool -> kept after filtering.
PAPER_DURATIONS = {
    "librivox_dns5": (350, 150),
    "libritts": (200, 109),
    "vctk": (80, 44),
    "ears": (107, 16),
    "mls_hq": (450, 129),
    "commonvoice_zh": (1300, 250),
    "wsj": (85, 0),  # excluded outright
}

_FIXTURE_UTT_SECONDS = 360.0  # 0.1 h per record keeps fixtures small and sums exact


def make_duration_fixture(
    durations: dict[str, tuple[int, int]] | None = None, seed: int = 0
) -> list[ScoreRecord]:
    """Manifest whose per-dataset totals and kept totals are exact by
    construction: each record is 0.1 h; kept records score above their
    dataset's thresholds, the rest fail at least one metric."""
    durations = PAPER_DURATIONS if durations is None else durations
    rng = np.random.Generator(np.random.PCG64(seed))
    records = []
    for dataset, (full_h, kept_h) in durations.items():
        row = THRESHOLD_TABLE.get(
            {"ears": "EARS", "commonvoice_zh": "commonvoice_zh"}.get(dataset, "Default"),
            THRESHOLD_TABLE["Default"],
        )
        n_full = int(round(full_h / 0.1))
        n_kept = int(round(kept_h / 0.1))
        for i in range(n_full):
            passing = i < n_kept
            scores = {}
            for metric in TBF_METRICS:
                minimum = row[metric]
                if passing:
                    scores[metric] = float(np.round(minimum + rng.uniform(0.05, 1.0), 4))
                else:
                    scores[metric] = float(np.round(minimum - rng.uniform(0.05, 1.0), 4))
            records.append(
                ScoreRecord(
                    utterance_id=f"{dataset}-{i:06d}",
                    path=f"audio/{dataset}-{i:06d}.wav",
                    dataset=dataset,
                    duration_s=_FIXTURE_UTT_SECONDS,
                    sample_rate_hz=16000,
                    scores=scores,
                )
            )
    return records


def _speech_like(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    """Modulated noise with a rough spectral tilt: enough structure for the
    intrusive metrics without shipping real recordings."""
    t = np.arange(n) / fs
    syllable = 0.25 + 0.75 * 0.5 * (1.0 + np.sin(2.0 * math.pi * rng.uniform(2.0, 6.0) * t))
    carrier = rng.standard_normal(n)
    alpha = 0.15  # one-pole lowpass tilt toward a speech-ish spectrum
    tilted = lfilter([alpha], [1.0, alpha - 1.0], carrier)
    tilted += 0.15 * np.sin(2.0 * math.pi * rng.uniform(100.0, 250.0) * t)
    out = syllable * tilted
    return 0.3 * out / np.max(np.abs(out))


def make_audio_corpus(
    out_dir,
    n_speech: int = 20,
    n_noise: int = 4,
    n_rir: int = 3,
    sample_rate_hz: int = 16000,
    duration_s: float = 1.5,
    seed: int = 0,
) -> tuple[list[ScoreRecord], list[str], list[str]]:
    """Write a small corpus of speech-like WAVs plus noises and RIRs.

    Returns (speech records with plausible scores, noise paths, rir paths).
    """
    out_dir = Path(out_dir)
    (out_dir / "speech").mkdir(parents=True, exist_ok=True)
    (out_dir / "noise").mkdir(exist_ok=True)
    (out_dir / "rir").mkdir(exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    fs = sample_rate_hz
    n = int(duration_s * fs)

    records = []
    for i in range(n_speech):
        x = _speech_like(n, fs, rng)
        path = out_dir / "speech" / f"spk-{i:04d}.wav"
        write_wav(AudioBuffer(x, fs), path, encoding="float32")
        # mostly-good corpus with a defective minority; scores correlate
        # within an utterance the way real quality predictors do
        good = rng.random() < 0.7
        scores = {}
        for metric in TBF_METRICS:
            if metric == "SQUIM_SDR":
                lo, hi = (21.0, 40.0) if good else (-10.0, 19.0)
            elif metric == "NISQA":
                lo, hi = (4.05, 5.0) if good else (1.0, 3.9)
            else:
                lo, hi = (3.05, 5.0) if good else (1.0, 2.9)
            scores[metric] = float(np.round(rng.uniform(lo, hi), 4))
        records.append(
            ScoreRecord(
                utterance_id=f"spk-{i:04d}",
                path=str(path),
                dataset="vctk",
                duration_s=n / fs,
                sample_rate_hz=fs,
                scores=scores,
            )
        )

    noise_paths = []
    for i in range(n_noise):
        x = rng.standard_normal(n) * rng.uniform(0.05, 0.2)
        path = out_dir / "noise" / f"noise-{i:04d}.wav"
        write_wav(AudioBuffer(x, fs), path, encoding="float32")
        noise_paths.append(str(path))

    rir_paths = []
    for i in range(n_rir):
        length = int(0.25 * fs)
        direct = int(rng.integers(8, int(0.01 * fs)))
        taps = rng.standard_normal(length) * np.exp(-np.arange(length) / (0.05 * fs))
        taps *= 0.3
        taps[:direct] = 0.0
        taps[direct] = 1.0
        path = out_dir / "rir" / f"rir-{i:04d}.wav"
        write_wav(AudioBuffer(taps, fs), path, encoding="float32")
        rir_paths.append(str(path))

    return records, noise_paths, rir_paths
