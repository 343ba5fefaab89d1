"""Directory scoring: run the configured predictors over WAV files and emit
one manifest row per file in the curate-se JSON Lines schema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import CANONICAL_METRICS, MOS_METRICS, SUPPORTED_SAMPLE_RATES
from .scorers import LoadedScorer, builtin_metrics, load_builtin, load_torchscript
from .wav import read_wav_mono


@dataclass
class ScorerSpec:
    """One requested predictor: canonical metric name plus model source."""

    metric: str
    artifact: str | None = None  # path to a TorchScript file; None = builtin
    input_rate_hz: int | None = None
    batch_size: int = 8

    def validate(self) -> None:
        if self.metric not in CANONICAL_METRICS:
            raise ValueError(
                f"metric {self.metric!r} is not canonical; expected one of {CANONICAL_METRICS}"
            )
        if self.input_rate_hz is not None and self.input_rate_hz not in SUPPORTED_SAMPLE_RATES:
            raise ValueError(f"unsupported input rate {self.input_rate_hz!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def load(self) -> LoadedScorer:
        if self.artifact is None:
            return load_builtin(self.metric)
        return load_torchscript(self.metric, self.artifact, self.input_rate_hz)


@dataclass
class ScoreSummary:
    scored: int
    skipped: list[tuple[str, str]]  # (path, reason)
    scorer_versions: dict[str, str]


def list_metrics(scorers: list[ScorerSpec] | None = None) -> list[tuple[str, str]]:
    """Available metric names and versions, deterministically ordered."""
    if scorers is None:
        return builtin_metrics()
    listed = []
    for spec in sorted(scorers, key=lambda s: s.metric):
        spec.validate()
        listed.append((spec.metric, spec.load().version))
    return listed


def _clamp_mos(metric: str, value: float) -> float:
    if metric in MOS_METRICS:
        return min(max(value, 1.0), 5.0)
    return value


def score_directory(audio_dir, scorers: list[ScorerSpec], out_manifest, dataset: str = "unscored") -> ScoreSummary:
    """Score every WAV in audio_dir with every requested predictor.

    Runs one model at a time over the whole file list (batched in chunks of
    the spec's batch_size), then writes the manifest sequentially with a
    provenance header carrying the scorer versions. Files any model cannot
    process are dropped from the output and listed in the skip report.
    """
    for spec in scorers:
        spec.validate()
    files = sorted(str(p) for p in Path(audio_dir).glob("*.wav"))

    loaded = [spec.load() for spec in scorers]  # load failure is fatal
    versions = {scorer.metric: scorer.version for scorer in loaded}

    audio: dict[str, tuple] = {}
    skipped: list[tuple[str, str]] = []
    for path in files:
        try:
            audio[path] = read_wav_mono(path)
        except ValueError as exc:
            skipped.append((path, str(exc)))

    scores: dict[str, dict[str, float]] = {path: {} for path in audio}
    for spec, scorer in zip(scorers, loaded):
        paths = [p for p in files if p in audio]
        for start in range(0, len(paths), spec.batch_size):
            for path in paths[start : start + spec.batch_size]:
                samples, rate = audio[path]
                try:
                    raw = scorer.score(samples, rate)
                except Exception as exc:  # per-file inference failure: skip
                    skipped.append((path, f"{scorer.metric}: {exc}"))
                    audio.pop(path, None)
                    scores.pop(path, None)
                    continue
                scores[path][scorer.metric] = _clamp_mos(scorer.metric, raw)

    rows = 0
    with open(out_manifest, "w", encoding="utf-8") as fh:
        header = {"provenance": {"scorer_versions": versions, "tool": "scorer-adapter"}}
        fh.write(json.dumps(header, separators=(",", ":"), sort_keys=True) + "\n")
        for path in files:
            if path not in scores:
                continue
            samples, rate = audio[path]
            row = {
                "utterance_id": Path(path).stem,
                "path": path,
                "dataset": dataset,
                "duration_s": samples.size / rate,
                "sample_rate_hz": rate,
                "scores": {k: scores[path][k] for k in sorted(scores[path])},
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
            rows += 1
    return ScoreSummary(scored=rows, skipped=skipped, scorer_versions=versions)
