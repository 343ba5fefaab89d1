"""Score-manifest and curation-config wire formats (JSON Lines + TOML)."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from typing import IO, Iterable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import SUPPORTED_SAMPLE_RATES

RECORD_KEYS = ("utterance_id", "path", "dataset", "duration_s", "sample_rate_hz", "scores")


class ManifestError(ValueError):
    """Malformed manifest content; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigError(ValueError):
    pass


@dataclass
class ScoreRecord:
    """One utterance of a score manifest: identity, provenance and quality scores."""

    utterance_id: str
    path: str
    dataset: str
    duration_s: float
    sample_rate_hz: int
    scores: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.utterance_id:
            raise ManifestError("empty utterance_id")
        if not (isinstance(self.duration_s, (int, float)) and self.duration_s > 0):
            raise ManifestError(f"duration_s must be > 0, got {self.duration_s!r}")
        if self.sample_rate_hz not in SUPPORTED_SAMPLE_RATES:
            raise ManifestError(f"unknown sample rate {self.sample_rate_hz!r}")
        if not isinstance(self.scores, dict):
            raise ManifestError("scores must be a mapping")
        for name, value in self.scores.items():
            if not isinstance(name, str) or not name:
                raise ManifestError(f"bad metric name {name!r}")
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ManifestError(f"non-finite score {name}={value!r}")


@dataclass
class ParseResult:
    """Outcome of parsing one manifest stream."""

    records: list[ScoreRecord]
    duplicates_dropped: int = 0
    provenance: dict | None = None


def _record_from_obj(obj: dict, line: int) -> ScoreRecord:
    missing = [k for k in RECORD_KEYS if k not in obj]
    if missing:
        raise ManifestError(f"missing keys {missing}", line)
    rec = ScoreRecord(
        utterance_id=obj["utterance_id"],
        path=obj["path"],
        dataset=obj["dataset"],
        duration_s=float(obj["duration_s"]),
        sample_rate_hz=int(obj["sample_rate_hz"]),
        scores={str(k): float(v) for k, v in obj["scores"].items()},
    )
    try:
        rec.validate()
    except ManifestError as exc:
        raise ManifestError(str(exc), line) from None
    return rec


def parse_score_manifest(stream: IO[str] | Iterable[str], strict: bool = False) -> ParseResult:
    """Parse a JSON Lines score manifest in file order.

    A leading ``{"provenance": ...}`` header line (as written by subset
    selection) is captured separately, not turned into a record. Duplicate
    utterance_ids fail the whole parse in strict mode; otherwise the first
    occurrence wins and the drop is counted.
    """
    records: list[ScoreRecord] = []
    seen: set[str] = set()
    duplicates = 0
    provenance = None
    for line_no, raw in enumerate(stream, start=1):
        raw = raw.strip()
        if not raw:
            raise ManifestError("blank line", line_no)
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"invalid JSON ({exc.msg})", line_no) from None
        if not isinstance(obj, dict):
            raise ManifestError("line is not a JSON object", line_no)
        if set(obj.keys()) == {"provenance"}:
            if provenance is None:
                provenance = obj["provenance"]
            continue
        rec = _record_from_obj(obj, line_no)
        if rec.utterance_id in seen:
            if strict:
                raise ManifestError(f"duplicate utterance_id {rec.utterance_id!r}", line_no)
            duplicates += 1
            continue
        seen.add(rec.utterance_id)
        records.append(rec)
    return ParseResult(records=records, duplicates_dropped=duplicates, provenance=provenance)


def record_to_json(rec: ScoreRecord) -> str:
    # Fixed key order and sorted score keys keep output byte-stable.
    obj = {
        "utterance_id": rec.utterance_id,
        "path": rec.path,
        "dataset": rec.dataset,
        "duration_s": rec.duration_s,
        "sample_rate_hz": rec.sample_rate_hz,
        "scores": {k: rec.scores[k] for k in sorted(rec.scores)},
    }
    return json.dumps(obj, separators=(",", ":"))


def write_score_manifest(
    records: Iterable[ScoreRecord], stream: IO[str], provenance: dict | None = None
) -> int:
    """Write records as JSON Lines; returns the number of bytes written."""
    total = 0
    if provenance is not None:
        header = json.dumps({"provenance": provenance}, separators=(",", ":"), sort_keys=True)
        total += stream.write(header + "\n")
    for rec in records:
        rec.validate()
        total += stream.write(record_to_json(rec) + "\n")
    return total


@dataclass
class CurationConfig:
    """Thresholds, ranking metrics and selection parameters for curation."""

    thresholds: dict[str, dict[str, float]]
    ranking_metrics: list[str]
    budget_hours: float
    seed: int = 0
    excluded_datasets: set[str] = field(default_factory=set)
    strict_missing: bool = False

    def __post_init__(self):
        self._rows_by_key = {name.casefold(): row for name, row in self.thresholds.items()}
        self._excluded_keys = {tag.casefold() for tag in self.excluded_datasets}

    def validate(self) -> None:
        if "default" not in self._rows_by_key:
            raise ConfigError("thresholds must contain a Default row")
        for name, row in self.thresholds.items():
            for metric, value in row.items():
                if not (isinstance(value, (int, float)) and math.isfinite(value)):
                    raise ConfigError(f"threshold {name}/{metric} is not finite: {value!r}")
        if not self.ranking_metrics:
            raise ConfigError("ranking_metrics must not be empty")
        if not self.budget_hours > 0:
            raise ConfigError(f"budget_hours must be > 0, got {self.budget_hours!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def threshold_row(self, dataset: str) -> dict[str, float]:
        """Threshold row for a dataset tag (case-insensitive), falling back to Default."""
        row = self._rows_by_key.get(dataset.casefold())
        return row if row is not None else self._rows_by_key["default"]

    def is_excluded(self, dataset: str) -> bool:
        return dataset.casefold() in self._excluded_keys


_SELECTION_KEYS = {"budget_hours", "seed", "excluded_datasets", "strict_missing"}


def load_curation_config(path) -> CurationConfig:
    """Load and validate a TOML curation config.

    Sections: ``[thresholds.<dataset>]`` / ``[thresholds.Default]`` with metric
    names as keys, ``[ranking]`` mapping metric name -> bool (file order gives
    the ranking order), ``[selection]`` with budget_hours, seed,
    excluded_datasets, strict_missing. Unknown keys are rejected.
    """
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    unknown = set(data) - {"thresholds", "ranking", "selection"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    thresholds_raw = data.get("thresholds")
    if not isinstance(thresholds_raw, dict) or not thresholds_raw:
        raise ConfigError("missing [thresholds.*] sections")
    thresholds: dict[str, dict[str, float]] = {}
    for name, row in thresholds_raw.items():
        if not isinstance(row, dict):
            raise ConfigError(f"[thresholds.{name}] must be a table")
        thresholds[name] = {m: float(v) for m, v in row.items()}

    ranking_raw = data.get("ranking", {})
    if not isinstance(ranking_raw, dict):
        raise ConfigError("[ranking] must be a table of metric = bool")
    ranking_metrics = []
    for metric, enabled in ranking_raw.items():
        if not isinstance(enabled, bool):
            raise ConfigError(f"[ranking] {metric} must be a boolean")
        if enabled:
            ranking_metrics.append(metric)

    selection = data.get("selection", {})
    unknown = set(selection) - _SELECTION_KEYS
    if unknown:
        raise ConfigError(f"unknown [selection] keys: {sorted(unknown)}")
    if "budget_hours" not in selection:
        raise ConfigError("[selection] requires budget_hours")

    config = CurationConfig(
        thresholds=thresholds,
        ranking_metrics=ranking_metrics,
        budget_hours=float(selection["budget_hours"]),
        seed=int(selection.get("seed", 0)),
        excluded_datasets=set(selection.get("excluded_datasets", [])),
        strict_missing=bool(selection.get("strict_missing", False)),
    )
    config.validate()
    return config
