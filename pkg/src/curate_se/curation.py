"""Two-stage corpus curation: threshold-based filtering, z-score ranking with
duration-budgeted selection, and the uniform-random baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .manifest import CurationConfig, ScoreRecord


@dataclass
class Violation:
    """One failed threshold: observed is None when the score was missing."""

    metric: str
    threshold: float
    observed: float | None

    def describe(self) -> str:
        if self.observed is None:
            return f"{self.metric} missing (threshold {self.threshold})"
        return f"{self.metric} {self.observed} < {self.threshold}"


@dataclass
class FilterOutcome:
    kept: list[ScoreRecord]
    rejected: list[tuple[ScoreRecord, list[Violation]]]
    excluded_dataset_count: int


@dataclass
class SubsetManifest:
    """A duration-budgeted selection with its provenance."""

    records: list[ScoreRecord]
    method: str  # "top_ranked" | "uniform_random"
    budget_hours: float
    achieved_hours: float
    seed: int | None = None
    ranking_metrics: list[str] = field(default_factory=list)
    pool_exhausted: bool = False

    def provenance(self, config_digest: str | None = None) -> dict:
        prov = {
            "method": self.method,
            "budget_hours": self.budget_hours,
            "achieved_hours": self.achieved_hours,
            "seed": self.seed,
            "ranking_metrics": self.ranking_metrics,
            "pool_exhausted": self.pool_exhausted,
        }
        if config_digest is not None:
            prov["config_digest"] = config_digest
        return prov


def threshold_filter(records: list[ScoreRecord], config: CurationConfig) -> FilterOutcome:
    """Gate records on their dataset's minimum-score row (Default row when the
    dataset has no row of its own). Dataset tags match case-insensitively.

    A record is kept iff every metric in its threshold row passes. Missing
    scores reject the record when config.strict_missing, and are skipped
    otherwise (the record is judged on the metrics it has).
    """
    config.validate()
    kept: list[ScoreRecord] = []
    rejected: list[tuple[ScoreRecord, list[Violation]]] = []
    excluded = 0
    for rec in records:
        if config.is_excluded(rec.dataset):
            excluded += 1
            continue
        row = config.threshold_row(rec.dataset)
        violations = []
        for metric, minimum in row.items():
            observed = rec.scores.get(metric)
            if observed is None:
                if config.strict_missing:
                    violations.append(Violation(metric, minimum, None))
                continue
            if observed < minimum:
                violations.append(Violation(metric, minimum, observed))
        if violations:
            rejected.append((rec, violations))
        else:
            kept.append(rec)
    return FilterOutcome(kept=kept, rejected=rejected, excluded_dataset_count=excluded)


DEGENERATE_STD = 1e-12


def normalize_scores(
    records: list[ScoreRecord], ranking_metrics: list[str]
) -> tuple[dict[str, dict[str, float]], int]:
    """Z-score each ranking metric over the given records (population std).

    Records missing any ranking metric are dropped and counted. A metric whose
    std collapses below 1e-12 normalizes to all zeros. Returns
    (utterance_id -> metric -> z, dropped_count).
    """
    usable = [r for r in records if all(m in r.scores for m in ranking_metrics)]
    dropped = len(records) - len(usable)
    if not usable:
        raise ValueError("no records carry all ranking metrics")
    values = np.array([[r.scores[m] for m in ranking_metrics] for r in usable], dtype=np.float64)
    mean = values.mean(axis=0)
    std = values.std(axis=0)  # population form
    z = np.where(std < DEGENERATE_STD, 0.0, (values - mean) / np.where(std < DEGENERATE_STD, 1.0, std))
    normalized = {
        rec.utterance_id: {m: float(z[i, j]) for j, m in enumerate(ranking_metrics)}
        for i, rec in enumerate(usable)
    }
    return normalized, dropped


def aggregate_overall(normalized: dict[str, dict[str, float]]) -> dict[str, float]:
    """Overall quality score: unweighted sum of the normalized metrics."""
    return {utt: float(sum(scores.values())) for utt, scores in normalized.items()}


def _take_until_budget(
    ordered: list[ScoreRecord], budget_hours: float
) -> tuple[list[ScoreRecord], float, bool]:
    taken: list[ScoreRecord] = []
    total = 0.0
    for rec in ordered:
        hours = rec.duration_s / 3600.0
        if total + hours > budget_hours:
            return taken, total, False
        taken.append(rec)
        total += hours
    return taken, total, budget_hours > total


def rank_and_select(
    records: list[ScoreRecord],
    overall: dict[str, float],
    budget_hours: float,
    ranking_metrics: list[str] | None = None,
) -> SubsetManifest:
    """Top-ranked subset: sort by overall score descending (ties broken by
    utterance_id ascending) and accumulate until the next record would
    overshoot the budget. Never overshoots; pool_exhausted flags a budget
    larger than the available pool."""
    missing = [r.utterance_id for r in records if r.utterance_id not in overall]
    if missing:
        raise ValueError(f"records without an overall score: {missing[:3]}...")
    ordered = sorted(records, key=lambda r: (-overall[r.utterance_id], r.utterance_id))
    taken, achieved, exhausted = _take_until_budget(ordered, budget_hours)
    return SubsetManifest(
        records=taken,
        method="top_ranked",
        budget_hours=budget_hours,
        achieved_hours=achieved,
        ranking_metrics=list(ranking_metrics or []),
        pool_exhausted=exhausted,
    )


def uniform_sample(records: list[ScoreRecord], budget_hours: float, seed: int) -> SubsetManifest:
    """Uniform-random subset of the same budget semantics as rank_and_select.

    Records are sorted by utterance_id, then shuffled by an explicit
    Fisher-Yates over a PCG64 stream, so published subsets are reproducible
    byte-for-byte for a given (records, budget, seed).
    """
    ordered = sorted(records, key=lambda r: r.utterance_id)
    rng = np.random.Generator(np.random.PCG64(seed))
    for i in range(len(ordered) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        ordered[i], ordered[j] = ordered[j], ordered[i]
    taken, achieved, exhausted = _take_until_budget(ordered, budget_hours)
    return SubsetManifest(
        records=taken,
        method="uniform_random",
        budget_hours=budget_hours,
        achieved_hours=achieved,
        seed=seed,
        pool_exhausted=exhausted,
    )


def summarize_by_dataset(records: list[ScoreRecord]) -> dict[str, float]:
    """Total hours per dataset tag."""
    seconds: dict[str, float] = {}
    for rec in records:
        seconds[rec.dataset] = seconds.get(rec.dataset, 0.0) + rec.duration_s
    return {tag: total / 3600.0 for tag, total in seconds.items()}


def select_top_ranked(
    records: list[ScoreRecord], config: CurationConfig, budget_hours: float | None = None
) -> SubsetManifest:
    """Full stage-2 pipeline: filter, normalize over the kept pool, rank, select."""
    outcome = threshold_filter(records, config)
    normalized, _ = normalize_scores(outcome.kept, config.ranking_metrics)
    overall = aggregate_overall(normalized)
    budget = config.budget_hours if budget_hours is None else budget_hours
    return rank_and_select(outcome.kept, overall, budget, config.ranking_metrics)
