import numpy as np
import pytest

from curate_se.curation import threshold_filter
from curate_se.fixtures import THRESHOLD_TABLE, make_score_manifest
from curate_se.manifest import CurationConfig, ScoreRecord
from curate_se.report import (
    compare_distributions,
    histogram,
    histogram_svg,
    rows_to_csv,
    scaling_svg,
    scaling_table,
)


def _records(values, metric="M"):
    return [
        ScoreRecord(
            utterance_id=f"u{i}",
            path=f"u{i}.wav",
            dataset="vctk",
            duration_s=1.0,
            sample_rate_hz=16000,
            scores={metric: float(v)},
        )
        for i, v in enumerate(values)
    ]


def test_histogram_hand_count():
    hist = histogram(_records([1, 2, 3, 4]), "M", bins=2)
    assert hist.counts == [2, 2]
    assert hist.median == 2.5
    assert hist.n == 4
    assert hist.edges[0] == 1.0 and hist.edges[-1] == 4.0


def test_histogram_single_value():
    hist = histogram(_records([2.5] * 7), "M", bins=4)
    assert sum(hist.counts) == 7
    assert max(hist.counts) == 7  # one bin holds all
    assert hist.std == 0.0
    assert all(b > a for a, b in zip(hist.edges, hist.edges[1:]))


def test_histogram_median_matches_sort_oracle(rng):
    for _ in range(10):
        values = rng.uniform(0, 10, size=41)  # odd n
        exact = float(np.sort(values)[20])
        hist = histogram(_records(values), "M", bins=15)
        assert hist.median == exact
        assert sum(hist.counts) == 41


def test_histogram_interior_edge_goes_right():
    # edges at [0, 1, 2]; the value 1.0 lands in the right bin
    hist = histogram(_records([0.0, 1.0, 2.0]), "M", bins=2)
    assert hist.counts == [1, 2]


def test_histogram_missing_metric():
    with pytest.raises(ValueError, match="absent"):
        histogram(_records([1.0]), "NOPE")


def test_compare_identity_deltas_zero():
    records = _records([1, 2, 3])
    rows = compare_distributions(records, records, ["M"])
    assert rows[0]["delta"] == 0.0


def test_compare_single_metric_filter_never_negative():
    config = CurationConfig(
        thresholds={"Default": {"M": 5.0}}, ranking_metrics=["M"], budget_hours=1.0
    )
    records = _records(np.linspace(0, 10, 101))
    kept = threshold_filter(records, config).kept
    rows = compare_distributions(records, kept, ["M"])
    assert rows[0]["delta"] >= 0.0


def test_compare_correlated_fixture_all_deltas_non_negative():
    # good/bad mixture: all five metrics improve together after filtering
    rng = np.random.default_rng(77)
    metrics = list(THRESHOLD_TABLE["Default"])
    records = []
    for i in range(400):
        good = rng.random() < 0.6
        scores = {}
        for m in metrics:
            base = THRESHOLD_TABLE["Default"][m]
            scores[m] = base + rng.uniform(0.01, 1.0) if good else base - rng.uniform(0.01, 1.0)
        records.append(
            ScoreRecord(
                utterance_id=f"u{i}",
                path=f"u{i}.wav",
                dataset="vctk",
                duration_s=2.0,
                sample_rate_hz=16000,
                scores=scores,
            )
        )
    config = CurationConfig(
        thresholds={"Default": dict(THRESHOLD_TABLE["Default"])},
        ranking_metrics=metrics,
        budget_hours=1.0,
    )
    kept = threshold_filter(records, config).kept
    rows = compare_distributions(records, kept, metrics, threshold_metrics=set(metrics))
    assert len(rows) == 5
    assert all(row["delta"] >= 0.0 for row in rows)
    assert all(row["used_in_thresholds"] for row in rows)


def test_compare_flags_non_threshold_metrics():
    records = make_score_manifest(50, seed=1, metrics=("DNSMOS", "VQSCORE"))
    rows = compare_distributions(records, records, ["DNSMOS", "VQSCORE"], {"DNSMOS"})
    flags = {row["metric"]: row["used_in_thresholds"] for row in rows}
    assert flags == {"DNSMOS": True, "VQSCORE": False}


def test_compare_empty_fails():
    with pytest.raises(ValueError):
        compare_distributions([], _records([1.0]), ["M"])


def test_scaling_exact_means():
    groups = {
        (1.0, "top"): [{"sdr_db": 10.0}, {"sdr_db": 14.0}],
        (1.0, "uniform"): [{"sdr_db": 8.0}],
    }
    table = scaling_table(groups, ["sdr_db"])
    by_method = {row["method"]: row for row in table["rows"]}
    assert by_method["top"]["sdr_db"] == 12.0
    assert by_method["uniform"]["sdr_db"] == 8.0


def test_scaling_single_group():
    table = scaling_table({(2.0, "top"): [{"x": 1.0}]}, ["x"])
    assert len(table["rows"]) == 1


def test_scaling_series_strictly_increasing():
    groups = {
        (1.0, "top"): [{"x": 1.0}],
        (3.5, "top"): [{"x": 2.0}],
        (7.0, "top"): [{"x": 3.0}],
        (1.0, "uniform"): [{"x": 0.5}],
    }
    table = scaling_table(groups, ["x"])
    hours = [p["size_hours"] for p in table["series"]["top"]]
    assert hours == [1.0, 3.5, 7.0]


def test_scaling_empty_group_fails():
    with pytest.raises(ValueError):
        scaling_table({(1.0, "top"): []}, ["x"])


def test_csv_and_svg_render():
    rows = [{"a": 1, "b": 2.5}, {"a": 3, "b": 4.5}]
    text = rows_to_csv(rows, ["a", "b"])
    assert text.splitlines() == ["a,b", "1,2.5", "3,4.5"]
    hist = histogram(_records([1, 2, 3, 4, 5]), "M", bins=3)
    svg = histogram_svg(hist)
    assert svg.startswith("<svg") and "</svg>" in svg
    table = scaling_table(
        {(1.0, "top"): [{"x": 1.0}], (2.0, "top"): [{"x": 2.0}], (1.0, "uniform"): [{"x": 0.4}]},
        ["x"],
    )
    svg2 = scaling_svg(table, "x")
    assert svg2.count("<polyline") == 2  # one line per method
