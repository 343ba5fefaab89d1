"""Acceptance suite: one test per release criterion, each at its stated
tolerance. Run with `pytest tests/test_acceptance.py -v -s` to see one
pass/fail line per criterion."""

import json
import math
import time

import numpy as np
import pytest

from conftest import sine, steady_rms
from curate_se.audio_io import AudioBuffer, _highpass_taps, highpass_75
from curate_se.cli import EXIT_OK, main
from curate_se.curation import (
    aggregate_overall,
    normalize_scores,
    rank_and_select,
    summarize_by_dataset,
    threshold_filter,
)
from curate_se.degrade import mix_additive_noise
from curate_se.fixtures import (
    PAPER_DURATIONS,
    make_audio_corpus,
    make_duration_fixture,
    make_score_manifest,
    write_threshold_config,
)
from curate_se.manifest import (
    CurationConfig,
    ScoreRecord,
    load_curation_config,
    parse_score_manifest,
    write_score_manifest,
)
from curate_se.metrics import estoi, lsd, measured_snr, si_sdr
from test_curation import brute_force_filter

TBF = ("DNSMOS", "SIGMOS", "UTMOS", "NISQA", "SQUIM_SDR")


def _pass(name: str) -> None:
    print(f"[PASS] {name}")


def _paper_config(tmp_path) -> CurationConfig:
    return load_curation_config(write_threshold_config(tmp_path / "paper.toml"))


def test_filter_oracle_equivalence(tmp_path):
    """10,000 random rows, published thresholds: exact match with the
    brute-force oracle, filter runtime under one second."""
    records = make_score_manifest(10_000, seed=2024)
    config = _paper_config(tmp_path)
    started = time.perf_counter()
    outcome = threshold_filter(records, config)
    elapsed = time.perf_counter() - started

    kept_ids, rejected, n_excluded = brute_force_filter(records, config)
    assert [r.utterance_id for r in outcome.kept] == kept_ids
    assert {
        r.utterance_id: sorted(v.metric for v in vs) for r, vs in outcome.rejected
    } == rejected
    assert outcome.excluded_dataset_count == n_excluded
    assert len(outcome.kept) + len(outcome.rejected) + n_excluded == len(records)
    assert elapsed < 1.0, f"threshold_filter took {elapsed:.3f} s"
    _pass(f"filter-oracle equivalence on 10k rows ({elapsed * 1000:.0f} ms)")


def test_single_metric_median_property():
    """Filtering on one metric never decreases that metric's median,
    over 100 random manifests, compared exactly."""
    config = CurationConfig(
        thresholds={"Default": {"DNSMOS": 3.0}}, ranking_metrics=["DNSMOS"], budget_hours=1.0
    )
    checked = 0
    for seed in range(100):
        records = make_score_manifest(120, seed=seed, metrics=("DNSMOS",))
        kept = threshold_filter(records, config).kept
        if not kept:
            continue
        before = float(np.median([r.scores["DNSMOS"] for r in records]))
        after = float(np.median([r.scores["DNSMOS"] for r in kept]))
        assert after >= before
        checked += 1
    assert checked >= 99
    _pass(f"single-metric median property over {checked} manifests")


def test_subset_nesting():
    """Top-ranked subsets nest: S(1h) subset of S(3.5h) subset of S(7h) over
    1,000 synthetic records."""
    rng = np.random.default_rng(42)
    records = []
    for i in range(1000):
        records.append(
            ScoreRecord(
                utterance_id=f"n-{i:05d}",
                path=f"n-{i:05d}.wav",
                dataset="vctk",
                duration_s=float(rng.uniform(18.0, 36.0)),
                sample_rate_hz=16000,
                scores={m: float(rng.uniform(1.0, 5.0)) for m in TBF},
            )
        )
    normalized, _ = normalize_scores(records, list(TBF))
    overall = aggregate_overall(normalized)
    subsets = {
        budget: {r.utterance_id for r in rank_and_select(records, overall, budget).records}
        for budget in (1.0, 3.5, 7.0)
    }
    assert subsets[1.0] <= subsets[3.5] <= subsets[7.0]
    assert subsets[1.0] and len(subsets[7.0]) > len(subsets[1.0])
    _pass("subset nesting 1h/3.5h/7h")


def test_normalization_moments(tmp_path):
    """Per-metric |mean| <= 1e-9 and |std - 1| <= 1e-9 over the kept pool;
    a constant metric normalizes to all zeros."""
    records = make_score_manifest(10_000, seed=77)
    config = _paper_config(tmp_path)
    kept = threshold_filter(records, config).kept
    normalized, _ = normalize_scores(kept, list(TBF))
    for metric in TBF:
        values = np.array([normalized[r.utterance_id][metric] for r in kept])
        assert abs(values.mean()) <= 1e-9
        assert abs(values.std() - 1.0) <= 1e-9
    constant = [
        ScoreRecord(
            utterance_id=f"c{i}",
            path="c.wav",
            dataset="vctk",
            duration_s=1.0,
            sample_rate_hz=16000,
            scores={"M": 2.5, "K": float(i)},
        )
        for i in range(10)
    ]
    norm_const, _ = normalize_scores(constant, ["M", "K"])
    assert all(norm_const[f"c{i}"]["M"] == 0.0 for i in range(10))
    _pass("z-score normalization moments and degenerate-metric rule")


def test_mixing_accuracy():
    """Requested vs measured SNR within 0.01 dB over 50 random triples."""
    rng = np.random.default_rng(7)
    fs = 16000
    for _ in range(50):
        speech = AudioBuffer(rng.standard_normal(fs) * rng.uniform(0.05, 0.5), fs)
        noise = AudioBuffer(rng.standard_normal(fs + 321) * rng.uniform(0.05, 0.5), fs)
        requested = float(rng.uniform(-5.0, 20.0))
        mixed = mix_additive_noise(speech, noise, requested)
        component = AudioBuffer(mixed.samples - speech.samples, fs)
        assert measured_snr(speech, component) == pytest.approx(requested, abs=0.01)
    _pass("mixing accuracy 0.01 dB over 50 triples")


def test_metric_correctness():
    """si_sdr hand case and scale invariance; lsd identity and 2x case;
    estoi identity and strict SNR monotonicity."""
    r = AudioBuffer(np.array([1.0, 0.0]), 16000)
    e = AudioBuffer(np.array([1.0, 0.1]), 16000)
    assert si_sdr(r, e) == pytest.approx(20.0, abs=1e-6)

    rng = np.random.default_rng(3)
    ref = AudioBuffer(rng.standard_normal(16000), 16000)
    est = AudioBuffer(ref.samples + 0.2 * rng.standard_normal(16000), 16000)
    base = si_sdr(ref, est)
    for alpha in (0.1, 3.7):
        assert si_sdr(ref, AudioBuffer(alpha * est.samples, 16000)) == pytest.approx(
            base, abs=1e-6
        )

    speechy = AudioBuffer(
        (0.5 * (1 + np.sin(2 * np.pi * 4 * np.arange(48000) / 16000)))
        * rng.standard_normal(48000),
        16000,
    )
    assert lsd(speechy, speechy) == 0.0
    doubled = AudioBuffer(2.0 * speechy.samples, 16000)
    assert lsd(speechy, doubled) == pytest.approx(10 * math.log10(4.0), abs=1e-3)

    assert estoi(speechy, speechy) == pytest.approx(1.0, abs=1e-6)
    noise = rng.standard_normal(speechy.samples.size)
    values = []
    for snr_db in (20, 10, 0, -10):
        gain = np.sqrt(np.sum(speechy.samples**2) / np.sum(noise**2) / 10 ** (snr_db / 10))
        values.append(estoi(speechy, AudioBuffer(speechy.samples + gain * noise, 16000)))
    assert all(a > b for a, b in zip(values, values[1:]))
    _pass("metric correctness (si_sdr, lsd, estoi)")


def test_highpass_specification():
    """>= 60 dB attenuation at 10 Hz and <= 1 dB deviation at 1 kHz,
    measured on steady-state 48 kHz test tones."""
    fs = 48000
    margin = (_highpass_taps(fs).size - 1) // 2
    tone10 = sine(10, fs, seconds=2.0)
    out10 = highpass_75(tone10)
    atten = 20 * np.log10(
        steady_rms(out10.samples, margin) / steady_rms(tone10.samples, margin)
    )
    assert atten <= -60.0
    tone1k = sine(1000, fs, seconds=2.0)
    out1k = highpass_75(tone1k)
    dev = 20 * np.log10(steady_rms(out1k.samples, margin) / steady_rms(tone1k.samples, margin))
    assert abs(dev) <= 1.0
    _pass(f"high-pass spec (10 Hz: {atten:.1f} dB, 1 kHz: {dev:+.3f} dB)")


def _run_simulation(out_dir, speech, noise, rir, workers):
    code = main(
        ["simulate", "--speech-manifest", str(speech), "--noise-manifest", str(noise),
         "--rir-manifest", str(rir), "--seed", "1234", "--workers", str(workers),
         "--out-dir", str(out_dir)]
    )
    assert code == EXIT_OK
    pairs = (out_dir / "pairs.jsonl").read_text().replace(str(out_dir), "")
    wavs = {p.name: p.read_bytes() for p in sorted((out_dir / "audio").iterdir())}
    return pairs, wavs


def test_simulation_determinism(tmp_path):
    """Full simulate over a 20-file fixture: byte-identical across two runs
    and across worker counts 1 and 8."""
    records, noises, rirs = make_audio_corpus(tmp_path / "corpus", n_speech=20, seed=55)
    speech = tmp_path / "speech.jsonl"
    with open(speech, "w") as fh:
        write_score_manifest(records, fh)
    noise = tmp_path / "noise.jsonl"
    noise.write_text("".join(json.dumps({"path": p}) + "\n" for p in noises))
    rir = tmp_path / "rir.jsonl"
    rir.write_text("".join(p + "\n" for p in rirs))

    outputs = [
        _run_simulation(tmp_path / name, speech, noise, rir, workers)
        for name, workers in (("run1", 1), ("run2", 1), ("run8", 8))
    ]
    assert outputs[0] == outputs[1], "repeat run differs"
    assert outputs[0] == outputs[2], "worker count changed output bytes"
    _pass("simulation determinism across runs and worker counts {1, 8}")


def test_duration_accounting_fixture(tmp_path):
    """A fixture manifest built to the published per-dataset totals filters to
    its expected kept-hours exactly (WSJ excluded outright)."""
    records = make_duration_fixture()
    config = _paper_config(tmp_path)
    full_hours = summarize_by_dataset(records)
    for dataset, (full_h, _) in PAPER_DURATIONS.items():
        assert full_hours[dataset] == float(full_h)
    assert sum(full_hours.values()) == 2572.0  # ~2500 in the published table

    outcome = threshold_filter(records, config)
    kept_hours = summarize_by_dataset(outcome.kept)
    for dataset, (_, kept_h) in PAPER_DURATIONS.items():
        if dataset == "wsj":
            assert dataset not in kept_hours
        else:
            assert kept_hours[dataset] == float(kept_h)
    assert sum(kept_hours.values()) == 698.0  # ~700 in the published table
    assert outcome.excluded_dataset_count == int(PAPER_DURATIONS["wsj"][0] / 0.1)
    _pass("duration accounting fixture (2572 h pool -> 698 h kept, EARS 107 -> 16)")


def test_end_to_end_pipeline(tmp_path):
    """filter -> select(top, uniform; same budget, seed 42) -> simulate ->
    evaluate -> report on a 50-file corpus in under 60 s, all outputs
    parseable."""
    started = time.monotonic()
    records, noises, rirs = make_audio_corpus(tmp_path / "corpus", n_speech=50, seed=4242)
    speech = tmp_path / "speech.jsonl"
    with open(speech, "w") as fh:
        write_score_manifest(records, fh)
    noise = tmp_path / "noise.jsonl"
    noise.write_text("".join(json.dumps({"path": p}) + "\n" for p in noises))
    rir = tmp_path / "rir.jsonl"
    rir.write_text("".join(p + "\n" for p in rirs))
    config = write_threshold_config(tmp_path / "config.toml", budget_hours=0.01, seed=42)

    kept = tmp_path / "kept.jsonl"
    rejected = tmp_path / "rejected.jsonl"
    assert main(["filter", "--manifest", str(speech), "--config", str(config),
                 "--out-kept", str(kept), "--out-rejected", str(rejected)]) == EXIT_OK

    budget = "0.01"
    selections = {}
    for method in ("top", "uniform"):
        out = tmp_path / f"subset-{method}.jsonl"
        assert main(["select", "--manifest", str(speech), "--config", str(config),
                     "--method", method, "--budget-hours", budget, "--seed", "42",
                     "--out", str(out)]) == EXIT_OK
        result = parse_score_manifest(out.open())
        assert result.records, f"{method} selection is empty"
        assert result.provenance["budget_hours"] == 0.01
        selections[method] = out

    evals = {}
    for method, manifest in selections.items():
        sim_dir = tmp_path / f"sim-{method}"
        assert main(["simulate", "--speech-manifest", str(manifest),
                     "--noise-manifest", str(noise), "--rir-manifest", str(rir),
                     "--seed", "42", "--out-dir", str(sim_dir)]) == EXIT_OK
        eval_out = tmp_path / f"eval-{method}.jsonl"
        assert main(["evaluate", "--pairs", str(sim_dir / "pairs.jsonl"),
                     "--out", str(eval_out)]) == EXIT_OK
        rows = [json.loads(line) for line in eval_out.read_text().splitlines()]
        assert rows and all(math.isfinite(r["lsd"]) for r in rows)
        evals[method] = eval_out

    compare_out = tmp_path / "median-shift.csv"
    assert main(["report", "compare", "--full", str(speech), "--filtered", str(kept),
                 "--config", str(config), "--out", str(compare_out)]) == EXIT_OK
    compare_lines = compare_out.read_text().splitlines()
    assert compare_lines[0].startswith("metric,") and len(compare_lines) == 6

    scaling_out = tmp_path / "scaling.csv"
    assert main(["report", "scaling",
                 "--group", f"top:0.01:{evals['top']}",
                 "--group", f"uniform:0.01:{evals['uniform']}",
                 "--metrics", "sdr_db,si_sdr_db,estoi,lsd",
                 "--out", str(scaling_out)]) == EXIT_OK
    scaling_lines = scaling_out.read_text().splitlines()
    assert len(scaling_lines) == 3  # header + one row per method series

    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"end-to-end took {elapsed:.1f} s"
    _pass(f"end-to-end pipeline on 50 files in {elapsed:.1f} s")
