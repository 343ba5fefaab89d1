import json
from pathlib import Path

import pytest

from curate_se.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main
from curate_se.fixtures import make_audio_corpus, write_threshold_config
from curate_se.manifest import parse_score_manifest, write_score_manifest


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    records, noises, rirs = make_audio_corpus(root / "corpus", n_speech=8, seed=101)
    speech = root / "speech.jsonl"
    with open(speech, "w") as fh:
        write_score_manifest(records, fh)
    noise = root / "noise.jsonl"
    noise.write_text("".join(json.dumps({"path": p}) + "\n" for p in noises))
    rir = root / "rir.jsonl"
    rir.write_text("".join(p + "\n" for p in rirs))
    config = write_threshold_config(root / "config.toml", budget_hours=0.002, seed=7)
    return root, speech, noise, rir, config


def _read(path) -> str:
    return Path(path).read_text()


def test_unknown_subcommand_exits_64(capsys):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_unknown_flag_exits_64(capsys):
    assert main(["filter", "--bogus", "x"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_missing_manifest_is_io_error(workspace, tmp_path):
    root, speech, noise, rir, config = workspace
    code = main(
        ["filter", "--manifest", str(tmp_path / "nope.jsonl"), "--config", str(config),
         "--out-kept", str(tmp_path / "k.jsonl"), "--out-rejected", str(tmp_path / "r.jsonl")]
    )
    assert code == 2


def test_filter_command(workspace, tmp_path, capsys):
    root, speech, noise, rir, config = workspace
    kept = tmp_path / "kept.jsonl"
    rejected = tmp_path / "rej.jsonl"
    code = main(
        ["filter", "--manifest", str(speech), "--config", str(config),
         "--out-kept", str(kept), "--out-rejected", str(rejected)]
    )
    assert code == EXIT_OK
    kept_records = parse_score_manifest(kept.open()).records
    rejected_rows = [json.loads(line) for line in _read(rejected).splitlines()]
    assert all("violations" in row and row["violations"] for row in rejected_rows)
    assert len(kept_records) + len(rejected_rows) == 8
    runlog = json.loads(_read(tmp_path / "runlog.json"))
    assert runlog["tool_version"]
    assert str(speech) in runlog["input_digests"]


def test_score_ingest_merges_and_validates(workspace, tmp_path):
    root, speech, *_ = workspace
    out = tmp_path / "merged.jsonl"
    code = main(["score-ingest", "--manifest", str(speech), "--manifest", str(speech),
                 "--out", str(out)])
    assert code == EXIT_OK
    result = parse_score_manifest(out.open())
    assert len(result.records) == 8  # duplicates across files dropped
    strict = main(["score-ingest", "--manifest", str(speech), "--manifest", str(speech),
                   "--out", str(tmp_path / "m2.jsonl"), "--strict"])
    assert strict == EXIT_VALIDATION


def test_select_uniform_and_top(workspace, tmp_path):
    root, speech, noise, rir, config = workspace
    top = tmp_path / "top.jsonl"
    uni = tmp_path / "uni.jsonl"
    assert main(["select", "--manifest", str(speech), "--config", str(config),
                 "--method", "top", "--budget-hours", "0.002", "--out", str(top)]) == EXIT_OK
    assert main(["select", "--manifest", str(speech), "--config", str(config),
                 "--method", "uniform", "--budget-hours", "0.002", "--seed", "42",
                 "--out", str(uni)]) == EXIT_OK
    top_result = parse_score_manifest(top.open())
    assert top_result.provenance["method"] == "top_ranked"
    assert top_result.provenance["config_digest"]
    uni_result = parse_score_manifest(uni.open())
    assert uni_result.provenance["method"] == "uniform_random"
    assert uni_result.provenance["seed"] == 42
    budget = 0.002
    assert sum(r.duration_s for r in uni_result.records) / 3600.0 <= budget


def test_detect_emits_anomaly_manifest(workspace, tmp_path):
    root, *_ = workspace
    out = tmp_path / "detect.jsonl"
    code = main(["detect", "--audio-dir", str(root / "corpus" / "speech"),
                 "--dataset", "vctk", "--out", str(out)])
    assert code == EXIT_OK
    records = parse_score_manifest(out.open()).records
    assert len(records) == 8
    for rec in records:
        assert set(rec.scores) == {"CLIP_FRAC", "INFRA_DB", "FLOOR_DBFS", "BW_HZ"}
        assert rec.dataset == "vctk"


def test_simulate_evaluate_report_roundtrip(workspace, tmp_path):
    root, speech, noise, rir, config = workspace
    sim_dir = tmp_path / "sim"
    assert main(["simulate", "--speech-manifest", str(speech), "--noise-manifest", str(noise),
                 "--rir-manifest", str(rir), "--seed", "5", "--out-dir", str(sim_dir)]) == EXIT_OK
    pairs = [json.loads(line) for line in _read(sim_dir / "pairs.jsonl").splitlines()]
    assert len(pairs) == 8
    for row in pairs:
        assert Path(row["clean_path"]).exists()
        assert Path(row["degraded_path"]).exists()
        assert row["applied"]

    eval_out = tmp_path / "eval.jsonl"
    assert main(["evaluate", "--pairs", str(sim_dir / "pairs.jsonl"),
                 "--out", str(eval_out)]) == EXIT_OK
    rows = [json.loads(line) for line in _read(eval_out).splitlines()]
    assert len(rows) == 8
    assert all({"sdr_db", "si_sdr_db", "estoi", "lsd"} <= set(row) for row in rows)

    hist_out = tmp_path / "hist.json"
    assert main(["report", "histogram", "--manifest", str(speech), "--metric", "DNSMOS",
                 "--out", str(hist_out)]) == EXIT_OK
    hist = json.loads(_read(hist_out))
    assert sum(hist["counts"]) == hist["n"] == 8

    scaling_out = tmp_path / "scaling.csv"
    assert main(["report", "scaling", "--group", f"top:0.002:{eval_out}",
                 "--group", f"uniform:0.002:{eval_out}", "--metrics", "sdr_db,estoi",
                 "--out", str(scaling_out)]) == EXIT_OK
    lines = _read(scaling_out).splitlines()
    assert lines[0] == "size_hours,method,sdr_db,estoi"
    assert len(lines) == 3


def test_same_command_twice_is_byte_identical(workspace, tmp_path):
    root, speech, noise, rir, config = workspace
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["simulate", "--speech-manifest", str(speech), "--noise-manifest", str(noise),
                     "--rir-manifest", str(rir), "--seed", "9",
                     "--out-dir", str(out)]) == EXIT_OK
    assert _read(out_a / "pairs.jsonl").replace(str(out_a), "") == \
        _read(out_b / "pairs.jsonl").replace(str(out_b), "")
    for wav in sorted((out_a / "audio").iterdir()):
        assert wav.read_bytes() == (out_b / "audio" / wav.name).read_bytes()


def test_workers_env_var_default(monkeypatch):
    from curate_se.cli import _workers

    class Args:
        workers = None

    monkeypatch.setenv("CURATE_SE_WORKERS", "3")
    assert _workers(Args()) == 3
    monkeypatch.delenv("CURATE_SE_WORKERS")
    assert _workers(Args()) == 1
    Args.workers = 6
    assert _workers(Args()) == 6


def test_workers_do_not_change_bytes(workspace, tmp_path):
    root, speech, noise, rir, config = workspace
    out_a, out_b = tmp_path / "w1", tmp_path / "w4"
    for out, workers in ((out_a, "1"), (out_b, "4")):
        assert main(["simulate", "--speech-manifest", str(speech), "--noise-manifest", str(noise),
                     "--rir-manifest", str(rir), "--seed", "9", "--workers", workers,
                     "--out-dir", str(out)]) == EXIT_OK
    assert _read(out_a / "pairs.jsonl").replace(str(out_a), "") == \
        _read(out_b / "pairs.jsonl").replace(str(out_b), "")
    for wav in sorted((out_a / "audio").iterdir()):
        assert wav.read_bytes() == (out_b / "audio" / wav.name).read_bytes()
