"""curate-se command line: score-ingest, detect, filter, select, simulate,
evaluate and report subcommands wired into reproducible pipeline runs."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .anomaly import analyze
from .audio_io import read_wav, write_wav
from .curation import (
    aggregate_overall,
    normalize_scores,
    rank_and_select,
    threshold_filter,
    uniform_sample,
)
from .degrade import DegradationSpec, simulate
from .manifest import (
    ConfigError,
    ManifestError,
    ScoreRecord,
    load_curation_config,
    parse_score_manifest,
    record_to_json,
    write_score_manifest,
)
from .metrics import evaluate_pair
from .report import (
    compare_distributions,
    histogram,
    histogram_svg,
    rows_to_csv,
    scaling_svg,
    scaling_table,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_runlog(out_dir: Path, argv: list[str], inputs: dict, seed, started: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    log = {
        "command": argv,
        "tool_version": __version__,
        "input_digests": {str(k): v for k, v in inputs.items()},
        "seed": seed,
        "wall_time_s": round(time.monotonic() - started, 6),
    }
    (out_dir / "runlog.json").write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")


def _parse_manifest_file(path, strict: bool = False):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_score_manifest(fh, strict=strict)


def _read_path_manifest(path) -> list[str]:
    """Noise/RIR manifests: JSONL rows with a "path" key, or one path per line."""
    paths = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            paths.append(json.loads(line)["path"])
        else:
            paths.append(line)
    return paths


def _workers(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    return max(1, int(os.environ.get("CURATE_SE_WORKERS", "1")))


def _pool_map(fn, tasks, workers: int):
    """Order-preserving map; output is independent of the worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_score_ingest(args, argv) -> int:
    started = time.monotonic()
    records: list[ScoreRecord] = []
    seen: set[str] = set()
    dropped = 0
    inputs = {}
    for path in args.manifest:
        inputs[path] = _sha256(path)
        result = _parse_manifest_file(path, strict=args.strict)
        dropped += result.duplicates_dropped
        for rec in result.records:
            if rec.utterance_id in seen:
                if args.strict:
                    raise ManifestError(f"duplicate utterance_id {rec.utterance_id!r} across files")
                dropped += 1
                continue
            seen.add(rec.utterance_id)
            records.append(rec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_score_manifest(records, fh)
    if dropped:
        print(f"ingested {len(records)} records, dropped {dropped} duplicates", file=sys.stderr)
    _write_runlog(out.parent, argv, inputs, None, started)
    return EXIT_OK


def _detect_task(path: str) -> dict:
    audio = read_wav(path)
    report = analyze(audio)
    return {
        "utterance_id": Path(path).stem,
        "path": path,
        "duration_s": audio.duration_s,
        "sample_rate_hz": audio.sample_rate_hz,
        "scores": report.as_scores(),
    }


def _cmd_detect(args, argv) -> int:
    started = time.monotonic()
    files = sorted(str(p) for p in Path(args.audio_dir).glob("*.wav"))
    if not files:
        raise ValueError(f"no .wav files in {args.audio_dir}")
    rows = _pool_map(_detect_task, files, _workers(args))
    records = [ScoreRecord(dataset=args.dataset, **row) for row in rows]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_score_manifest(records, fh)
    _write_runlog(out.parent, argv, {}, None, started)
    return EXIT_OK


def _cmd_filter(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.manifest: _sha256(args.manifest), args.config: _sha256(args.config)}
    config = load_curation_config(args.config)
    records = _parse_manifest_file(args.manifest).records
    outcome = threshold_filter(records, config)

    kept_path = Path(args.out_kept)
    kept_path.parent.mkdir(parents=True, exist_ok=True)
    with open(kept_path, "w", encoding="utf-8") as fh:
        write_score_manifest(outcome.kept, fh)
    rejected_path = Path(args.out_rejected)
    rejected_path.parent.mkdir(parents=True, exist_ok=True)
    with open(rejected_path, "w", encoding="utf-8") as fh:
        for rec, violations in outcome.rejected:
            obj = json.loads(record_to_json(rec))
            obj["violations"] = [v.describe() for v in violations]
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    print(
        f"kept {len(outcome.kept)}, rejected {len(outcome.rejected)}, "
        f"excluded {outcome.excluded_dataset_count}",
        file=sys.stderr,
    )
    _write_runlog(kept_path.parent, argv, inputs, None, started)
    return EXIT_OK


def _cmd_select(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.manifest: _sha256(args.manifest), args.config: _sha256(args.config)}
    config = load_curation_config(args.config)
    records = _parse_manifest_file(args.manifest).records
    budget = args.budget_hours if args.budget_hours is not None else config.budget_hours
    seed = args.seed if args.seed is not None else config.seed

    if args.method == "top":
        outcome = threshold_filter(records, config)
        normalized, dropped = normalize_scores(outcome.kept, config.ranking_metrics)
        if dropped:
            print(f"dropped {dropped} records lacking ranking metrics", file=sys.stderr)
        pool = [r for r in outcome.kept if r.utterance_id in normalized]
        subset = rank_and_select(pool, aggregate_overall(normalized), budget, config.ranking_metrics)
    else:
        subset = uniform_sample(records, budget, seed)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        write_score_manifest(
            subset.records, fh, provenance=subset.provenance(config_digest=inputs[args.config])
        )
    print(
        f"{subset.method}: {len(subset.records)} records, {subset.achieved_hours:.3f} h "
        f"of {budget} h budget",
        file=sys.stderr,
    )
    _write_runlog(out.parent, argv, inputs, seed, started)
    return EXIT_OK


def _simulate_task(task) -> dict:
    rec_obj, spec_dict, noise_paths, rir_paths, seed, audio_dir = task
    record = ScoreRecord(**rec_obj)
    spec = DegradationSpec.from_dict(spec_dict)
    pair = simulate(record, spec, noise_paths, rir_paths, global_seed=seed)
    clean_path = str(Path(audio_dir) / f"{record.utterance_id}.clean.wav")
    degraded_path = str(Path(audio_dir) / f"{record.utterance_id}.degraded.wav")
    write_wav(pair.clean, clean_path, encoding="float32")
    write_wav(pair.degraded, degraded_path, encoding="float32")
    return {
        "utterance_id": record.utterance_id,
        "clean_path": clean_path,
        "degraded_path": degraded_path,
        "applied": [{"distortion": name, "params": params} for name, params in pair.applied],
        "seed": pair.seed_used,
    }


def _cmd_simulate(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.speech_manifest: _sha256(args.speech_manifest)}
    records = _parse_manifest_file(args.speech_manifest).records
    noise_paths = []
    if args.noise_manifest:
        inputs[args.noise_manifest] = _sha256(args.noise_manifest)
        noise_paths = _read_path_manifest(args.noise_manifest)
    rir_paths = []
    if args.rir_manifest:
        inputs[args.rir_manifest] = _sha256(args.rir_manifest)
        rir_paths = _read_path_manifest(args.rir_manifest)
    if args.spec:
        inputs[args.spec] = _sha256(args.spec)
        spec = DegradationSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = DegradationSpec()
    spec.validate()

    out_dir = Path(args.out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (rec.__dict__, spec.to_dict(), noise_paths, rir_paths, args.seed, str(audio_dir))
        for rec in records
    ]
    rows = _pool_map(_simulate_task, tasks, _workers(args))
    with open(out_dir / "pairs.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    _write_runlog(out_dir, argv, inputs, args.seed, started)
    return EXIT_OK


def _evaluate_task(row: dict) -> dict:
    clean = read_wav(row["clean_path"])
    degraded = read_wav(row["degraded_path"])
    return evaluate_pair(row["utterance_id"], clean, degraded).as_row()


def _cmd_evaluate(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.pairs: _sha256(args.pairs)}
    rows = [json.loads(line) for line in Path(args.pairs).read_text().splitlines() if line.strip()]
    results = _pool_map(_evaluate_task, rows, _workers(args))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result, separators=(",", ":")) + "\n")
    _write_runlog(out.parent, argv, inputs, None, started)
    return EXIT_OK


def _write_report(args, text: str, inputs: dict, argv, started: float) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    _write_runlog(out.parent, argv, inputs, None, started)
    return EXIT_OK


def _cmd_report_histogram(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.manifest: _sha256(args.manifest)}
    records = _parse_manifest_file(args.manifest).records
    hist = histogram(records, args.metric, args.bins)
    if args.out_format == "json":
        text = hist.to_json() + "\n"
    elif args.out_format == "csv":
        rows = [
            {"bin_left": left, "bin_right": right, "count": count}
            for left, right, count in zip(hist.edges, hist.edges[1:], hist.counts)
        ]
        text = rows_to_csv(rows, ["bin_left", "bin_right", "count"])
    else:
        text = histogram_svg(hist) + "\n"
    return _write_report(args, text, inputs, argv, started)


def _cmd_report_compare(args, argv) -> int:
    started = time.monotonic()
    inputs = {args.full: _sha256(args.full), args.filtered: _sha256(args.filtered)}
    full = _parse_manifest_file(args.full).records
    filtered = _parse_manifest_file(args.filtered).records
    if args.metrics:
        metrics = args.metrics.split(",")
    else:
        metrics = sorted({m for rec in full for m in rec.scores})
    threshold_metrics = None
    if args.config:
        inputs[args.config] = _sha256(args.config)
        config = load_curation_config(args.config)
        threshold_metrics = {m for row in config.thresholds.values() for m in row}
    rows = compare_distributions(full, filtered, metrics, threshold_metrics)
    columns = ["metric", "median_full", "median_filtered", "delta", "used_in_thresholds"]
    if args.out_format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        text = rows_to_csv(rows, columns)
    return _write_report(args, text, inputs, argv, started)


def _cmd_report_scaling(args, argv) -> int:
    started = time.monotonic()
    inputs = {}
    groups = {}
    for spec in args.group:
        try:
            method, hours, path = spec.split(":", 2)
        except ValueError:
            raise ValueError(f"--group must be method:hours:path, got {spec!r}") from None
        inputs[path] = _sha256(path)
        rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
        groups[(float(hours), method)] = rows
    if args.metrics:
        metrics = args.metrics.split(",")
    else:
        some = next(iter(groups.values()))
        metrics = [k for k in some[0] if k != "utterance_id"]
    table = scaling_table(groups, metrics)
    if args.out_format == "json":
        text = json.dumps(table, indent=2) + "\n"
    elif args.out_format == "svg":
        text = scaling_svg(table, args.svg_metric or metrics[0]) + "\n"
    else:
        text = rows_to_csv(table["rows"], ["size_hours", "method", *metrics])
    return _write_report(args, text, inputs, argv, started)


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="curate-se", description=__doc__)
    parser.add_argument("--version", action="version", version=f"curate-se {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score-ingest", help="validate and merge score manifests")
    p.add_argument("--manifest", action="append", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strict", action="store_true")
    p.set_defaults(func=_cmd_score_ingest)

    p = sub.add_parser("detect", help="signal-based anomaly detectors over a directory")
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--dataset", default="unknown")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("filter", help="threshold-based filtering")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-kept", required=True)
    p.add_argument("--out-rejected", required=True)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("select", help="duration-budgeted subset selection")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("top", "uniform"), required=True)
    p.add_argument("--budget-hours", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("simulate", help="synthesize degraded/clean training pairs")
    p.add_argument("--speech-manifest", required=True)
    p.add_argument("--noise-manifest", default=None)
    p.add_argument("--rir-manifest", default=None)
    p.add_argument("--spec", default=None, help="DegradationSpec JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="intrusive metrics over simulated pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="distribution and scaling reports")
    rsub = p.add_subparsers(dest="report_command", required=True)

    rp = rsub.add_parser("histogram")
    rp.add_argument("--manifest", required=True)
    rp.add_argument("--metric", required=True)
    rp.add_argument("--bins", type=int, default=50)
    rp.add_argument("--out", required=True)
    rp.add_argument("--out-format", choices=("json", "csv", "svg"), default="json")
    rp.set_defaults(func=_cmd_report_histogram)

    rp = rsub.add_parser("compare")
    rp.add_argument("--full", required=True)
    rp.add_argument("--filtered", required=True)
    rp.add_argument("--metrics", default=None, help="comma-separated; default: all observed")
    rp.add_argument("--config", default=None, help="marks metrics used in thresholds")
    rp.add_argument("--out", required=True)
    rp.add_argument("--out-format", choices=("csv", "json"), default="csv")
    rp.set_defaults(func=_cmd_report_compare)

    rp = rsub.add_parser("scaling")
    rp.add_argument("--group", action="append", required=True, help="method:hours:eval.jsonl")
    rp.add_argument("--metrics", default=None)
    rp.add_argument("--out", required=True)
    rp.add_argument("--out-format", choices=("csv", "json", "svg"), default="csv")
    rp.add_argument("--svg-metric", default=None)
    rp.set_defaults(func=_cmd_report_scaling)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args, argv)
    except (ManifestError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
