"""scorer-adapter CLI: `score` a directory into a manifest, `list-metrics`."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .adapter import ScorerSpec, list_metrics, score_directory


def _parse_artifacts(pairs: list[str]) -> dict[str, str]:
    artifacts = {}
    for pair in pairs:
        name, _, path = pair.partition("=")
        if not path:
            raise ValueError(f"--artifact must be METRIC=path, got {pair!r}")
        artifacts[name.upper()] = path
    return artifacts


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="scorer-adapter")
    parser.add_argument("--version", action="version", version=f"scorer-adapter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a directory of WAV files")
    p.add_argument("--dir", required=True)
    p.add_argument("--metrics", required=True, help="comma-separated, e.g. dnsmos,nisqa")
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", default="unscored")
    p.add_argument("--artifact", action="append", default=[], help="METRIC=torchscript.pt")
    p.add_argument("--input-rate", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=8)

    sub.add_parser("list-metrics", help="available metrics and versions")

    args = parser.parse_args(argv)
    if args.command == "list-metrics":
        for name, version in list_metrics():
            print(f"{name}\t{version}")
        return 0

    try:
        artifacts = _parse_artifacts(args.artifact)
        scorers = [
            ScorerSpec(
                metric=name.strip().upper(),
                artifact=artifacts.get(name.strip().upper()),
                input_rate_hz=args.input_rate,
                batch_size=args.batch_size,
            )
            for name in args.metrics.split(",")
        ]
        summary = score_directory(args.dir, scorers, args.out, dataset=args.dataset)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"scored {summary.scored} files, skipped {len(summary.skipped)}", file=sys.stderr)
    for path, reason in summary.skipped:
        print(f"skip {path}: {reason}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
