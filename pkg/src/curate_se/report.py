"""Distribution and scaling reports: per-metric histograms, before/after
median-shift tables, and data-amount scaling tables with plot-ready series."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .manifest import ScoreRecord

DEFAULT_BINS = 50


@dataclass
class Histogram:
    metric: str
    edges: list[float]
    counts: list[int]
    median: float
    mean: float
    std: float
    n: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "metric": self.metric,
                "edges": self.edges,
                "counts": self.counts,
                "median": self.median,
                "mean": self.mean,
                "std": self.std,
                "n": self.n,
            },
            separators=(",", ":"),
        )


def histogram(records: list[ScoreRecord], metric: str, bins: int = DEFAULT_BINS) -> Histogram:
    """Uniform-bin histogram over the observed range of one metric.

    Interior-edge values land in the right bin; the maximum lands in the last
    bin (numpy convention). Median/mean/std are exact sample statistics, not
    bin approximations.
    """
    values = np.array([r.scores[metric] for r in records if metric in r.scores], dtype=np.float64)
    if values.size == 0:
        raise ValueError(f"metric {metric!r} absent from all records")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    return Histogram(
        metric=metric,
        edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
        median=float(np.median(values)),
        mean=float(values.mean()),
        std=float(values.std()),
        n=int(values.size),
    )


def compare_distributions(
    full: list[ScoreRecord],
    filtered: list[ScoreRecord],
    metrics: list[str],
    threshold_metrics: set[str] | None = None,
) -> list[dict]:
    """Median-shift table between the full pool and a filtered subset.

    Metrics not in threshold_metrics are flagged used_in_thresholds=False
    (scores reported but never gated on).
    """
    if not full or not filtered:
        raise ValueError("both record lists must be non-empty")
    rows = []
    for metric in metrics:
        m_full = [r.scores[metric] for r in full if metric in r.scores]
        m_filt = [r.scores[metric] for r in filtered if metric in r.scores]
        if not m_full or not m_filt:
            continue
        median_full = float(np.median(m_full))
        median_filtered = float(np.median(m_filt))
        rows.append(
            {
                "metric": metric,
                "median_full": median_full,
                "median_filtered": median_filtered,
                "delta": median_filtered - median_full,
                "used_in_thresholds": (
                    metric in threshold_metrics if threshold_metrics is not None else True
                ),
            }
        )
    return rows


def scaling_table(
    groups: dict[tuple[float, str], list[dict]], metrics: list[str]
) -> dict:
    """Aggregate eval rows grouped by (subset hours, selection method).

    Returns table rows (one per group, columns = per-metric means) plus
    plot-ready series per method with strictly increasing hours.
    """
    if not groups:
        raise ValueError("no groups given")
    rows = []
    for (hours, method), results in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        if not results:
            raise ValueError(f"empty group ({hours}, {method})")
        row = {"size_hours": float(hours), "method": method}
        for metric in metrics:
            vals = [r[metric] for r in results if metric in r]
            row[metric] = float(np.mean(vals)) if vals else float("nan")
        rows.append(row)

    series: dict[str, list[dict]] = {}
    for row in rows:
        series.setdefault(row["method"], []).append(row)
    for pts in series.values():
        pts.sort(key=lambda r: r["size_hours"])
    return {"rows": rows, "series": series}


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Minimal SVG rendering (static figures, no plotting dependency)

_SVG_W, _SVG_H, _SVG_PAD = 640, 400, 50
_SERIES_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


def _scale(v, lo, hi, out_lo, out_hi):
    span = (hi - lo) or 1.0
    return out_lo + (v - lo) / span * (out_hi - out_lo)


def histogram_svg(hist: Histogram) -> str:
    peak = max(hist.counts) or 1
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<text x="{_SVG_W // 2}" y="20" text-anchor="middle">{hist.metric} (n={hist.n})</text>',
    ]
    lo, hi = hist.edges[0], hist.edges[-1]
    for left, right, count in zip(hist.edges, hist.edges[1:], hist.counts):
        x0 = _scale(left, lo, hi, _SVG_PAD, _SVG_W - _SVG_PAD)
        x1 = _scale(right, lo, hi, _SVG_PAD, _SVG_W - _SVG_PAD)
        top = _scale(count, 0, peak, _SVG_H - _SVG_PAD, _SVG_PAD)
        parts.append(
            f'<rect x="{x0:.2f}" y="{top:.2f}" width="{max(x1 - x0, 0.5):.2f}" '
            f'height="{_SVG_H - _SVG_PAD - top:.2f}" fill="#1f77b4"/>'
        )
    mx = _scale(hist.median, lo, hi, _SVG_PAD, _SVG_W - _SVG_PAD)
    parts.append(
        f'<line x1="{mx:.2f}" y1="{_SVG_PAD}" x2="{mx:.2f}" y2="{_SVG_H - _SVG_PAD}" '
        'stroke="#d62728" stroke-dasharray="4"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def scaling_svg(table: dict, metric: str) -> str:
    """One metric of a scaling table: one line per selection method."""
    series = table["series"]
    xs = [p["size_hours"] for pts in series.values() for p in pts]
    ys = [p[metric] for pts in series.values() for p in pts]
    x_lo, x_hi, y_lo, y_hi = min(xs), max(xs), min(ys), max(ys)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}">',
        f'<text x="{_SVG_W // 2}" y="20" text-anchor="middle">{metric} vs training hours</text>',
    ]
    for i, (method, pts) in enumerate(sorted(series.items())):
        color = _SERIES_COLORS[i % len(_SERIES_COLORS)]
        coords = " ".join(
            f"{_scale(p['size_hours'], x_lo, x_hi, _SVG_PAD, _SVG_W - _SVG_PAD):.2f},"
            f"{_scale(p[metric], y_lo, y_hi, _SVG_H - _SVG_PAD, _SVG_PAD):.2f}"
            for p in pts
        )
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{_SVG_W - _SVG_PAD + 5}" y="{30 + 16 * i}" fill="{color}">{method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
