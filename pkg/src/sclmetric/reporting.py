"""Report and plot emission: deterministic JSON, CSV curves, and small SVGs.

Everything written here is byte-reproducible for identical inputs: JSON is
sorted-key with repr-exact floats, CSVs use LF endings, and the SVG
renderers are plain polyline/rect generators with fixed formatting and no
timestamps.  Richer plotting is intentionally left to the exported CSVs.
"""

from __future__ import annotations

import json

from .evaluation import CmcCurve, EvalReport, VerificationReport, far_gar_sweep


def write_json_report(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2))
        fh.write("\n")


def write_cmc_csv(values, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("rank,cmc\n")
        for k, v in enumerate(values, start=1):
            fh.write(f"{k},{repr(float(v))}\n")


def write_far_gar_csv(report: VerificationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("threshold,far,gar\n")
        for threshold, far, gar in far_gar_sweep(report):
            fh.write(f"{repr(float(threshold))},{repr(float(far))},{repr(float(gar))}\n")


def eval_report_payload(report: EvalReport) -> dict:
    """A JSON-ready view of an EvalReport (per-repetition plus aggregates)."""
    return {
        "flags": {
            "extended_gallery": report.extended_gallery,
            "normalized_inter_class_distance": report.normalized,
        },
        "ranks": list(report.ranks),
        "rank_mean": {str(k): report.rank_mean[k] for k in report.ranks},
        "rank_std": {str(k): report.rank_std[k] for k in report.ranks},
        "mean_cmc": list(report.mean_cmc),
        "gar_mean": {repr(t): g for t, g in report.gar_mean.items()},
        "inter_class_mean": report.inter_class_mean,
        "repetitions": [
            {
                "repetition": r.repetition,
                "gallery_size": r.gallery_size,
                "n_probes": r.n_probes,
                "rank_accuracies": {str(k): v for k, v in r.rank_accuracies.items()},
                "cmc": list(r.cmc.values),
                "n_unenrolled": r.cmc.n_unenrolled,
                "mean_inter_class_distance": r.mean_inter_class_distance,
                "verification": {
                    "genuine_scores": list(r.verification.genuine_scores),
                    "imposter_scores": list(r.verification.imposter_scores),
                    "gar_at_far": [
                        {
                            "target_far": e.target_far,
                            "achieved_far": e.achieved_far,
                            "gar": e.gar,
                            "threshold": e.threshold,
                        }
                        for e in r.verification.gar_at_far
                    ],
                },
            }
            for r in report.repetitions
        ],
    }


# --- dependency-light SVG rendering -----------------------------------------

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 60, 20, 40, 50  # plot margins


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _scale(value, lo, hi, out_lo, out_hi) -> float:
    span = hi - lo
    t = 0.0 if span == 0 else (value - lo) / span
    return out_lo + t * (out_hi - out_lo)


def _svg_frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
    ]


_SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def write_line_svg(series: dict, title: str, xlabel: str, ylabel: str, path) -> None:
    """Polyline plot of one or more named (x, y) series on shared axes."""
    points = [p for pts in series.values() for p in pts]
    if not points:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(min(ys), 0.0), max(max(ys), 1e-12)
    parts = _svg_frame(title, xlabel, ylabel)
    for i, (name, pts) in enumerate(series.items()):
        color = _SERIES_COLORS[i % len(_SERIES_COLORS)]
        coords = " ".join(
            f"{_fmt(_scale(x, x_lo, x_hi, _ML, _W - _MR))},{_fmt(_scale(y, y_lo, y_hi, _H - _MB, _MT))}"
            for x, y in pts
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        parts.append(
            f'<text x="{_W - _MR - 4}" y="{_MT + 16 * (i + 1)}" text-anchor="end" font-size="12" fill="{color}">{name}</text>'
        )
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{_fmt(_scale(xv, x_lo, x_hi, _ML, _W - _MR))}" y="{_H - _MB + 16}" text-anchor="middle" font-size="10">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{_ML - 6}" y="{_fmt(_scale(yv, y_lo, y_hi, _H - _MB, _MT))}" text-anchor="end" font-size="10">{_fmt(yv)}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def write_cmc_svg(curve: CmcCurve, path, title: str = "Cumulative match characteristic") -> None:
    pts = [(k, v) for k, v in enumerate(curve.values, start=1)]
    write_line_svg({"cmc": pts}, title, "rank", "match rate", path)


def write_score_histogram_svg(report: VerificationReport, path, bins: int = 20) -> None:
    """Overlaid genuine/imposter score histograms (normalized bar heights)."""
    scores = list(report.genuine_scores) + list(report.imposter_scores)
    lo, hi = min(scores), max(scores)
    if hi == lo:
        hi = lo + 1.0
    width = (hi - lo) / bins

    def counts(values):
        c = [0] * bins
        for v in values:
            idx = min(int((v - lo) / width), bins - 1)
            c[idx] += 1
        return [x / len(values) for x in c]

    g_counts = counts(report.genuine_scores)
    i_counts = counts(report.imposter_scores)
    top = max(max(g_counts), max(i_counts), 1e-12)
    parts = _svg_frame("Genuine vs imposter score distribution", "distance", "fraction of pairs")
    bar_w = (_W - _ML - _MR) / bins
    for name, series, color, shift in (
        ("genuine", g_counts, "#1f77b4", 0.0),
        ("imposter", i_counts, "#d62728", bar_w / 2),
    ):
        for k, frac in enumerate(series):
            if frac == 0:
                continue
            x = _ML + k * bar_w + shift
            h = (frac / top) * (_H - _MT - _MB)
            y = (_H - _MB) - h
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(bar_w / 2)}" height="{_fmt(h)}" '
                f'fill="{color}" fill-opacity="0.6"/>'
            )
    parts.append(f'<text x="{_W - _MR - 4}" y="{_MT + 16}" text-anchor="end" font-size="12" fill="#1f77b4">genuine</text>')
    parts.append(f'<text x="{_W - _MR - 4}" y="{_MT + 32}" text-anchor="end" font-size="12" fill="#d62728">imposter</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
