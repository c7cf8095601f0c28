"""Rendering of audit results: text grids, CSV re-emission, SVG box plots.

The significance grid mirrors the counts-out-of-R reporting shape: one
row per attribution method, one column per metric, each cell showing the
number of significant runs, a ``+A``/``+B`` suffix for the subgroup with
the higher scores, and a ``*`` for considerable effect size.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from . import dataset
from . import metrics as met
from .errors import ConfigError, DataError


def grid_cell(cell, label_a, label_b):
    if cell["significant_runs"] == 0:
        return "0"
    suffix = "+A" if cell["direction"] == label_a else "+B"
    mark = "*" if cell["considerable_runs"] > 0 else ""
    return f"{cell['significant_runs']}{suffix}{mark}"


def significance_grid(cells, methods, metrics, label_a, label_b,
                      cell_fn=grid_cell):
    """Fixed-width text table over (method, metric) aggregate cells."""
    by_key = {(c["method"], c["metric"]): c for c in cells}
    header = ["method"] + list(metrics)
    rows = [header]
    for method in methods:
        row = [method]
        for metric in metrics:
            cell = by_key.get((method, metric))
            row.append(cell_fn(cell, label_a, label_b) if cell else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def aggregate_grid(cells, methods, metrics):
    """Grid of '(k) mean±std' / '(0) NA' aggregate cells."""
    return significance_grid(
        cells, methods, metrics, "", "",
        cell_fn=lambda c, _a, _b: c["cell"])


# ---------------------------------------------------------------------------
# Box plots


def five_number_summary(values):
    """(low whisker, Q1, median, Q3, high whisker, outliers).

    Linear-interpolation quartiles; whiskers at the most extreme data
    point within 1.5 * IQR of the box.
    """
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        raise DataError("cannot summarize empty data")
    q1, q2, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    lo_limit, hi_limit = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_limit) & (v <= hi_limit)]
    lo, hi = float(inside[0]), float(inside[-1])
    outliers = [float(x) for x in v if x < lo_limit or x > hi_limit]
    return lo, float(q1), float(q2), float(q3), hi, outliers


_SVG_W, _SVG_H = 360, 260
_PLOT = (50, 20, 330, 220)  # left, top, right, bottom
_COLORS = ("#4878a8", "#c05050")


def boxplot_svg(groups, title=""):
    """Side-by-side box plots (SVG 1.1) for {label: values} groups.

    Output is a deterministic function of the inputs.
    """
    labels = list(groups)
    summaries = {lab: five_number_summary(groups[lab]) for lab in labels}
    all_vals = [x for lab in labels for x in groups[lab]]
    v_min, v_max = min(all_vals), max(all_vals)
    if v_max == v_min:
        v_min, v_max = v_min - 0.5, v_max + 0.5
    pad = 0.05 * (v_max - v_min)
    v_min, v_max = v_min - pad, v_max + pad
    left, top, right, bottom = _PLOT

    def y(v):
        frac = (v - v_min) / (v_max - v_min)
        return bottom - frac * (bottom - top)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SVG_W}" height="{_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="white"/>',
        f'<text x="{(left + right) / 2:.1f}" y="14" font-size="12" '
        f'text-anchor="middle">{title}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
        'stroke="black"/>',
    ]
    for tick in np.linspace(v_min, v_max, 5):
        ty = y(tick)
        parts.append(f'<line x1="{left - 4}" y1="{ty:.1f}" x2="{left}" '
                     f'y2="{ty:.1f}" stroke="black"/>')
        parts.append(f'<text x="{left - 6}" y="{ty + 3:.1f}" font-size="9" '
                     f'text-anchor="end">{tick:.3g}</text>')

    slot = (right - left) / len(labels)
    box_w = min(60.0, slot * 0.5)
    for i, lab in enumerate(labels):
        lo, q1, q2, q3, hi, outliers = summaries[lab]
        cx = left + slot * (i + 0.5)
        color = _COLORS[i % len(_COLORS)]
        x0, x1 = cx - box_w / 2, cx + box_w / 2
        parts += [
            f'<line x1="{cx:.1f}" y1="{y(lo):.1f}" x2="{cx:.1f}" '
            f'y2="{y(q1):.1f}" stroke="black"/>',
            f'<line x1="{cx:.1f}" y1="{y(q3):.1f}" x2="{cx:.1f}" '
            f'y2="{y(hi):.1f}" stroke="black"/>',
            f'<line x1="{x0:.1f}" y1="{y(lo):.1f}" x2="{x1:.1f}" '
            f'y2="{y(lo):.1f}" stroke="black"/>',
            f'<line x1="{x0:.1f}" y1="{y(hi):.1f}" x2="{x1:.1f}" '
            f'y2="{y(hi):.1f}" stroke="black"/>',
            f'<rect x="{x0:.1f}" y="{y(q3):.1f}" width="{box_w:.1f}" '
            f'height="{y(q1) - y(q3):.1f}" fill="{color}" '
            'fill-opacity="0.5" stroke="black"/>',
            f'<line x1="{x0:.1f}" y1="{y(q2):.1f}" x2="{x1:.1f}" '
            f'y2="{y(q2):.1f}" stroke="black" stroke-width="2"/>',
            f'<text x="{cx:.1f}" y="{bottom + 14}" font-size="10" '
            f'text-anchor="middle">{lab}</text>',
        ]
        for out in outliers:
            parts.append(f'<circle cx="{cx:.1f}" cy="{y(out):.1f}" r="2.5" '
                         f'fill="none" stroke="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Rendering a persisted report directory


def load_report_dir(report_dir):
    required = ("config.json", "scores.csv", "aggregate.json",
                "disparity.json", "bias.json")
    for name in required:
        if not os.path.exists(os.path.join(report_dir, name)):
            raise DataError(f"malformed report dir: missing {name}")
    with open(os.path.join(report_dir, "config.json"), encoding="utf-8") as f:
        config = json.load(f)
    with open(os.path.join(report_dir, "aggregate.json"),
              encoding="utf-8") as f:
        aggregate = json.load(f)
    samples = met.read_scores_csv(os.path.join(report_dir, "scores.csv"))
    return config, aggregate, samples


def render(report_dir, fmt="table", out_dir=None):
    """Render a persisted report as a text grid, CSV, or SVG box plots.

    Returns the rendered text for 'table', or a list of written paths.
    """
    config, aggregate, samples = load_report_dir(report_dir)
    methods = config["config"]["methods"]
    metrics = config["config"]["metrics"]
    subgroups = sorted({s.subgroup for s in samples},
                       key=lambda s: ({dataset.SUBGROUP_A: 0,
                                       dataset.SUBGROUP_B: 1}.get(s, 2), s))
    label_a, label_b = (subgroups + ["A", "B"])[:2]

    if fmt == "table":
        grid = significance_grid(aggregate["cells"], methods, metrics,
                                 label_a, label_b)
        agg = aggregate_grid(aggregate["cells"], methods, metrics)
        return (f"significant runs out of {aggregate['n_runs']} "
                f"(+A={label_a}, +B={label_b}, *=considerable effect)\n"
                f"{grid}\neffect sizes over significant runs\n{agg}")

    out_dir = out_dir or report_dir
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt == "csv":
        path = os.path.join(out_dir, "scores_export.csv")
        met.write_scores_csv(samples, path)
        written.append(path)
    elif fmt == "svg":
        for method in methods:
            for metric in metrics:
                groups = {}
                for lab in (label_a, label_b):
                    vals = [s.value for s in samples
                            if s.method == method and s.metric == metric
                            and s.subgroup == lab
                            and not math.isnan(s.value)]
                    if vals:
                        groups[lab] = vals
                if not groups:
                    continue
                svg = boxplot_svg(groups, title=f"{method} / {metric}")
                path = os.path.join(out_dir, f"box_{method}_{metric}.svg")
                with open(path, "w", encoding="utf-8") as f:
                    f.write(svg)
                written.append(path)
    else:
        raise ConfigError(f"unknown report format: {fmt}")
    return written
