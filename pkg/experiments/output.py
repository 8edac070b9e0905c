"""CSV tables and log-scale SVG line charts."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.template.loader import render_to_string

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"

PANEL_WIDTH = 520
PANEL_HEIGHT = 300
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 64, 150, 30, 42
HEADER = 28
# values below this never set the lower end of a log axis
LOG_FLOOR = 1e-16
MAX_POINTS = 600
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
DASHES = {"solid": "", "dashed": "6 4", "dotted": "2 3"}


def write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.array([tuple(row) for row in rows], dtype=float).reshape(-1, len(columns))
    np.savetxt(path, table, fmt=CSV_FORMAT, delimiter=",", header=",".join(columns), comments="")
    logger.debug("wrote %d rows to %s", table.shape[0], path)
    return path


# ==========================
# CHARTS
# ==========================
@dataclass(frozen=True, eq=False)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "solid"
    color: str = ""
    opacity: float = 1.0


@dataclass(frozen=True, eq=False)
class Panel:
    title: str
    x_label: str
    y_label: str
    series: tuple


def reference_series(label, x, start, rate, style):
    """``start * exp(-rate x)``."""
    x = np.asarray(x, dtype=float)
    return Series(label, x, start * np.exp(-rate * (x - x[0])), style=style, color="#000000")


def _visible(series):
    x, y = np.asarray(series.x, dtype=float), np.asarray(series.y, dtype=float)
    with np.errstate(invalid="ignore"):
        keep = np.isfinite(x) & np.isfinite(y) & (y >= LOG_FLOOR)
    x, y = x[keep], y[keep]
    stride = max(1, int(np.ceil(x.size / MAX_POINTS)))
    if stride > 1:
        x = np.append(x[::stride], x[-1])
        y = np.append(y[::stride], y[-1])
    return x, y


def _panel_context(panel, top):
    visible = [_visible(series) for series in panel.series]
    xs = np.concatenate([x for x, _ in visible] + [np.zeros(0)])
    ys = np.concatenate([y for _, y in visible] + [np.zeros(0)])
    x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    d_lo, d_hi = (int(np.floor(np.log10(ys.min()))), int(np.ceil(np.log10(ys.max())))) if ys.size else (-1, 1)
    if d_hi <= d_lo:
        d_hi = d_lo + 1

    width = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    height = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * width

    def sy(y):
        return MARGIN_TOP + (d_hi - np.log10(y)) / (d_hi - d_lo) * height

    lines, legend = [], []
    for index, (series, (x, y)) in enumerate(zip(panel.series, visible)):
        color = series.color or PALETTE[index % len(PALETTE)]
        if x.size >= 2:
            lines.append({
                "points": " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(x), sy(y))),
                "color": color,
                "dash": DASHES[series.style],
                "opacity": f"{series.opacity:g}",
            })
        if series.label:
            legend.append({
                "label": series.label,
                "color": color,
                "dash": DASHES[series.style],
                "y": f"{MARGIN_TOP + 14 * len(legend) + 6:.2f}",
            })

    step = max(1, (d_hi - d_lo) // 8)
    y_ticks = [{"y": f"{sy(10.0 ** d):.2f}", "label": f"1e{d}"} for d in range(d_lo, d_hi + 1, step)]
    x_ticks = [{"x": f"{sx(v):.2f}", "label": f"{v:.3g}"} for v in np.linspace(x_lo, x_hi, 6)]
    return {
        "top": top,
        "title": panel.title,
        "x_label": panel.x_label,
        "y_label": panel.y_label,
        "lines": lines,
        "legend": legend,
        "x_ticks": x_ticks,
        "y_ticks": y_ticks,
        "left": MARGIN_LEFT,
        "right": MARGIN_LEFT + width,
        "plot_top": MARGIN_TOP,
        "bottom": MARGIN_TOP + height,
        "width": width,
        "height": height,
        "center_x": f"{MARGIN_LEFT + width / 2:.2f}",
        "center_y": f"{MARGIN_TOP + height / 2:.2f}",
        "legend_x": MARGIN_LEFT + width + 12,
    }


def render_svg(path, title, panels):
    context = {
        "title": title,
        "width": PANEL_WIDTH,
        "height": HEADER + PANEL_HEIGHT * len(panels),
        "title_x": PANEL_WIDTH // 2,
        "panels": [_panel_context(panel, HEADER + PANEL_HEIGHT * i) for i, panel in enumerate(panels)],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_to_string("experiments/plot.svg", context), encoding="utf-8")
    logger.debug("wrote %d panels to %s", len(panels), path)
    return path
