"""Self-contained SVG fitness-progression plots with standard-error bands."""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 28, 48

SERIES_COLORS = {"best": "#2ca02c", "mean": "#1f77b4", "worst": "#d62728"}


def _scale(values: np.ndarray, lo: float, hi: float, out_lo: float, out_hi: float):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (values - lo) / span * (out_hi - out_lo)


def fitness_plot_svg(stats: np.ndarray, title: str = "fitness progression") -> str:
    """Render per-generation best/mean/worst curves averaged across repeats.

    ``stats`` has shape (repeats, generations, 3) with columns best, mean,
    worst.  Shaded bands show the standard error across repeats (zero width
    for a single repeat).
    """
    stats = np.asarray(stats, dtype=float)
    if stats.ndim != 3 or stats.shape[2] != 3:
        raise ValueError("stats must have shape (repeats, generations, 3)")
    repeats, generations, _ = stats.shape
    means = stats.mean(axis=0)
    if repeats > 1:
        stderr = stats.std(axis=0, ddof=1) / np.sqrt(repeats)
    else:
        stderr = np.zeros_like(means)

    xs = np.arange(generations, dtype=float)
    y_min = float((means - stderr).min())
    y_max = float((means + stderr).max())
    if y_max == y_min:
        y_max = y_min + 1.0

    def px(gen: np.ndarray) -> np.ndarray:
        return _scale(gen, 0, max(generations - 1, 1), MARGIN_L, WIDTH - MARGIN_R)

    def py(val: np.ndarray) -> np.ndarray:
        return _scale(val, y_min, y_max, HEIGHT - MARGIN_B, MARGIN_T)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]

    for idx, name in enumerate(("best", "mean", "worst")):
        color = SERIES_COLORS[name]
        center = means[:, idx]
        err = stderr[:, idx]
        band_x = np.concatenate([px(xs), px(xs)[::-1]])
        band_y = np.concatenate([py(center + err), py(center - err)[::-1]])
        band = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(band_x, band_y))
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2"/>')
        d = "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in zip(px(xs), py(center)))
        parts.append(
            f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5" '
            f'data-series="{name}"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 8}" y="{MARGIN_T + 16 * (idx + 1)}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11" '
            f'fill="{color}">{name}</text>'
        )

    axis_y = HEIGHT - MARGIN_B
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{axis_y}" x2="{WIDTH - MARGIN_R}" y2="{axis_y}" '
        'stroke="black"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{axis_y}" '
        'stroke="black"/>'
    )
    parts.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.1f}" y="{HEIGHT - 12}" '
        'text-anchor="middle" font-family="sans-serif" font-size="12">generation</text>'
    )
    parts.append(
        f'<text x="16" y="{(MARGIN_T + axis_y) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(MARGIN_T + axis_y) / 2:.1f})">fitness</text>'
    )
    for frac in (0.0, 0.5, 1.0):
        gen = frac * (generations - 1)
        val = y_min + frac * (y_max - y_min)
        parts.append(
            f'<text x="{px(np.array([gen]))[0]:.1f}" y="{axis_y + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">{gen:.0f}</text>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{py(np.array([val]))[0]:.1f}" '
            f'text-anchor="end" font-family="sans-serif" font-size="10">{val:.4g}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_fitness_plot(stats: np.ndarray, destination, title: str = "fitness progression") -> None:
    with open(destination, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(fitness_plot_svg(stats, title))
