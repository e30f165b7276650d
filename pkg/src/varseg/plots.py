"""Plot data bundles and a small static SVG renderer.

SVG is written directly (no plotting library) so rendering identical
bundles yields identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class PlotBundle:
    """Everything a detection picture needs, as plain data.

    Markers are 1-based times in [1, T]; heatmaps are the per-segment
    p x (p*d) coefficient estimates.
    """

    series: np.ndarray                       # T x p
    candidate_markers: tuple[int, ...] = ()
    final_markers: tuple[int, ...] = ()
    truth_markers: tuple[int, ...] = ()
    heatmaps: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        T = self.series.shape[0]
        for name in ("candidate_markers", "final_markers", "truth_markers"):
            marks = tuple(int(t) for t in getattr(self, name))
            if any(not (1 <= t <= T) for t in marks):
                raise ValueError(f"{name} outside [1, {T}]")
            object.__setattr__(self, name, marks)


def make_plot_bundle(data: np.ndarray, detection=None,
                     truth_breaks=()) -> PlotBundle:
    X = np.asarray(data, dtype=float)
    if detection is None:
        return PlotBundle(series=X, truth_markers=tuple(truth_breaks))
    return PlotBundle(
        series=X,
        candidate_markers=detection.stage1.indices,
        final_markers=detection.final_breaks,
        truth_markers=tuple(truth_breaks),
        heatmaps=detection.final_models,
    )


def bundle_to_dict(bundle: PlotBundle) -> dict:
    return {
        "series": bundle.series.tolist(),
        "candidate_markers": list(bundle.candidate_markers),
        "final_markers": list(bundle.final_markers),
        "truth_markers": list(bundle.truth_markers),
        "heatmaps": [h.tolist() for h in bundle.heatmaps],
    }


def bundle_from_dict(doc: dict) -> PlotBundle:
    return PlotBundle(
        series=np.asarray(doc["series"], dtype=float),
        candidate_markers=tuple(doc.get("candidate_markers", ())),
        final_markers=tuple(doc.get("final_markers", ())),
        truth_markers=tuple(doc.get("truth_markers", ())),
        heatmaps=tuple(np.asarray(h, dtype=float) for h in doc.get("heatmaps", ())),
    )


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _heat_color(v: float, vmax: float) -> str:
    # symmetric blue-white-red scale
    if vmax <= 0:
        return "#ffffff"
    u = max(-1.0, min(1.0, v / vmax))
    if u >= 0:
        r, g, b = 255, round(255 * (1 - u)), round(255 * (1 - u))
    else:
        r, g, b = round(255 * (1 + u)), round(255 * (1 + u)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(bundle: PlotBundle, path) -> None:
    """Series panel with break markers, plus one heatmap per segment."""
    X = bundle.series
    T, p = X.shape
    width, panel_h, pad = 900.0, 280.0, 40.0
    heat_h = 180.0 if bundle.heatmaps else 0.0
    height = panel_h + heat_h + 3 * pad

    lo, hi = float(np.min(X)), float(np.max(X))
    if hi <= lo:
        hi = lo + 1.0
    sx = (width - 2 * pad) / max(T - 1, 1)

    def xpix(t):      # 1-based time to pixel
        return pad + (t - 1) * sx

    def ypix(v):
        return pad + (hi - v) / (hi - lo) * panel_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>',
    ]
    for j in range(p):
        pts = " ".join(f"{_fmt(xpix(t + 1))},{_fmt(ypix(X[t, j]))}" for t in range(T))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="#4878a8" stroke-opacity="0.35" stroke-width="0.8"/>')
    y0, y1 = _fmt(pad), _fmt(pad + panel_h)
    for t in bundle.truth_markers:
        parts.append(f'<line x1="{_fmt(xpix(t))}" x2="{_fmt(xpix(t))}" y1="{y0}" '
                     f'y2="{y1}" stroke="#222222" stroke-dasharray="1,3"/>')
    for t in bundle.candidate_markers:
        parts.append(f'<line x1="{_fmt(xpix(t))}" x2="{_fmt(xpix(t))}" y1="{y0}" '
                     f'y2="{y1}" stroke="#999999" stroke-dasharray="4,3"/>')
    for t in bundle.final_markers:
        parts.append(f'<line x1="{_fmt(xpix(t))}" x2="{_fmt(xpix(t))}" y1="{y0}" '
                     f'y2="{y1}" stroke="#c23b22" stroke-width="1.6"/>')

    if bundle.heatmaps:
        n_seg = len(bundle.heatmaps)
        vmax = max(float(np.max(np.abs(h))) for h in bundle.heatmaps)
        top = panel_h + 2 * pad
        slot = (width - 2 * pad) / n_seg
        for s, heat in enumerate(bundle.heatmaps):
            rows, cols = heat.shape
            cw = min((slot - pad) / cols, heat_h / rows)
            ox = pad + s * slot
            for i in range(rows):
                for j in range(cols):
                    parts.append(
                        f'<rect x="{_fmt(ox + j * cw)}" y="{_fmt(top + i * cw)}" '
                        f'width="{_fmt(cw)}" height="{_fmt(cw)}" '
                        f'fill="{_heat_color(heat[i, j], vmax)}"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
