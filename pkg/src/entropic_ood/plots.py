"""Self-contained SVG charts: score histograms and reliability diagrams."""

import xml.etree.ElementTree as ET

import numpy as np

from .metrics import reliability_bins

W, H = 480, 320
M_LEFT, M_RIGHT, M_TOP, M_BOTTOM = 56, 16, 32, 44
COLORS = {"id": "#1f77b4", "ood": "#d62728", "gap": "#ff7f0e", "acc": "#2ca02c"}


def _svg():
    return ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(W), height=str(H),
                      viewBox=f"0 0 {W} {H}", **{"font-family": "sans-serif", "font-size": "11"})


def _text(parent, x, y, s, anchor="middle", **kw):
    t = ET.SubElement(parent, "text", x=f"{x:.2f}", y=f"{y:.2f}", **{"text-anchor": anchor}, **kw)
    t.text = s
    return t


def _axes(svg, title, xlabel, ylabel, x_range, y_max):
    x0, x1 = M_LEFT, W - M_RIGHT
    y0, y1 = H - M_BOTTOM, M_TOP
    ET.SubElement(svg, "line", x1=str(x0), y1=str(y0), x2=str(x1), y2=str(y0), stroke="black")
    ET.SubElement(svg, "line", x1=str(x0), y1=str(y0), x2=str(x0), y2=str(y1), stroke="black")
    _text(svg, W / 2, 18, title, **{"font-size": "13"})
    _text(svg, W / 2, H - 8, xlabel)
    _text(svg, 14, H / 2, ylabel, transform=f"rotate(-90 14 {H / 2})")
    lo, hi = x_range
    for frac in (0.0, 0.5, 1.0):
        _text(svg, x0 + frac * (x1 - x0), y0 + 16, f"{lo + frac * (hi - lo):.3g}")
        _text(svg, x0 - 6, y0 - frac * (y0 - y1) + 4, f"{frac * y_max:.3g}", anchor="end")

    def sx(v):
        return x0 + (v - lo) / (hi - lo) * (x1 - x0)

    def sy(v):
        return y0 - v / y_max * (y0 - y1)

    return sx, sy


def score_histogram(id_scores, ood_scores, title, bins=30):
    """Overlaid histograms; each bar carries its raw count in ``data-count``."""
    id_scores = np.asarray(id_scores, dtype=np.float64)
    ood_scores = np.asarray(ood_scores, dtype=np.float64)
    if id_scores.size == 0 or ood_scores.size == 0:
        raise OSError("cannot plot an empty score set")
    lo = float(min(id_scores.min(), ood_scores.min()))
    hi = float(max(id_scores.max(), ood_scores.max()))
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    counts = {"id": np.histogram(id_scores, edges)[0], "ood": np.histogram(ood_scores, edges)[0]}
    dens = {k: c / c.sum() for k, c in counts.items()}
    y_max = max(float(d.max()) for d in dens.values()) * 1.1
    svg = _svg()
    sx, sy = _axes(svg, title, "score (higher = in-distribution)", "fraction", (lo, hi), y_max)
    for group, c in counts.items():
        g = ET.SubElement(svg, "g", **{"class": f"hist-{group}", "fill": COLORS[group], "fill-opacity": "0.5"})
        for i in range(bins):
            top = sy(dens[group][i])
            ET.SubElement(g, "rect", x=f"{sx(edges[i]):.2f}", y=f"{top:.2f}",
                          width=f"{max(sx(edges[i + 1]) - sx(edges[i]), 0.0):.2f}",
                          height=f"{sy(0) - top:.2f}", **{"data-count": str(int(c[i]))})
    for i, (group, label) in enumerate((("id", "in-distribution"), ("ood", "out-of-distribution"))):
        ET.SubElement(svg, "rect", x=str(W - 150), y=str(M_TOP + 4 + 16 * i), width="10", height="10",
                      fill=COLORS[group], **{"fill-opacity": "0.5"})
        _text(svg, W - 134, M_TOP + 13 + 16 * i, label, anchor="start")
    return ET.tostring(svg, encoding="unicode")


def reliability_diagram(probs, labels, title, bins=15):
    """Per-bin accuracy bars with the gap to the bin's mean confidence."""
    counts, acc, conf = reliability_bins(probs, labels, bins)
    svg = _svg()
    sx, sy = _axes(svg, title, "confidence", "accuracy", (0.0, 1.0), 1.0)
    ET.SubElement(svg, "line", x1=f"{sx(0):.2f}", y1=f"{sy(0):.2f}", x2=f"{sx(1):.2f}", y2=f"{sy(1):.2f}",
                  stroke="gray", **{"stroke-dasharray": "4 3"})
    bars = ET.SubElement(svg, "g", **{"class": "reliability-bars", "fill": COLORS["acc"]})
    gaps = ET.SubElement(svg, "g", **{"class": "reliability-gaps", "fill": COLORS["gap"], "fill-opacity": "0.6"})
    width = sx(1.0 / bins) - sx(0.0)
    for b in range(bins):
        x = sx(b / bins)
        a = float(acc[b]) if counts[b] else 0.0
        ET.SubElement(bars, "rect", x=f"{x:.2f}", y=f"{sy(a):.2f}", width=f"{width:.2f}",
                      height=f"{sy(0) - sy(a):.2f}", stroke="white",
                      **{"data-count": str(int(counts[b])), "data-accuracy": repr(a)})
        if counts[b]:
            top, bottom = max(a, float(conf[b])), min(a, float(conf[b]))
            ET.SubElement(gaps, "rect", x=f"{x:.2f}", y=f"{sy(top):.2f}", width=f"{width:.2f}",
                          height=f"{sy(bottom) - sy(top):.2f}")
    return ET.tostring(svg, encoding="unicode")
