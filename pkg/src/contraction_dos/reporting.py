"""Deterministic CSV / JSON / SVG writers."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """17 significant digits: round-trips any double exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.write_bytes(buf.getvalue().encode("utf-8"))
    return path


def write_json(path: Path, obj) -> Path:
    path.write_bytes((json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_svg_scatter(path: Path, points, *, curves=(), circles=(), title: str = "",
                      size: int = 480) -> Path:
    """Scatter of complex ``points`` with optional polylines and reference circles.

    ``curves`` are complex arrays drawn as polylines; ``circles`` are radii
    centred at the origin.
    """
    points = np.asarray(points, dtype=complex)
    extent = [1.0]
    if points.size:
        extent.append(float(np.max(np.abs(np.concatenate([points.real, points.imag])))))
    for c in curves:
        c = np.asarray(c, dtype=complex)
        extent.append(float(np.max(np.abs(np.concatenate([c.real, c.imag])))))
    extent.extend(circles)
    half = 1.1 * max(extent)
    scale = size / (2 * half)

    def xy(z):
        return (z.real + half) * scale, (half - z.imag) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append(f'<rect width="{size}" height="{size}" fill="white"/>')
    cx, cy = xy(0j)
    out.append(f'<line x1="0" y1="{cy:.6g}" x2="{size}" y2="{cy:.6g}" stroke="#ccc"/>')
    out.append(f'<line x1="{cx:.6g}" y1="0" x2="{cx:.6g}" y2="{size}" stroke="#ccc"/>')
    for r in circles:
        out.append(f'<circle cx="{cx:.6g}" cy="{cy:.6g}" r="{r * scale:.6g}" fill="none" '
                   f'stroke="#999" stroke-dasharray="4 3"/>')
    for c in curves:
        pts = " ".join("{:.6g},{:.6g}".format(*xy(z)) for z in np.asarray(c, dtype=complex))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#d62728"/>')
    for z in points:
        x, y = xy(z)
        out.append(f'<circle cx="{x:.6g}" cy="{y:.6g}" r="2" fill="#1f77b4"/>')
    out.append("</svg>")
    path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    return path


def write_svg_lines(path: Path, x, series: dict, *, title: str = "", width: int = 560,
                    height: int = 320) -> Path:
    """Line plot of several real series sharing the abscissa ``x``."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    lo = min(float(np.min(v)) for v in ys.values())
    hi = max(float(np.max(v)) for v in ys.values())
    if hi == lo:
        hi, lo = hi + 1, lo - 1
    x0, x1 = float(np.min(x)), float(np.max(x))
    if x1 == x0:
        x1 = x0 + 1
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">']
    if title:
        out.append(f"<title>{_escape(title)}</title>")
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    for i, (name, y) in enumerate(ys.items()):
        px = (x - x0) / (x1 - x0) * (width - 20) + 10
        py = (hi - y) / (hi - lo) * (height - 20) + 10
        pts = " ".join(f"{a:.6g},{b:.6g}" for a, b in zip(px, py))
        colour = colours[i % len(colours)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}">'
                   f"<title>{_escape(name)}</title></polyline>")
    out.append("</svg>")
    path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    return path


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
