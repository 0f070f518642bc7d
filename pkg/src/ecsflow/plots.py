"""Static SVG figures written without a plotting library."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .blowup import grim_reaper
from .io import read_table, write_text

log = logging.getLogger(__name__)

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


class Panel:
    """Axis box mapping data coordinates into a rectangle of the canvas."""

    def __init__(self, x0, y0, w, h, xlim, ylim, equal=False):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        (a, b), (c, d) = xlim, ylim
        if b <= a:
            a, b = a - 0.5, b + 0.5
        if d <= c:
            c, d = c - 0.5, d + 0.5
        if equal:
            span = max(b - a, (d - c) * w / h)
            mx, my = 0.5 * (a + b), 0.5 * (c + d)
            a, b = mx - span / 2, mx + span / 2
            c, d = my - span * h / w / 2, my + span * h / w / 2
        self.xlim, self.ylim = (a, b), (c, d)
        self.items: list[str] = []

    def map(self, x, y):
        (a, b), (c, d) = self.xlim, self.ylim
        px = self.x0 + (np.asarray(x) - a) / (b - a) * self.w
        py = self.y0 + self.h - (np.asarray(y) - c) / (d - c) * self.h
        return px, py

    def line(self, x, y, color="#000", width=1.0, dash=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if ok.sum() < 2:
            return
        px, py = self.map(x[ok], y[ok])
        pts = " ".join(f"{u:.2f},{v:.2f}" for u, v in zip(px, py))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'
        )

    def svg(self, title="", xlabel="", ylabel="") -> str:
        out = [
            f'<rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}" fill="none" stroke="#444"/>',
            f'<clipPath id="c{self.x0}_{self.y0}"><rect x="{self.x0}" y="{self.y0}" width="{self.w}" height="{self.h}"/></clipPath>',
            f'<g clip-path="url(#c{self.x0}_{self.y0})">',
            *self.items,
            "</g>",
            _text(self.x0 + self.w / 2, self.y0 - 8, title, anchor="middle", size=13),
            _text(self.x0 + self.w / 2, self.y0 + self.h + 32, xlabel, anchor="middle"),
            _text(self.x0 - 48, self.y0 + self.h / 2, ylabel, anchor="middle", rotate=True),
        ]
        for v, label in ((self.xlim[0], "l"), (self.xlim[1], "r")):
            px, _ = self.map(v, self.ylim[0])
            out.append(_text(float(px), self.y0 + self.h + 15, f"{v:.3g}", anchor="start" if label == "l" else "end"))
        for v in self.ylim:
            _, py = self.map(self.xlim[0], v)
            out.append(_text(self.x0 - 4, float(py) + 4, f"{v:.3g}", anchor="end"))
        return "\n".join(out)


def _text(x, y, s, anchor="start", size=11, rotate=False):
    if not s:
        return ""
    tr = f' transform="rotate(-90 {x:.1f} {y:.1f})"' if rotate else ""
    return (
        f'<text x="{x:.1f}" y="{y:.1f}" font-family="sans-serif" font-size="{size}" '
        f'text-anchor="{anchor}"{tr}>{escape(s)}</text>'
    )


def _document(width, height, body) -> str:
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n{body}\n</svg>\n'
    )


def _limits(arrays):
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    v = v[np.isfinite(v)]
    if len(v) == 0:
        return (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    return (lo - pad, hi + pad)


def curves_svg(run_dir, max_curves: int = 8) -> str | None:
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.is_file():
        return None
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    entries = summary["snapshots"]
    if not entries:
        return None
    pick = np.unique(np.linspace(0, len(entries) - 1, min(max_curves, len(entries))).round().astype(int))
    curves = []
    for i in pick:
        z = np.loadtxt(run_dir / entries[i]["file"], delimiter=",", skiprows=1, ndmin=2)[:, 1:3]
        if summary["arc_kind"] == "sphere_lobe":
            z = np.vstack([z, -z[-2::-1]])
        else:
            z = np.vstack([z, z[:1]])
        curves.append((entries[i]["t"], z))
    panel = Panel(70, 40, 520, 420, _limits([c[1][:, 0] for c in curves]), _limits([c[1][:, 1] for c in curves]), equal=True)
    for n, (t, z) in enumerate(curves):
        panel.line(z[:, 0], z[:, 1], PALETTE[n % len(PALETTE)], 1.2)
    legend = [_text(610, 60 + 16 * n, f"t = {t:.6g}") for n, (t, _) in enumerate(curves)]
    legend += [
        f'<rect x="596" y="{52 + 16 * n}" width="10" height="3" fill="{PALETTE[n % len(PALETTE)]}"/>'
        for n in range(len(curves))
    ]
    return _document(760, 510, panel.svg("profile curve snapshots", "x", "y") + "\n" + "\n".join(legend))


def monitors_svg(run_dir, n_points: int = 600) -> str | None:
    path = Path(run_dir) / "series.csv"
    if not path.is_file():
        return None
    s = read_table(path)
    t = s["t"]
    if len(t) < 2:
        return None
    idx = np.unique(np.searchsorted(t, np.linspace(t[0], t[-1], n_points)).clip(0, len(t) - 1))
    ts = t[idx]
    specs = [
        ("opening angle", [("phi_l", "#1f77b4")]),
        ("enclosed area", [("area", "#d62728")]),
        ("integral of k - p", [("I_kp", "#2ca02c")]),
        ("minimum ratios", [("min_p_over_r", "#9467bd"), ("min_kp_over_r", "#ff7f0e")]),
    ]
    parts = []
    for n, (title, keys) in enumerate(specs):
        x0 = 80 + (n % 2) * 400
        y0 = 40 + (n // 2) * 290
        ys = [s[key][idx] for key, _ in keys]
        panel = Panel(x0, y0, 300, 210, (float(ts[0]), float(ts[-1])), _limits(ys))
        for (key, color), y in zip(keys, ys):
            panel.line(ts, y, color, 1.4)
        parts.append(panel.svg(title, "t", " / ".join(k for k, _ in keys)))
    return _document(820, 600, "\n".join(parts))


def blowup_svg(blowup_dir) -> str | None:
    blowup_dir = Path(blowup_dir)
    fits_path = blowup_dir / "fits.json"
    if not fits_path.is_file():
        return None
    fits = json.loads(fits_path.read_text(encoding="utf-8"))["frames"]
    if not fits:
        return None
    last = fits[-1]
    f = read_table(blowup_dir / last["file"])
    x, y = f["x"], f["y"]
    theta, c = last["theta"], last["c"]
    sig = np.linspace(-25.0, 25.0, 801)
    zr, _, _ = grim_reaper(sig, theta=theta if theta is not None else 0.0, c=c if c else 1.0)
    # frame extent only; the reaper overlay is clipped to it
    panel = Panel(70, 40, 520, 420, _limits([x]), _limits([y]), equal=True)
    for fr in fits[:-1]:
        g = read_table(blowup_dir / fr["file"])
        panel.line(g["x"], g["y"], "#bbbbbb", 0.8)
    panel.line(x, y, "#1f77b4", 1.6)
    panel.line(zr[:, 0], zr[:, 1], "#d62728", 1.2, dash="6,4")
    legend = [
        _text(610, 60, f"frame {last['j']}: a = {last['a']:.4g}"),
        _text(610, 78, f"fit: theta = {np.degrees(theta):.3f} deg"),
        _text(610, 96, f"c = {c:.4f}, residual = {last['residual']:.4f}"),
        _text(610, 120, "dashed: grim reaper at fitted theta, c"),
        _text(610, 138, "grey: earlier frames"),
    ]
    return _document(860, 510, panel.svg("rescaled blow-up frame", "x", "y") + "\n" + "\n".join(legend))


def emit_plots(run_dir, out_dir=None, blowup_dir=None, max_curves: int = 8) -> list[Path]:
    """Write curves.svg, monitors.svg and blowup.svg where inputs exist."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "plots"
    blowup_dir = Path(blowup_dir) if blowup_dir is not None else run_dir / "blowup"
    jobs = [
        ("curves.svg", lambda: curves_svg(run_dir, max_curves)),
        ("monitors.svg", lambda: monitors_svg(run_dir)),
        ("blowup.svg", lambda: blowup_svg(blowup_dir)),
    ]
    written = []
    for name, make in jobs:
        doc = make()
        if doc is None:
            log.warning("skipping %s: inputs missing", name)
            continue
        written.append(write_text(out_dir / name, doc))
    return written
