"""Run-directory persistence: CSV series and snapshots, JSON summaries, hashes."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .blowup import estimate_T
from .curve import ArcKind, ProfileCurve
from .flow import EXTRA_COLUMNS, SERIES_COLUMNS, FlowHistory, Snapshot

SCHEMA_VERSION = "1"
SNAPSHOT_COLUMNS = ("s_index", "x", "y")
FRAME_COLUMNS = ("i", "x", "y", "k", "nu_x", "nu_y", "p")


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def clean_json(x):
    """Replace non-finite floats by None and numpy scalars by Python ones."""
    if isinstance(x, dict):
        return {str(k): clean_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean_json(v) for v in x]
    if isinstance(x, np.ndarray):
        return clean_json(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def write_json(path, obj) -> Path:
    return write_text(path, json.dumps(clean_json(obj), indent=2, sort_keys=True) + "\n")


def write_table(path, columns, rows) -> Path:
    lines = [",".join(columns)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return write_text(path, "\n".join(lines) + "\n")


def read_table(path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(header)))
    return {c: data[:, i].copy() for i, c in enumerate(header)}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- runs -------------------------------------------------------------------


def run_summary(history: FlowHistory) -> dict:
    s = history.series
    T_hat, reliable = estimate_T(s["t"], s["maxk"]) if history.n_samples >= 5 else (math.nan, False)
    last = {c: float(s[c][-1]) for c in SERIES_COLUMNS + ("maxk", "turning", "c0", "c_pi")}
    return {
        "schema_version": SCHEMA_VERSION,
        "m": history.m,
        "arc_kind": history.initial_curve.arc_kind.value,
        "termination": history.termination,
        "failure": history.failure,
        "n_steps": int(s["step"][-1]),
        "t_final": float(s["t"][-1]),
        "estimated_T": T_hat,
        "estimated_T_reliable": reliable,
        "final": last,
        "extrema": {
            "maxA": float(np.max(s["maxA"])),
            "maxk": float(np.max(s["maxk"])),
            "min_p_over_r": float(np.nanmin(s["min_p_over_r"])),
            "min_kp_over_r": float(np.nanmin(s["min_kp_over_r"])),
        },
        "series_columns": list(SERIES_COLUMNS + EXTRA_COLUMNS),
        "snapshots": [
            {"file": f"snapshots/{i:03d}.csv", "step": sn.step, "t": sn.t, "maxk": sn.maxk, "maxA": sn.maxA}
            for i, sn in enumerate(history.snapshots)
        ],
    }


def write_curve(path, curve: ProfileCurve) -> Path:
    return write_table(path, SNAPSHOT_COLUMNS, ([i, x, y] for i, (x, y) in enumerate(curve.nodes)))


def write_run(run_dir, history: FlowHistory) -> list[Path]:
    run_dir = Path(run_dir)
    cols = SERIES_COLUMNS + EXTRA_COLUMNS
    arr = np.column_stack([history.series[c] for c in cols])
    files = [write_table(run_dir / "series.csv", cols, arr)]
    for i, sn in enumerate(history.snapshots):
        files.append(write_curve(run_dir / "snapshots" / f"{i:03d}.csv", sn.curve))
    files.append(write_json(run_dir / "summary.json", run_summary(history)))
    return files


def load_run(run_dir) -> FlowHistory:
    run_dir = Path(run_dir)
    summary = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    series = read_table(run_dir / "series.csv")
    m = int(summary["m"])
    kind = ArcKind(summary["arc_kind"])
    snaps = []
    for entry in summary["snapshots"]:
        data = np.loadtxt(run_dir / entry["file"], delimiter=",", skiprows=1, ndmin=2)
        curve = ProfileCurve(m, kind, data[:, 1:3], float(entry["t"]))
        snaps.append(Snapshot(int(entry["step"]), float(entry["t"]), curve, float(entry["maxk"]), float(entry["maxA"])))
    return FlowHistory(m=m, snapshots=snaps, series=series, termination=summary["termination"], failure=summary["failure"])
