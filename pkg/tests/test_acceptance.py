"""Acceptance criteria 1-8, each at its stated tolerance.

Every test reports one PASS/FAIL line through the ``criterion`` fixture; the
lines are repeated in the terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest

from ecsflow import io
from ecsflow.blowup import BlowupFrame, blowup_analysis, capture_frames, grim_reaper, reaper_fit, type_indicator
from ecsflow.cli import pipeline
from ecsflow.config import RunConfig
from ecsflow.curve import geometry, identity_residuals
from ecsflow.flow import FlowConfig, run
from ecsflow.monitors import resample_series, series_derivatives
from ecsflow.seeds import circle, whitney_lobe


@pytest.fixture(scope="module")
def default_pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("default") / "out"
    t0 = time.perf_counter()
    status = pipeline(RunConfig(out_dir=str(out)), out)
    return out, status, time.perf_counter() - t0


@pytest.fixture(scope="module")
def whitney_50x(default_pipeline):
    """The default run truncated at the first sample where max|A| reaches 50x.

    The trajectory is deterministic, so this is exactly the series of a run
    stopped at 50x.
    """
    out, _, _ = default_pipeline
    h = io.load_run(out / "run")
    a = h.series["maxA"]
    end = int(np.argmax(a >= 50 * a[0])) + 1
    assert a[end - 1] >= 50 * a[0]
    return h, {k: v[:end] for k, v in h.series.items()}


def test_criterion_1_whitney_identities(criterion):
    t0 = time.perf_counter()
    g = geometry(whitney_lobe(2, 4096))
    kmax = g.k.max()
    e_kp = np.max(np.abs(g.k - 3 * g.p)) / kmax
    e_kr = np.max(np.abs(g.k - 3 * g.r)) / kmax
    pinch = np.max(g.pinch) / np.max(g.A2)
    ric = []
    for m in (2, 3, 4, 5):
        gm = geometry(whitney_lobe(m, 4096))
        s = gm.interior  # the exact eigenvalues vanish at the endpoints
        ric.append(max(np.max(np.abs(gm.ric1[s] / (2 * (m - 1) * gm.r[s] ** 2) - 1)),
                       np.max(np.abs(gm.ric2[s] / (m * gm.r[s] ** 2) - 1))))
    dt = time.perf_counter() - t0
    ok = e_kp <= 5e-3 and e_kr <= 5e-3 and pinch <= 1e-4 and max(ric) <= 1e-3 and dt < 1
    criterion(1, ok, f"|k-3p|/maxk={e_kp:.2e} |k-3r|/maxk={e_kr:.2e} pinch/maxA2={pinch:.2e} "
                     f"ricci rel={max(ric):.2e} time={dt:.2f}s")
    assert ok


def test_criterion_2_distance_identities(criterion):
    t0 = time.perf_counter()
    Ns = np.array([512, 1024, 2048, 4096])
    res = np.array([identity_residuals(whitney_lobe(2, int(N))) for N in Ns])
    orders = [-np.polyfit(np.log(Ns), np.log(res[:, i]), 1)[0] for i in range(2)]
    pairwise = np.log2(res[:-1] / res[1:])
    dt = time.perf_counter() - t0
    ok = min(orders) >= 1.8 and pairwise.min() >= 1.8 and dt < 5
    criterion(2, ok, f"order grad={orders[0]:.3f} lap={orders[1]:.3f} min pairwise={pairwise.min():.3f} "
                     f"time={dt:.2f}s")
    assert ok


def test_criterion_3_circle_control(criterion):
    t0 = time.perf_counter()
    parts = []
    ok = True
    for m in (2, 3):
        R0 = 1.0
        h = run(circle(m, 512, R0), FlowConfig(a_stop_factor=60.0))
        t = h.series["t"]
        exact_sq = R0**2 - 2 * m * t
        upto = exact_sq >= (R0 / 4) ** 2
        R = 1.0 / h.series["maxk"][upto]  # the discrete circle stays a regular polygon
        err = np.max(np.abs(R / np.sqrt(exact_sq[upto]) - 1))
        ti = type_indicator(h, capture_frames(h, a0=10.0 / R0))
        d_err = abs(ti.delta[-1] * 2 * m - 1)
        ok &= bool(err <= 1e-3 and d_err <= 0.1 and np.sum(upto) > 100)
        parts.append(f"m={m}: R err={err:.2e} delta_last={ti.delta[-1]:.4f} (1/2m={1 / (2 * m):.4f})")
    dt = time.perf_counter() - t0
    ok &= dt < 10
    criterion(3, ok, "; ".join(parts) + f" time={dt:.2f}s")
    assert ok


def test_criterion_4_whitney_monotonicity(whitney_50x, default_pipeline, criterion):
    h, s = whitney_50x
    m = h.m
    t = s["t"]
    life = t[-1] - t[0]
    pr, kp, phi, area, ikp, a = (s[k] for k in ("min_p_over_r", "min_kp_over_r", "phi_l", "area", "I_kp", "maxA"))

    pr_ok = abs(pr[0] - 1) <= 5e-3 and np.min(pr) >= pr[0] - 5e-3
    kp_ok = np.min(kp) >= min(2.0, 0.5) - 5e-3
    phi_ok = abs(phi[0] - math.pi / 2) <= 1e-3 and bool(np.all(np.diff(phi) < 0))
    idx = resample_series(t, t[-1], 401)
    ts, dphi, _ = series_derivatives(t, phi, idx)
    early = ts <= t[0] + 0.1 * life
    rate = float(dphi[early].max())
    rate_ok = rate <= -2 * (m + 2) * 1 * (1 - 0.05)
    _, _, d2A = series_derivatives(t, area, idx)
    area_ok = bool(np.all(np.diff(area) < 0) and np.all(d2A[1:-1] > 0))
    before20 = a <= 20 * a[0]
    drift = float(np.max(np.abs(ikp[before20] / ikp[0] - 1)))
    ikp_ok = abs(ikp[0] - math.pi) <= 1e-3 and drift <= 0.01
    _, _, elapsed = default_pipeline
    ok = bool(pr_ok and kp_ok and phi_ok and rate_ok and area_ok and ikp_ok and elapsed < 60)
    criterion(4, ok, f"min p/r={pr.min():.5f} (p/r0={pr[0]:.5f}) min (k-p)/r={kp.min():.4f} "
                     f"phi0={phi[0]:.6f} early max dphi/dt={rate:.3f} min d2A={d2A[1:-1].min():.3f} "
                     f"I_kp0={ikp[0]:.6f} drift={drift:.2e} pipeline time={elapsed:.1f}s")
    assert ok


def test_criterion_5_rate_identities(whitney_50x, criterion):
    h, s = whitney_50x
    m = h.m
    t = s["t"]
    life = t[-1] - t[0]
    idx = resample_series(t, t[-1], 401)
    ts, dphi, _ = series_derivatives(t, s["phi_l"], idx)
    _, _, d2A = series_derivatives(t, s["area"], idx)
    mid = (ts >= t[0] + 0.1 * life) & (ts <= t[0] + 0.9 * life)
    pred_phi = -(m + 2) * (s["c0"][idx] + s["c_pi"][idx])
    e_phi = float(np.max(np.abs(dphi[mid] / pred_phi[mid] - 1)))
    e_area = float(np.max(np.abs(d2A[mid] / (-m * dphi[mid]) - 1)))
    ok = e_phi <= 0.05 and e_area <= 0.10
    criterion(5, ok, f"dphi/dt vs -(m+2)(c0+cpi) rel={e_phi:.2e}; d2A/dt2 vs -m dphi/dt rel={e_area:.2e}")
    assert ok


def test_criterion_6_singularity_classification(default_pipeline, criterion):
    out, _, _ = default_pipeline
    t0 = time.perf_counter()
    h = io.load_run(out / "run")
    res = blowup_analysis(h, a0=10.0 * h.series["maxk"][0])
    dt = time.perf_counter() - t0
    ti = res["type"]
    r = res["r"]
    fit = res["fits"][-1]
    resid = [f.residual for f in res["fits"]]
    v = res["verdicts"]
    checks = {
        "delta growth >= 3": v["type_ii"] is True,
        "r growth >= 4": v["r_unbounded_trend"] is True,
        "residual <= 0.05": v["final_fit_residual_ok"],
        "c in [0.9, 1.1]": v["final_fit_speed_ok"],
        "residual non-increasing": v["residual_nonincreasing_last4"] is True,
    }
    ok = all(checks.values()) and dt < 120
    failed = [k for k, passed in checks.items() if not passed]
    criterion(6, ok, f"frames={len(res['frames'])} delta growth={ti.growth:.3f} r growth={r[-1] / r[0]:.3f} "
                     f"final residual={fit.residual:.4f} c={fit.c:.4f} last residuals="
                     f"{','.join(f'{x:.4f}' for x in resid[-4:])} failed: {failed or 'none'}")
    assert ok, f"unmet: {failed}"


def test_criterion_7_reaper_oracle(criterion):
    t0 = time.perf_counter()
    z, _, _ = grim_reaper(np.linspace(-20, 20, 1024))
    fit = reaper_fit(BlowupFrame.from_polyline(z))
    th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    circ = reaper_fit(BlowupFrame.from_polyline(np.column_stack([np.cos(th), np.sin(th)])))
    dt = time.perf_counter() - t0
    theta_deg = math.degrees(math.remainder(fit.theta, 2 * math.pi))
    ok = abs(theta_deg) <= 0.5 and abs(fit.c - 1) <= 1e-3 and fit.residual <= 1e-4 and circ.residual >= 0.3 and dt < 1
    criterion(7, ok, f"theta={theta_deg:.2e} deg c={fit.c:.6f} residual={fit.residual:.2e} "
                     f"circle residual={circ.residual:.3f} time={dt:.2f}s")
    assert ok


def test_criterion_8_determinism(default_pipeline, tmp_path, criterion):
    out1, status1, _ = default_pipeline
    out2 = tmp_path / "out"
    status2 = pipeline(RunConfig(out_dir=str(out1)), out2)  # same config, second output directory
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    h1 = {k: v["files"] for k, v in m1["stages"].items()}
    h2 = {k: v["files"] for k, v in m2["stages"].items()}
    n_files = sum(len(v) for v in h1.values())
    same_series = (out1 / "run" / "series.csv").read_bytes() == (out2 / "run" / "series.csv").read_bytes()
    ok = h1 == h2 and same_series and status1 == status2 == 0 and len(m1["stages"]) == 5
    criterion(8, ok, f"{n_files} hashed files identical={h1 == h2} series.csv byte-identical={same_series} "
                     f"exit={status1},{status2}")
    assert ok
