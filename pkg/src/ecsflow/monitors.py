"""Integral and angular quantities of a lobe, and the history checker."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .curve import CurveError, GeometryField, ProfileCurve, geometry, trapezoid

TAYLOR_WINDOW = 6


def _require_lobe(curve: ProfileCurve):
    if not curve.is_lobe:
        raise CurveError("operation requires a sphere_lobe curve")


def opening_angle(curve: ProfileCurve, geom: GeometryField | None = None) -> float:
    _require_lobe(curve)
    g = geometry(curve) if geom is None else geom
    return trapezoid(g.p, curve)


def enclosed_area(curve: ProfileCurve, geom: GeometryField | None = None) -> float:
    """Signed area 1/2 int <z, nu> dmu (also valid for closed loops)."""
    g = geometry(curve) if geom is None else geom
    return 0.5 * trapezoid(g.r**2 * g.p, curve)


def shoelace_area(curve: ProfileCurve) -> float:
    z = curve.nodes
    zn = np.roll(z, -1, axis=0)
    return 0.5 * float(np.sum(z[:, 0] * zn[:, 1] - z[:, 1] * zn[:, 0]))


def conserved_integral(curve: ProfileCurve, geom: GeometryField | None = None) -> tuple[float, float]:
    """(int (k - p) dmu, int k dmu) over the lobe."""
    _require_lobe(curve)
    g = geometry(curve) if geom is None else geom
    return trapezoid(g.k - g.p, curve), trapezoid(g.k, curve)


@dataclass(frozen=True)
class AngleProfile:
    alpha: np.ndarray
    phi: np.ndarray
    beta: np.ndarray
    alpha0: float
    phi0: float


def _cumtrapz(f: np.ndarray, h: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(0.5 * (f[:-1] + f[1:]) * h)])


def angle_profile(curve: ProfileCurve, geom: GeometryField | None = None) -> AngleProfile:
    """Umlaufwinkel alpha, polar angle phi and beta = phi - alpha along the lobe."""
    _require_lobe(curve)
    g = geometry(curve) if geom is None else geom
    nu0 = g.nu[0]
    alpha0 = float(np.arctan2(nu0[1], nu0[0]))
    phi0 = alpha0 + 0.5 * np.pi
    h = curve.segment_lengths()
    alpha = alpha0 + _cumtrapz(g.k, h)
    phi = phi0 + _cumtrapz(g.p, h)
    return AngleProfile(alpha, phi, phi - alpha, alpha0, phi0)


@dataclass(frozen=True)
class RatioMinima:
    p_min: float
    h_min: float
    q_min: float
    p_arg: int
    h_arg: int
    q_arg: int


def ratio_minima(curve: ProfileCurve, alpha_exp: float = 0.0, geom: GeometryField | None = None) -> RatioMinima:
    """Minima of p_a = r^(-1-a) p, h_a = r^(-1-a) h and q_a = h_a - m p_a."""
    _require_lobe(curve)
    if alpha_exp < 0:
        raise ValueError("alpha_exp must be >= 0")
    g = geometry(curve) if geom is None else geom
    m = curve.m
    if alpha_exp == 0.0:
        pa = g.p_over_r
        qa = g.kp_over_r
        ha = qa + m * pa
    else:
        # endpoint values diverge for alpha > 0; only interior nodes compete
        pa = np.full_like(g.r, np.inf)
        ha = np.full_like(g.r, np.inf)
        qa = np.full_like(g.r, np.inf)
        s = slice(1, -1)
        w = g.r[s] ** (-1.0 - alpha_exp)
        pa[s] = w * g.p[s]
        ha[s] = w * g.h[s]
        qa[s] = ha[s] - m * pa[s]
    ip, ih, iq = int(np.argmin(pa)), int(np.argmin(ha)), int(np.argmin(qa))
    return RatioMinima(float(pa[ip]), float(ha[ih]), float(qa[iq]), ip, ih, iq)


@dataclass(frozen=True)
class TaylorFit:
    c0: float
    c_pi: float
    cond: float
    ok: bool


def _odd_fit(r: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    X = np.column_stack([r, r**3])
    coef, *_ = np.linalg.lstsq(X, p, rcond=None)
    return float(coef[0]), float(np.linalg.cond(X))


def taylor_coefficients(curve: ProfileCurve, geom: GeometryField | None = None) -> TaylorFit:
    """Linear Taylor coefficients of p in r at both lobe endpoints.

    Least-squares fit of p = c r + d r^3 on the nodes nearest each end.
    """
    _require_lobe(curve)
    g = geometry(curve) if geom is None else geom
    w = TAYLOR_WINDOW
    c0, k0 = _odd_fit(g.r[1 : w + 1], g.p[1 : w + 1])
    cpi, kpi = _odd_fit(g.r[-w - 1 : -1], g.p[-w - 1 : -1])
    cond = max(k0, kpi)
    return TaylorFit(c0, cpi, cond, bool(np.isfinite(cond) and cond < 1e12))


# -- history checker --------------------------------------------------------

MIN_SAMPLES = 10
PASS, FAIL, INSUFFICIENT, NOT_APPLICABLE = "pass", "fail", "insufficient_samples", "not_applicable"


@dataclass(frozen=True)
class CheckTolerances:
    ratio_rel: float = 5e-3  # minimum principles, relative to initial min p/r
    phi_rate_rel: float = 0.05
    phi_identity_rel: float = 0.05
    area_identity_rel: float = 0.10
    ikp_drift_rel: float = 0.01
    ikp_growth: float = 20.0  # I_kp drift is checked until max|A| grows this much
    evo_rel: float = 0.05
    strict_slack: float = 1e-10  # per-step slack for "strictly decreasing", times scale
    tail_fraction: float = 0.01  # final fraction of the lifespan excluded from derivative checks
    mid_window: tuple[float, float] = (0.1, 0.9)
    n_resample: int = 401


@dataclass(frozen=True)
class Verdict:
    name: str
    status: str
    worst: float | None = None
    worst_t: float | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass(frozen=True)
class MonitorReport:
    m: int
    n_samples: int
    verdicts: tuple[Verdict, ...]
    summary: dict

    @property
    def ok(self) -> bool:
        """True iff no verdict failed (insufficient or not applicable do not fail)."""
        return all(v.status != FAIL for v in self.verdicts)

    def verdict(self, name: str) -> Verdict:
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n_samples": self.n_samples,
            "ok": self.ok,
            "summary": self.summary,
            "verdicts": [asdict(v) for v in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"m = {self.m}, samples = {self.n_samples}, overall: {'PASS' if self.ok else 'FAIL'}"]
        for v in self.verdicts:
            extra = "" if v.worst is None else f"  worst={v.worst:.6g}"
            if v.worst_t is not None:
                extra += f" at t={v.worst_t:.6g}"
            lines.append(f"[{v.status.upper():>20}] {v.name}{extra}")
        return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


NAMES = (
    "min_p_over_r_nondecreasing",
    "min_kp_over_r_lower_bound",
    "opening_angle_decreasing",
    "opening_angle_rate_identity",
    "area_decreasing_convex",
    "area_second_derivative_identity",
    "ikp_conservation",
    "radius_evolution_residual",
)


def resample_series(t: np.ndarray, t_end: float, n: int) -> np.ndarray:
    """Indices of samples closest (from below) to n times uniform on [t0, t_end]."""
    targets = np.linspace(t[0], t_end, n)
    idx = np.clip(np.searchsorted(t, targets, side="right") - 1, 0, len(t) - 1)
    return np.unique(idx)


def series_derivatives(t, y, idx):
    """First and second time derivatives of y on the subsample idx (non-uniform centered)."""
    ts = t[idx]
    d1 = np.gradient(y[idx], ts)
    d2 = np.gradient(d1, ts)
    return ts, d1, d2


def _worst(values, times, mask=None):
    if mask is not None:
        values, times = values[mask], times[mask]
    if len(values) == 0:
        return None, None
    i = int(np.argmax(values))
    return float(values[i]), float(times[i])


def check_history(history, tol: CheckTolerances = CheckTolerances()) -> MonitorReport:
    """Check the minimum principles, angle and area laws and I_kp conservation."""
    s = history.series
    n = len(s.get("t", ()))
    m = history.m
    lobe = history.is_lobe
    if n < MIN_SAMPLES or not lobe:
        status = INSUFFICIENT if n < MIN_SAMPLES else NOT_APPLICABLE
        return MonitorReport(m, n, tuple(Verdict(nm, status) for nm in NAMES), {"reason": status})

    t = s["t"]
    t0, t_end = float(t[0]), float(t[-1])
    life = t_end - t0
    t_cut = t0 + (1.0 - tol.tail_fraction) * life
    body = t <= t_cut
    verdicts = []

    # (i) min p/r never drops below its initial value, and never falls back from its running max
    pr = s["min_p_over_r"]
    pr0 = float(pr[0])
    slack = tol.ratio_rel * abs(pr0)
    drop_initial = pr0 - pr
    drawdown = np.maximum.accumulate(pr) - pr
    w, wt = _worst(np.maximum(drop_initial, drawdown), t)
    verdicts.append(
        Verdict(
            NAMES[0],
            PASS if w <= slack else FAIL,
            w,
            wt,
            {"initial": pr0, "final": float(pr[-1]), "tolerance": slack,
             "max_drop_below_initial": float(drop_initial.max()), "max_drawdown": float(drawdown.max())},
        )
    )

    # (ii) min (k-p)/r >= min(initial, initial p/r / 2)
    kp = s["min_kp_over_r"]
    bound = min(float(kp[0]), 0.5 * pr0)
    w, wt = _worst(bound - kp, t)
    verdicts.append(
        Verdict(NAMES[1], PASS if w <= slack else FAIL, w, wt,
                {"bound": bound, "tolerance": slack, "min": float(kp.min())})
    )

    idx = resample_series(t, t_cut, tol.n_resample)
    ts, dphi, _ = series_derivatives(t, s["phi_l"], idx)
    _, dA, d2A = series_derivatives(t, s["area"], idx)
    mid = (ts >= t0 + tol.mid_window[0] * life) & (ts <= t0 + tol.mid_window[1] * life)

    # (iii) phi strictly decreasing per step, and dphi/dt <= -2(m+2) min p/r(0)
    phi = s["phi_l"]
    step_inc = np.diff(phi[body])
    inc_w = float(step_inc.max()) if len(step_inc) else -np.inf
    rate_bound = -2.0 * (m + 2) * pr0
    rate_excess = dphi - rate_bound * (1.0 - tol.phi_rate_rel)
    w, wt = _worst(rate_excess, ts)
    ok3 = inc_w <= tol.strict_slack * abs(phi[0]) and w <= 0.0
    verdicts.append(
        Verdict(NAMES[2], PASS if ok3 else FAIL, w, wt,
                {"max_step_increase": inc_w, "rate_bound": rate_bound,
                 "max_rate": float(dphi.max()), "initial_rate": float(dphi[0])})
    )

    # (iv) dphi/dt = -(m+2)(c0 + c_pi) mid-run
    pred = -(m + 2) * (s["c0"][idx] + s["c_pi"][idx])
    rel = np.abs(dphi - pred) / np.abs(pred)
    w, wt = _worst(rel, ts, mid)
    verdicts.append(Verdict(NAMES[3], PASS if w is not None and w <= tol.phi_identity_rel else FAIL, w, wt,
                            {"tolerance": tol.phi_identity_rel}))

    # (v) area decreasing with positive second derivative
    area = s["area"]
    a_inc = np.diff(area[body])
    a_w = float(a_inc.max()) if len(a_inc) else -np.inf
    ok5 = a_w <= tol.strict_slack * abs(area[0]) and bool(np.all(d2A[1:-1] > 0))
    verdicts.append(
        Verdict(NAMES[4], PASS if ok5 else FAIL, a_w, None,
                {"min_second_derivative": float(d2A[1:-1].min()), "max_first_derivative": float(dA.max())})
    )

    # (vi) d2A/dt2 = -m dphi/dt mid-run
    pred = -m * dphi
    rel = np.abs(d2A - pred) / np.abs(pred)
    w, wt = _worst(rel, ts, mid)
    verdicts.append(Verdict(NAMES[5], PASS if w is not None and w <= tol.area_identity_rel else FAIL, w, wt,
                            {"tolerance": tol.area_identity_rel}))

    # (vii) I_kp conserved until max|A| grows by ikp_growth
    ikp = s["I_kp"]
    upto = s["maxA"] <= tol.ikp_growth * s["maxA"][0]
    drift = np.abs(ikp - ikp[0]) / abs(ikp[0])
    w, wt = _worst(drift, t, upto)
    verdicts.append(Verdict(NAMES[6], PASS if w <= tol.ikp_drift_rel else FAIL, w, wt,
                            {"initial": float(ikp[0]), "tolerance": tol.ikp_drift_rel,
                             "max_drift_full_run": float(drift.max())}))

    # (viii) dr/dt = lap r - m r p^2 on steps without redistribution
    evo = s["evo_res"]
    ok_evo = body & np.isfinite(evo)
    if ok_evo.any():
        w, wt = _worst(evo, t, ok_evo)
        verdicts.append(Verdict(NAMES[7], PASS if w <= tol.evo_rel else FAIL, w, wt,
                                {"tolerance": tol.evo_rel, "median": float(np.median(evo[ok_evo]))}))
    else:
        verdicts.append(Verdict(NAMES[7], INSUFFICIENT))

    summary = {
        "t_end": t_end,
        "maxA_initial": float(s["maxA"][0]),
        "maxA_final": float(s["maxA"][-1]),
        "phi_initial": float(phi[0]),
        "phi_final": float(phi[-1]),
        "area_initial": float(area[0]),
        "area_final": float(area[-1]),
        "ikp_initial": float(ikp[0]),
        "min_p_over_r_initial": pr0,
        "min_kp_over_r_initial": float(kp[0]),
    }
    return MonitorReport(m, n, tuple(verdicts), summary)
