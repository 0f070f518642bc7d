"""Parabolic rescalings near the singular time and grim-reaper fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels as K
from .flow import FlowHistory, open_polyline_geometry

DEFAULT_WINDOW = 20.0
RAY_TOL = 1e-3


class BlowupError(ValueError):
    pass


@dataclass(frozen=True)
class BlowupFrame:
    """A rescaled window z_j = a_j (z - center) around the curvature maximum.

    ``k`` and ``nu`` are the rescaled curvature and normal at the window
    nodes; ``p`` is the transverse curvature taken with respect to the
    original origin, which sits at ``origin`` in the rescaled frame.
    """

    j: int
    a: float
    t: float
    step: int
    center: np.ndarray
    r: float
    nodes: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    origin: np.ndarray = field(repr=False)

    @property
    def max_k(self) -> float:
        return float(np.max(np.abs(self.k)))

    def arclength(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.nodes, axis=0).T))])

    @classmethod
    def from_polyline(cls, nodes, origin=None, j: int = 0, a: float = 1.0, t: float = 0.0) -> "BlowupFrame":
        """Frame from an already rescaled open polyline (synthetic inputs, tests)."""
        z = np.asarray(nodes, dtype=float)
        k, nu = open_polyline_geometry(z)
        o = np.array([np.inf, np.inf]) if origin is None else np.asarray(origin, dtype=float)
        if origin is None:
            p = np.zeros(len(z))
        else:
            w = z - o
            p = np.einsum("ij,ij->i", w, nu) / np.einsum("ij,ij->i", w, w)
        c = int(np.argmax(np.abs(k)))
        r = float(np.hypot(*(z[c] - o))) if origin is not None else math.inf
        return cls(j, a, t, 0, z[c] / a, r, z, k, nu, p, o)


def _full_fields(z: np.ndarray, m: int, lobe: bool):
    """k, nu, p on the whole closed curve (both lobes for sphere_lobe input)."""
    full = np.vstack([z[:-1], -z[:0:-1]]) if lobe else z
    full = np.ascontiguousarray(full)
    k, p, r, nu, seg, _ = K.fields(full, m, False)
    return full, k, nu, p, seg


def _window_indices(seg: np.ndarray, c: int, radius: float) -> np.ndarray:
    """Cyclic node indices within arc length ``radius`` of node c on a closed curve."""
    n = len(seg)
    fwd = np.cumsum(np.roll(seg, -c))[: n - 1]
    back = np.cumsum(seg[(c - 1 - np.arange(n)) % n])[: n - 1]
    qf = int(np.count_nonzero(fwd <= radius))
    qb = int(np.count_nonzero(back <= radius))
    if qf + qb > n - 1:  # window wraps around the whole curve
        qf = min(qf, (n - 1) // 2)
        qb = min(qb, n - 1 - qf)
    return (c + np.arange(-qb, qf + 1)) % n


def make_frame(j: int, snapshot, m: int, window: float = DEFAULT_WINDOW) -> BlowupFrame:
    curve = snapshot.curve
    full, k, nu, p, seg = _full_fields(np.asarray(curve.nodes), m, curve.is_lobe)
    c = int(np.argmax(np.abs(k)))  # smallest index wins ties
    a = float(np.abs(k[c]))
    idx = _window_indices(seg, c, window / a)
    center = full[c].copy()
    nodes = a * (full[idx] - center)
    return BlowupFrame(
        j=j,
        a=a,
        t=float(snapshot.t),
        step=int(snapshot.step),
        center=center,
        r=a * float(np.hypot(*center)),
        nodes=nodes,
        k=k[idx] / a,
        nu=nu[idx].copy(),
        p=p[idx] / a,
        origin=-a * center,
    )


def capture_frames(history: FlowHistory, a0: float, rho: float = math.sqrt(2.0), window: float = DEFAULT_WINDOW) -> list[BlowupFrame]:
    """Frames at the first crossings of max k = a0 rho^j.

    Only crossings for which the run stored a snapshot at the crossing step
    produce a frame (the run forces snapshots at its own capture levels).
    """
    if a0 <= 0 or rho <= 1:
        raise ValueError("need a0 > 0 and rho > 1")
    s = history.series
    maxk = np.maximum.accumulate(s["maxk"])
    steps = s["step"].astype(int)
    by_step = {sn.step: sn for sn in history.snapshots}
    frames = []
    missing = 0
    j = 0
    while True:
        level = a0 * rho**j
        hit = np.nonzero(maxk >= level)[0]
        if len(hit) == 0:
            break
        snap = by_step.get(int(steps[hit[0]]))
        if snap is None:
            missing += 1
        elif not frames or snap.step != frames[-1].step:
            frames.append(make_frame(len(frames), snap, history.m, window))
        j += 1
    if len(frames) < 2:
        if missing:
            raise BlowupError(
                f"{missing} crossing(s) of a0 rho^j have no stored snapshot; "
                "record the run with the same blowup a0_factor and rho"
            )
        raise BlowupError("run terminated before two captures")
    return frames


def intersection_distance(frames: list[BlowupFrame], growth: float = 4.0) -> tuple[np.ndarray, bool | None]:
    """r_j per frame and whether it grows by ``growth`` from first to last frame."""
    r = np.array([f.r for f in frames])
    if len(frames) < 2:
        return r, None
    return r, bool(r[-1] >= growth * r[0])


@dataclass(frozen=True)
class TypeIndicator:
    T_hat: float
    delta: np.ndarray
    type_ii: bool | None
    reliable: bool
    growth: float


def estimate_T(t: np.ndarray, maxk: np.ndarray, fraction: float = 0.3) -> tuple[float, bool]:
    """Singular time from a quadratic fit of 1/max k^2 over the final ``fraction`` of the samples.

    Returns (T_hat, reliable).  The fitted quadratic is 2 b (T - t) + g (T - t)^2;
    T_hat is its first root at or after the last sample.
    """
    t = np.asarray(t, dtype=float)
    y = 1.0 / np.asarray(maxk, dtype=float) ** 2
    n = len(t)
    first = int(np.floor((1.0 - fraction) * n))
    sel = slice(first, n)
    if n - first < 5 or t[-1] <= t[first]:
        return math.nan, False
    t1 = t[-1]
    scale = t1 - t[first]
    tau = (t[sel] - t1) / scale
    coef = np.polynomial.polynomial.polyfit(tau, y[sel], 2)
    roots = np.polynomial.polynomial.polyroots(coef)
    real = np.sort(roots[np.abs(roots.imag) < 1e-12].real)
    ahead = real[real >= -1e-9]
    if len(ahead) == 0 or ahead[0] > 1.0:
        return math.nan, False
    return float(t1 + max(ahead[0], 0.0) * scale), True


def type_indicator(history: FlowHistory, frames: list[BlowupFrame], growth: float = 3.0) -> TypeIndicator:
    """delta_j = a_j^2 (T_hat - t_j); type II iff delta grows by ``growth`` over the frames."""
    T_hat, reliable = estimate_T(history.series["t"], history.series["maxk"])
    a = np.array([f.a for f in frames])
    tj = np.array([f.t for f in frames])
    delta = a**2 * (T_hat - tj)
    verdict = None
    if reliable and len(frames) >= 3:
        verdict = bool(delta[-1] >= growth * delta[0])
    return TypeIndicator(T_hat, delta, verdict, reliable, float(delta[-1] / delta[0]) if len(delta) else math.nan)


@dataclass(frozen=True)
class ReaperFit:
    """Best translator k = -c <e_theta, nu>; theta is the direction of motion."""

    theta: float
    c: float
    residual: float
    residuals: np.ndarray = field(repr=False)


def _fit_weights(frame: BlowupFrame) -> np.ndarray:
    s = frame.arclength()
    ds = np.gradient(s)
    return np.clip(frame.k, 0.0, None) * ds


def reaper_fit(frame: BlowupFrame, n_scan: int = 720) -> ReaperFit:
    """Weighted least-squares fit of the unit-speed translator identity.

    Minimizes sum w (k + c <e_theta, nu>)^2 with w = max(k, 0) ds; c > 0 is
    eliminated in closed form for each theta.
    """
    w = _fit_weights(frame)
    if not np.any(w > 0):
        raise BlowupError("all fit weights vanish (no positive curvature)")
    k = frame.k
    nu = frame.nu
    wsum = w.sum()

    def best_c(theta):
        g = -(np.cos(theta) * nu[:, 0] + np.sin(theta) * nu[:, 1])
        den = np.sum(w * g * g)
        c = max(np.sum(w * k * g) / den, 0.0) if den > 0 else 0.0
        return c, g

    def cost(theta):
        c, g = best_c(theta)
        return float(np.sum(w * (k - c * g) ** 2))

    grid = 2.0 * np.pi * np.arange(n_scan) / n_scan
    costs = np.array([cost(th) for th in grid])
    i = int(np.argmin(costs))
    dth = 2.0 * np.pi / n_scan
    res = minimize_scalar(cost, bounds=(grid[i] - dth, grid[i] + dth), method="bounded",
                          options={"xatol": 1e-10})
    theta = float(res.x) if res.fun <= costs[i] else float(grid[i])
    theta = theta % (2.0 * np.pi)
    c, g = best_c(theta)
    r = k - c * g
    return ReaperFit(theta, float(c), float(np.sqrt(np.sum(w * r * r) / wsum)), r)


@dataclass(frozen=True)
class RayTest:
    opening_integral: float
    max_k: float
    is_ray: bool


def ray_test(frame: BlowupFrame, tol: float = RAY_TOL) -> RayTest:
    """Integral of p over the window (w.r.t. the original origin) and flatness."""
    s = frame.arclength()
    integral = float(np.sum(0.5 * (frame.p[1:] + frame.p[:-1]) * np.diff(s)))
    mk = frame.max_k
    return RayTest(integral, mk, bool(mk <= tol))


def grim_reaper(sigma, theta: float = 0.0, c: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Translator of speed c moving in direction theta, tip at the origin.

    Arc-length parametrized with y decreasing along sigma (so that k > 0
    with the outward normal convention).  Returns nodes, k and nu.
    """
    sigma = np.asarray(sigma, dtype=float)
    u = c * sigma
    y = -2.0 * np.arctan(np.tanh(0.5 * u))
    x = -np.log(np.cos(y))
    # tangent (sin y... ) from dx/dsigma = tan y dy/dsigma, dy/dsigma = -cos y
    T = np.column_stack([-np.sin(y), -np.cos(y)])
    nu = np.column_stack([T[:, 1], -T[:, 0]])
    k = c * np.cos(y)
    z = np.column_stack([x, y]) / c
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    return z @ rot.T, k, nu @ rot.T


def blowup_analysis(history: FlowHistory, a0: float, rho: float = math.sqrt(2.0), window: float = DEFAULT_WINDOW):
    """Frames, fits, r_j, delta_j and verdicts in one dictionary-friendly bundle."""
    frames = capture_frames(history, a0, rho, window)
    r, r_verdict = intersection_distance(frames)
    ti = type_indicator(history, frames)
    fits = [reaper_fit(f) for f in frames]
    rays = [ray_test(f) for f in frames]
    res = np.array([f.residual for f in fits])
    tail = res[-4:]
    trend = bool(np.all(np.diff(tail) <= 0.0)) if len(tail) >= 4 else None
    return {
        "frames": frames,
        "fits": fits,
        "rays": rays,
        "r": r,
        "type": ti,
        "verdicts": {
            "r_unbounded_trend": r_verdict,
            "type_ii": ti.type_ii,
            "type_indicator_reliable": ti.reliable,
            "final_fit_residual_ok": bool(fits[-1].residual <= 0.05),
            "final_fit_speed_ok": bool(0.9 <= fits[-1].c <= 1.1),
            "residual_nonincreasing_last4": trend,
        },
    }
