"""Explicit time stepping of the equivariant curve shortening flow.

dz/dt = -(k + (m-1) p) nu, integrated with a two-stage midpoint scheme,
parabolic CFL step control and periodic local-cubic redistribution of the
nodes to equal arc length.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .curve import CurveError, ProfileCurve, _menger, _tangent_from_padded, geometry

log = logging.getLogger(__name__)

SERIES_COLUMNS = (
    "t",
    "dt",
    "maxA",
    "phi_l",
    "area",
    "I_kp",
    "min_p_over_r",
    "min_kp_over_r",
)
# appended after the documented columns; see io.SCHEMA_VERSION
EXTRA_COLUMNS = ("maxk", "turning", "c0", "c_pi", "evo_res", "step")

TAYLOR_WINDOW = 6


class FlowError(RuntimeError):
    """Geometry became non-finite or degenerate during a step."""


@dataclass(frozen=True)
class FlowConfig:
    cfl: float = 0.25
    a_stop_factor: float = 60.0
    a_stop: float | None = None
    t_max: float | None = None
    dt_floor: float = 1e-14
    max_steps: int = 20_000_000
    redistribute_every: int = 5
    snapshot_every: int = 0
    capture_a0_factor: float = 10.0
    capture_rho: float = math.sqrt(2.0)

    def __post_init__(self):
        if not (0.0 < self.cfl <= 0.5):
            raise ValueError("cfl out of range (0, 0.5]")
        if self.a_stop_factor <= 1.0:
            raise ValueError("a_stop_factor must exceed 1")
        if self.a_stop is not None and self.a_stop <= 0:
            raise ValueError("a_stop must be positive")
        if self.t_max is not None and self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if self.dt_floor <= 0:
            raise ValueError("dt_floor must be positive")
        if self.redistribute_every < 0:
            raise ValueError("redistribute_every must be >= 0")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")
        if self.capture_a0_factor <= 0:
            raise ValueError("capture_a0_factor must be positive")
        if self.capture_rho <= 1.0:
            raise ValueError("capture_rho must exceed 1")


@dataclass
class Snapshot:
    step: int
    t: float
    curve: ProfileCurve
    maxk: float
    maxA: float


@dataclass
class FlowHistory:
    m: int
    snapshots: list[Snapshot] = field(default_factory=list)
    series: dict[str, np.ndarray] = field(default_factory=dict)
    termination: str = "not_started"
    failure: str | None = None

    @property
    def n_samples(self) -> int:
        return len(self.series.get("t", ()))

    @property
    def initial_curve(self) -> ProfileCurve:
        return self.snapshots[0].curve

    @property
    def final_curve(self) -> ProfileCurve:
        return self.snapshots[-1].curve

    @property
    def is_lobe(self) -> bool:
        return self.snapshots[0].curve.is_lobe

    @property
    def estimated_T(self) -> float:
        """Crude singular-time bound: last time plus the remaining CFL horizon."""
        t = self.series["t"]
        return float(t[-1]) if len(t) else float("nan")


# -- single-step operations ----------------------------------------------


def _as_failure(curve_nodes):
    if not np.all(np.isfinite(curve_nodes)):
        raise FlowError("non-finite node positions")


def step(curve: ProfileCurve, dt: float) -> ProfileCurve:
    """One explicit midpoint step of dz/dt = -h nu; lobe endpoints stay at 0."""
    z = np.ascontiguousarray(curve.nodes)
    h0, nu0 = K.speed(z, curve.m, curve.is_lobe)
    if not (np.all(np.isfinite(h0)) and np.all(np.isfinite(nu0))):
        raise FlowError("non-finite geometry at step start")
    zn = K.midpoint_step(z, curve.m, curve.is_lobe, dt, h0, nu0)
    _as_failure(zn)
    try:
        return curve.with_nodes(zn, t=curve.t + dt)
    except CurveError as exc:
        raise FlowError(str(exc)) from exc


def adaptive_dt(curve: ProfileCurve, cfl: float) -> float:
    """Parabolic CFL step cfl h^2 / (1 + max|A|^2 h^2), h the minimal spacing."""
    g = geometry(curve)
    hmin = float(curve.segment_lengths().min())
    return cfl * hmin * hmin / (1.0 + float(np.max(g.A2)) * hmin * hmin)


def redistribute(curve: ProfileCurve) -> ProfileCurve:
    """Resample to equal chord spacing by local cubic interpolation; endpoints fixed."""
    zn = K.resample_uniform(np.ascontiguousarray(curve.nodes), curve.is_lobe)
    return curve.with_nodes(zn)


def open_polyline_geometry(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Curvature and normal of an open polyline.

    The ends use linearly extrapolated ghost nodes, so values within two
    nodes of either end are less accurate.
    """
    z = np.asarray(z, dtype=float)
    zp = np.vstack([2 * z[0] - z[2], 2 * z[0] - z[1], z, 2 * z[-1] - z[-2], 2 * z[-1] - z[-3]])
    T = _tangent_from_padded(zp)
    nu = np.column_stack([T[:, 1], -T[:, 0]])
    k = _menger(zp[1:-1])
    k[0], k[-1] = k[1], k[-2]
    return k, nu


def rescaled_drift(z: np.ndarray, offset, nu: np.ndarray) -> np.ndarray:
    """<z + o, nu> / |z + o|^2 for the rescaled flow with double point at -o."""
    w = np.asarray(z, dtype=float) + np.asarray(offset, dtype=float)
    return np.einsum("ij,ij->i", w, nu) / np.einsum("ij,ij->i", w, w)


def step_rescaled(z, offset, m: int, dt: float, min_offset: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint step of dz/dtau = -(k + (m-1) <z+o, nu>/|z+o|^2) nu on an open polyline.

    ``offset`` is o = a_j gamma_j, so the double point sits at -o in the
    rescaled frame.  Returns the new nodes and the drift term at the start.
    """
    z = np.asarray(z, dtype=float)
    o = np.asarray(offset, dtype=float)
    if np.min(np.hypot(*(z + o).T)) < min_offset:
        raise ValueError("offset too small: rescaled curve passes near the double point")

    def velocity(zz):
        k, nu = open_polyline_geometry(zz)
        drift = rescaled_drift(zz, o, nu)
        return (k + (m - 1) * drift)[:, None] * nu, drift

    v0, drift0 = velocity(z)
    v1, _ = velocity(z - 0.5 * dt * v0)
    return z - dt * v1, drift0


# -- run ------------------------------------------------------------------


def capture_levels(k0: float, config: FlowConfig, k_max: float) -> list[float]:
    """Curvature thresholds a0 rho^j at which snapshots are forced."""
    a0 = config.capture_a0_factor * k0
    levels = []
    j = 0
    while a0 * config.capture_rho**j <= k_max and j < 400:
        levels.append(a0 * config.capture_rho**j)
        j += 1
    return levels


_TERMINATION = {
    K.ST_ASTOP: "curvature_blowup",
    K.ST_TMAX: "t_max",
    K.ST_MAXSTEPS: "max_steps",
    K.ST_DTFLOOR: "dt_floor",
    K.ST_FAILURE: "geometry_failure",
}
BLOCK_ROWS = 8192


def run(seed: ProfileCurve, config: FlowConfig = FlowConfig(), progress=None) -> FlowHistory:
    """Evolve ``seed`` until max|A| reaches A_stop, dt drops below dt_floor, or t_max.

    The first snapshot is the seed resampled to equal arc-length spacing.
    """
    m, lobe = seed.m, seed.is_lobe
    hist = FlowHistory(m=m)
    cols = SERIES_COLUMNS + EXTRA_COLUMNS
    assert len(cols) == K.N_COLS

    z = np.ascontiguousarray(seed.nodes, dtype=float).copy()
    if config.redistribute_every:
        # seeds are sampled uniformly in their own parameter; switching to
        # arc-length spacing mid-run would put an O(h^2) quadrature jump
        # into the monitored series, so the t = 0 state is already resampled
        z = K.resample_uniform(z, lobe)
    t = float(seed.t)
    k, p, r, nu, seg, lap = K.fields(z, m, lobe)
    sc = K.monitor_scalars(k, p, r, seg, m, lobe, TAYLOR_WINDOW)
    A0, k0 = sc[K.S_MAXA], sc[K.S_MAXK]
    a_stop = config.a_stop if config.a_stop is not None else config.a_stop_factor * A0
    if a_stop <= A0:
        raise ValueError("A_stop must exceed the initial max|A|")
    levels = capture_levels(k0, config, 10.0 * a_stop)
    next_level = 0

    first = np.empty((1, K.N_COLS))
    K.write_row(first, 0, t, 0.0, sc, math.nan, 0, lobe)
    blocks = [first]

    def snap(n_step, row):
        if hist.snapshots and hist.snapshots[-1].step == n_step:
            return
        curve = ProfileCurve(m, seed.arc_kind, z.copy(), t)
        hist.snapshots.append(Snapshot(n_step, t, curve, float(row[8]), float(row[2])))

    def take_snapshots(n_step, row):
        nonlocal next_level
        while next_level < len(levels) and row[8] >= levels[next_level]:
            snap(n_step, row)
            next_level += 1
        if config.snapshot_every and n_step % config.snapshot_every == 0:
            snap(n_step, row)

    snap(0, first[0])
    take_snapshots(0, first[0])
    n_step, since = 0, 0
    t_max = -1.0 if config.t_max is None else float(config.t_max)
    buf = np.empty((BLOCK_ROWS, K.N_COLS))
    last_report = 0
    while True:
        level = levels[next_level] if next_level < len(levels) else math.inf
        status, nrow, z, t, n_step, since = K.advance(
            z, m, lobe, t, n_step, since, config.cfl, a_stop, t_max, config.dt_floor,
            config.redistribute_every, config.max_steps, level, config.snapshot_every,
            TAYLOR_WINDOW, buf,
        )
        if nrow:
            blocks.append(buf[:nrow].copy())
        if status == K.ST_SNAP:
            take_snapshots(n_step, blocks[-1][-1])
        if progress is not None and n_step - last_report >= 10000:
            progress(n_step, t, float(blocks[-1][-1][2]))
            last_report = n_step
        if status in _TERMINATION:
            hist.termination = _TERMINATION[status]
            if status == K.ST_FAILURE:
                hist.failure = f"degenerate geometry at step {n_step + 1}"
            break

    snap(n_step, blocks[-1][-1])
    arr = np.vstack(blocks)
    hist.series = {c: arr[:, i].copy() for i, c in enumerate(cols)}
    log.info("run finished: %s after %d steps at t=%.6g", hist.termination, n_step, t)
    return hist
