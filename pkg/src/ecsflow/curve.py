"""Discrete profile curves and their pointwise geometry.

A profile curve is stored either as one lobe of a point-symmetric curve
(``sphere_lobe``: nodes z_0 .. z_N with z_0 = z_N = 0) or as a closed loop
that avoids the origin (``closed_loop``).  For lobes the reflected half
z(-s) = -z(s) is never stored; stencils reach across the endpoints through
ghost nodes obtained from that reflection.

Conventions: T is the unit tangent, nu = T rotated by -pi/2 so that
{nu, T} is positively oriented (outward normal for counterclockwise
loops), k is the planar curvature with dT/ds = -k nu, and
p = <z, nu> / r^2 is the curvature of the sphere orbits.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MIN_NODES = 16
MAX_SPACING_RATIO = 10.0


class ArcKind(str, enum.Enum):
    SPHERE_LOBE = "sphere_lobe"
    CLOSED_LOOP = "closed_loop"


class CurveError(ValueError):
    """Raised for curves that violate the representation invariants."""


@dataclass(frozen=True)
class ProfileCurve:
    m: int
    arc_kind: ArcKind
    nodes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise CurveError("nodes must have shape (n, 2)")
        kind = ArcKind(self.arc_kind)
        if int(self.m) < 2:
            raise CurveError("m must be >= 2")
        if len(nodes) < MIN_NODES:
            raise CurveError(f"need at least {MIN_NODES} nodes, got {len(nodes)}")
        if not np.all(np.isfinite(nodes)):
            raise CurveError("non-finite node coordinates")
        if kind is ArcKind.SPHERE_LOBE:
            if np.any(nodes[0] != 0.0) or np.any(nodes[-1] != 0.0):
                raise CurveError("sphere_lobe endpoints must be exactly at the origin")
            if np.any(np.hypot(nodes[1:-1, 0], nodes[1:-1, 1]) == 0.0):
                raise CurveError("sphere_lobe interior node at the origin")
            seg = np.diff(nodes, axis=0)
        else:
            if np.min(np.hypot(nodes[:, 0], nodes[:, 1])) == 0.0:
                raise CurveError("closed_loop passes through the origin")
            seg = np.diff(np.vstack([nodes, nodes[:1]]), axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise CurveError("coincident consecutive nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arc_kind", kind)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "t", float(self.t))

    @property
    def is_lobe(self) -> bool:
        return self.arc_kind is ArcKind.SPHERE_LOBE

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def with_nodes(self, nodes, t=None) -> "ProfileCurve":
        return ProfileCurve(self.m, self.arc_kind, nodes, self.t if t is None else t)

    def segment_lengths(self) -> np.ndarray:
        z = self.nodes if self.is_lobe else np.vstack([self.nodes, self.nodes[:1]])
        d = np.diff(z, axis=0)
        return np.hypot(d[:, 0], d[:, 1])

    def spacing_ratio(self) -> float:
        h = self.segment_lengths()
        return float(h.max() / h.min())

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def orientation_ok(self) -> bool:
        """Lobe convention: x < 0 and y > 0 on the first interior nodes."""
        if not self.is_lobe:
            return True
        head = self.nodes[1:4]
        return bool(np.all(head[:, 0] < 0.0) and np.all(head[:, 1] > 0.0))

    def full_curve(self) -> np.ndarray:
        """Closed point-symmetric curve (lobe followed by its reflection), no repeat."""
        if not self.is_lobe:
            return self.nodes.copy()
        # z(pi + u) = -z(pi - u): the reflected lobe runs backwards
        return np.vstack([self.nodes[:-1], -self.nodes[:0:-1]])

    # -- serialization --------------------------------------------------

    def to_csv(self, path) -> None:
        lines = ["s_index,x,y"]
        for i, (x, y) in enumerate(self.nodes):
            lines.append(f"{i},{x:.17g},{y:.17g}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "t": self.t,
            "arc_kind": self.arc_kind.value,
            "nodes": [[float(x), float(y)] for x, y in self.nodes],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_json_dict(cls, d: dict) -> "ProfileCurve":
        return cls(d["m"], d["arc_kind"], np.asarray(d["nodes"], dtype=float), d.get("t", 0.0))

    @classmethod
    def from_json(cls, path) -> "ProfileCurve":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def from_csv(cls, path, m: int, arc_kind="sphere_lobe", t: float = 0.0) -> "ProfileCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(m, arc_kind, data[:, 1:3], t)


@dataclass(frozen=True)
class GeometryField:
    """Per-node geometric quantities of a profile curve.

    ``p_over_r`` and ``kp_over_r`` hold p/r and (k-p)/r with the lobe
    endpoint values obtained by even extrapolation; every other array holds
    the stencil value at each node.
    """

    m: int
    sigma: np.ndarray
    r: np.ndarray
    T: np.ndarray
    nu: np.ndarray
    k: np.ndarray
    p: np.ndarray
    h: np.ndarray
    A2: np.ndarray
    pinch: np.ndarray
    ric1: np.ndarray
    ric2: np.ndarray
    grad_r: np.ndarray
    lap_r: np.ndarray
    p_over_r: np.ndarray
    kp_over_r: np.ndarray
    is_lobe: bool = field(default=True)

    @property
    def abs_A(self) -> np.ndarray:
        return np.sqrt(self.A2)

    @property
    def interior(self) -> slice:
        return slice(1, -1) if self.is_lobe else slice(None)


# -- stencil helpers ------------------------------------------------------


def _padded(curve: ProfileCurve, g: int = 2) -> np.ndarray:
    """Nodes with g ghost nodes on each side (reflection or wraparound)."""
    z = curve.nodes
    if curve.is_lobe:
        left = -z[g:0:-1]
        right = -z[-2 : -2 - g : -1]
    else:
        left = z[-g:]
        right = z[:g]
    return np.vstack([left, z, right])


def _tangent_from_padded(zp: np.ndarray) -> np.ndarray:
    # fourth-order centred derivative in the node index
    d = (zp[:-4] - 8.0 * zp[1:-3] + 8.0 * zp[3:-1] - zp[4:]) / 12.0
    nd = np.hypot(d[:, 0], d[:, 1])
    if np.any(nd == 0.0):
        raise CurveError("degenerate node spacing (zero tangent)")
    return d / nd[:, None]


def frames(curve: ProfileCurve) -> tuple[np.ndarray, np.ndarray]:
    """Unit tangent T and normal nu at every node, {nu, T} positively oriented."""
    T = _tangent_from_padded(_padded(curve))
    nu = np.column_stack([T[:, 1], -T[:, 0]])
    return T, nu


def _menger(zp: np.ndarray) -> np.ndarray:
    a = zp[1:-1] - zp[:-2]
    b = zp[2:] - zp[1:-1]
    c = zp[2:] - zp[:-2]
    la = np.hypot(a[:, 0], a[:, 1])
    lb = np.hypot(b[:, 0], b[:, 1])
    lc = np.hypot(c[:, 0], c[:, 1])
    if np.any(la == 0.0) or np.any(lb == 0.0):
        raise CurveError("coincident consecutive nodes")
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return 2.0 * cross / (la * lb * lc)


def curvature(curve: ProfileCurve) -> np.ndarray:
    """Signed planar curvature (three-point circumscribed circle)."""
    return _menger(_padded(curve, 1))


def _even_extrapolate(r: np.ndarray, f: np.ndarray) -> float:
    """Value at r = 0 of the least-squares fit f = a + b r^2."""
    X = np.column_stack([np.ones_like(r), r * r])
    coef, *_ = np.linalg.lstsq(X, f, rcond=None)
    return float(coef[0])


def transverse(curve: ProfileCurve, nu: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Distance r = |z| and transverse curvature p = <z, nu>/r^2."""
    if nu is None:
        nu = frames(curve)[1]
    z = curve.nodes
    r = np.hypot(z[:, 0], z[:, 1])
    p = np.zeros_like(r)
    if curve.is_lobe:
        s = slice(1, -1)
        p[s] = np.einsum("ij,ij->i", z[s], nu[s]) / r[s] ** 2
    else:
        if np.any(r == 0.0):
            raise CurveError("closed_loop node at the origin")
        p = np.einsum("ij,ij->i", z, nu) / r**2
    return r, p


def arclength(curve: ProfileCurve) -> np.ndarray:
    """Cumulative chord length at each node (starting from 0)."""
    return np.concatenate([[0.0], np.cumsum(curve.segment_lengths()[: curve.n_nodes - 1])])


def _padded_scalar(f: np.ndarray, is_lobe: bool, odd: bool) -> np.ndarray:
    if is_lobe:
        sgn = -1.0 if odd else 1.0
        return np.concatenate([[sgn * f[1]], f, [sgn * f[-2]]])
    return np.concatenate([[f[-1]], f, [f[0]]])


def _padded_sigma(curve: ProfileCurve) -> np.ndarray:
    sig = arclength(curve)
    if curve.is_lobe:
        L = sig[-1]
        return np.concatenate([[-sig[1]], sig, [2.0 * L - sig[-2]]])
    L = curve.length()
    return np.concatenate([[sig[-1] - L], sig, [L]])


def _d1_d2(fp: np.ndarray, sp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives on a non-uniform three-point stencil."""
    hm = sp[1:-1] - sp[:-2]
    hp = sp[2:] - sp[1:-1]
    fm, f0, fpl = fp[:-2], fp[1:-1], fp[2:]
    den = hp * hm * (hp + hm)
    d1 = (hm * hm * fpl - hp * hp * fm + (hp * hp - hm * hm) * f0) / den
    d2 = 2.0 * (hm * fpl - (hp + hm) * f0 + hp * fm) / den
    return d1, d2


def signed_distance(curve: ProfileCurve) -> np.ndarray:
    z = curve.nodes
    return np.hypot(z[:, 0], z[:, 1])


def geometry(curve: ProfileCurve) -> GeometryField:
    """All pointwise quantities of the curve in one pass."""
    m = curve.m
    T, nu = frames(curve)
    k = curvature(curve)
    r, p = transverse(curve, nu)
    h = k + (m - 1) * p
    A2 = k * k + 3.0 * (m - 1) * p * p
    pinch = (m - 1) / (m + 2) * (k - 3.0 * p) ** 2
    ric1 = (m - 1) * p * (k - p)
    ric2 = p * (k - p) + (m - 2) * p * p

    # r is odd across lobe endpoints (signed distance)
    sp = _padded_sigma(curve)
    rp = _padded_scalar(r, curve.is_lobe, odd=True)
    grad_r, lap_r = _d1_d2(rp, sp)

    p_over_r = np.empty_like(r)
    kp_over_r = np.empty_like(r)
    if curve.is_lobe:
        s = slice(1, -1)
        p_over_r[s] = p[s] / r[s]
        kp_over_r[s] = (k[s] - p[s]) / r[s]
        for end, near in ((0, slice(1, 4)), (-1, slice(-4, -1))):
            p_over_r[end] = _even_extrapolate(r[near], p_over_r[near])
            kp_over_r[end] = _even_extrapolate(r[near], kp_over_r[near])
    else:
        p_over_r[:] = p / r
        kp_over_r[:] = (k - p) / r

    return GeometryField(
        m=m,
        sigma=sp[1:-1],
        r=r,
        T=T,
        nu=nu,
        k=k,
        p=p,
        h=h,
        A2=A2,
        pinch=pinch,
        ric1=ric1,
        ric2=ric2,
        grad_r=grad_r,
        lap_r=lap_r,
        p_over_r=p_over_r,
        kp_over_r=kp_over_r,
        is_lobe=curve.is_lobe,
    )


def identity_residuals(curve: ProfileCurve, geom: GeometryField | None = None) -> tuple[float, float]:
    """Max-abs residuals of |grad r|^2 + r^2 p^2 = 1 and lap r = r p (p - k)."""
    g = geometry(curve) if geom is None else geom
    s = g.interior
    res_grad = g.grad_r[s] ** 2 + g.r[s] ** 2 * g.p[s] ** 2 - 1.0
    res_lap = g.lap_r[s] - g.r[s] * g.p[s] * (g.p[s] - g.k[s])
    return float(np.max(np.abs(res_grad))), float(np.max(np.abs(res_lap)))


def trapezoid(f: np.ndarray, curve: ProfileCurve) -> float:
    """Integral of a nodal function against arc length."""
    h = curve.segment_lengths()
    if curve.is_lobe:
        return float(np.sum(0.5 * (f[:-1] + f[1:]) * h))
    return float(np.sum(0.5 * (f + np.roll(f, -1)) * h))
