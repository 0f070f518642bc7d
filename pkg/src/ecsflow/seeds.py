"""Initial profile curves: Whitney figure eight, perturbations, circles."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .curve import ArcKind, CurveError, ProfileCurve, geometry


class SeedKind(str, enum.Enum):
    WHITNEY = "whitney"
    PERTURBED_WHITNEY = "perturbed_whitney"
    CIRCLE = "circle"


@dataclass(frozen=True)
class SeedSpec:
    kind: SeedKind = SeedKind.WHITNEY
    m: int = 2
    N: int = 1024
    R: float = 1.0
    eps: float = 0.0
    mode: int = 2
    ricci_constant: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SeedKind(self.kind))
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.N < 64:
            raise ValueError("N must be >= 64 for flow seeds")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.mode < 2:
            raise ValueError("mode must be >= 2")


class SeedValidationError(CurveError):
    def __init__(self, report: "RicciReport"):
        self.report = report
        super().__init__(
            f"Ricci condition violated: worst margin {report.worst_margin:.6g} "
            f"at node {report.worst_index}"
        )


def whitney_profile(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    c = np.cos(s)
    sn = np.sin(s)
    return np.stack([-sn, sn * c], axis=-1) / (1.0 + c * c)[..., None]


def whitney_lobe(m: int, N: int) -> ProfileCurve:
    """Figure-eight lobe sampled uniformly in s on [0, pi]."""
    if N < 16:
        raise CurveError("N must be >= 16")
    s = np.linspace(0.0, np.pi, N + 1)
    z = whitney_profile(s)
    z[0] = 0.0
    z[-1] = 0.0
    return ProfileCurve(m, ArcKind.SPHERE_LOBE, z, 0.0)


def whitney_immersion_point(x, R: float = 1.0, C=None) -> np.ndarray:
    """Whitney sphere W_{R,C} at a unit vector x in R^{m+1}, as a point of R^{2m}.

    The first m coordinates are the real parts, the last m the imaginary
    parts.
    """
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must be a unit vector")
    x0, xs = x[0], x[1:]
    w = R / (1.0 + x0 * x0) * np.concatenate([xs, x0 * xs])
    if C is not None:
        w = w + np.asarray(C, dtype=float)
    return w


def circle(m: int, N: int, R: float = 1.0) -> ProfileCurve:
    theta = 2.0 * np.pi * np.arange(N) / N
    z = R * np.column_stack([np.cos(theta), np.sin(theta)])
    return ProfileCurve(m, ArcKind.CLOSED_LOOP, z, 0.0)


@dataclass(frozen=True)
class RicciReport:
    ok: bool
    eps1: float
    eps2: float
    ricci_lower: float
    worst_margin: float
    worst_index: int
    margins: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "ricci_lower": self.ricci_lower,
            "worst_margin": self.worst_margin,
            "worst_index": self.worst_index,
        }


def validate_ricci_condition(curve: ProfileCurve, c: float, rtol: float = 1e-3) -> RicciReport:
    """Check Ric >= c r^2 g through the profile-curve ratios p/r and (k-p)/r.

    Both Ricci eigenvalues divided by r^2 are checked; lobe endpoints use
    the extrapolated ratios.  ``rtol`` absorbs discretization error when the
    bound is attained with equality (as for the Whitney sphere, c = m).
    """
    if not curve.is_lobe:
        raise CurveError("validate_ricci_condition requires a sphere_lobe curve")
    g = geometry(curve)
    m = curve.m
    a = g.p_over_r
    b = g.kp_over_r
    ric_r2 = np.minimum((m - 1) * a * b, a * b + (m - 2) * a * a)
    margins = ric_r2 - c
    worst = int(np.argmin(margins))
    eps1 = float(a.min())
    eps2 = float(b.min())
    ok = bool(eps1 > 0 and eps2 > 0 and margins[worst] >= -rtol * c)
    return RicciReport(ok, eps1, eps2, float(ric_r2.min()), float(margins[worst]), worst, margins)


def perturbed_seed(m: int, N: int, eps: float, n: int = 2, c: float | None = None) -> ProfileCurve:
    """Radially perturbed Whitney lobe z_eps(s) = (1 + eps sin^2 s cos(ns)) z(s).

    The result must satisfy the Ricci condition with constant ``c``
    (default: any positive constant, i.e. c -> 0+).
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    s = np.linspace(0.0, np.pi, N + 1)
    factor = 1.0 + eps * np.sin(s) ** 2 * np.cos(n * s)
    z = factor[:, None] * whitney_profile(s)
    z[0] = 0.0
    z[-1] = 0.0
    curve = ProfileCurve(m, ArcKind.SPHERE_LOBE, z, 0.0)
    rep = validate_ricci_condition(curve, 0.0 if c is None else c, rtol=0.0 if c is None else 1e-3)
    if not rep.ok or (c is None and rep.ricci_lower <= 0.0):
        raise SeedValidationError(rep)
    return curve


def build_seed(spec: SeedSpec) -> ProfileCurve:
    if spec.kind is SeedKind.WHITNEY:
        curve = whitney_lobe(spec.m, spec.N)
    elif spec.kind is SeedKind.PERTURBED_WHITNEY:
        curve = perturbed_seed(spec.m, spec.N, spec.eps, spec.mode)
    else:
        return circle(spec.m, spec.N, spec.R)
    if spec.ricci_constant is not None:
        rep = validate_ricci_condition(curve, spec.ricci_constant)
        if not rep.ok:
            raise SeedValidationError(rep)
    return curve
