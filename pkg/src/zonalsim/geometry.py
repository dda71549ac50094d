"""
Surfaces of revolution and their metric.

The surface is generated by rotating the curve
``(sin p2, 0, cos p2) * R(p2)`` about the z axis, with ``p1`` the longitude
and ``p2`` the colatitude.  In the coordinate basis ``(v_d1, v_d2)`` the
metric is diagonal with

    g1 = sin(p2)**2 * R**2,    g2 = R**2 + R'**2.

All quantities here are zonal (independent of ``p1``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from .errors import InvalidProfile, PoleNode, GridMismatch

_THETA = sp.Symbol("p2", real=True)


@dataclass(frozen=True)
class SurfaceProfile:
    """Generating radius ``R(p2)`` together with closed-form derivatives.

    ``derivs[m]`` is the m-th derivative of R (``derivs[0]`` is R itself).
    """

    name: str
    derivs: tuple
    k_smooth: int
    expr: object = None
    finite_difference: bool = False

    @property
    def R(self) -> Callable:
        return self.derivs[0]

    @property
    def dR(self) -> Callable:
        return self.derivs[1]

    @property
    def d2R(self) -> Callable:
        return self.derivs[2]

    def derivative(self, m: int) -> Callable:
        if m < len(self.derivs):
            return self.derivs[m]
        if self.expr is None:
            raise InvalidProfile(f"derivative of order {m} not available for {self.name}")
        f = sp.lambdify(_THETA, sp.diff(self.expr, _THETA, m), "numpy")
        return _broadcasting(f)

    @classmethod
    def from_expression(cls, expr, name: str = "custom", k_smooth: int = 4) -> "SurfaceProfile":
        """Build a profile from a sympy expression in the symbol ``p2``."""
        expr = sp.sympify(expr, locals={"p2": _THETA})
        order = max(k_smooth, 2)
        derivs = tuple(
            _broadcasting(sp.lambdify(_THETA, sp.diff(expr, _THETA, m), "numpy"))
            for m in range(order + 1)
        )
        return cls(name=name, derivs=derivs, k_smooth=k_smooth, expr=expr)

    @classmethod
    def from_callable(cls, R: Callable, name: str = "numeric", k_smooth: int = 2,
                      finite_difference: bool = False, step: float = 1e-3) -> "SurfaceProfile":
        """Profile from a bare callable.  Derivatives require ``finite_difference=True``."""
        if not finite_difference:
            raise InvalidProfile("closed-form derivatives required; pass finite_difference=True to allow a fallback")
        derivs = [R]
        for m in range(1, max(k_smooth, 2) + 1):
            derivs.append(_fd_derivative(derivs[-1], step))
        return cls(name=name, derivs=tuple(derivs), k_smooth=k_smooth, finite_difference=True)


def _broadcasting(f):
    def g(p2):
        p2 = np.asarray(p2, dtype=float)
        return np.broadcast_to(np.asarray(f(p2), dtype=float), p2.shape).copy()
    return g


def _fd_derivative(f, h):
    def g(p2):
        p2 = np.asarray(p2, dtype=float)
        return (f(p2 - 2 * h) - 8 * f(p2 - h) + 8 * f(p2 + h) - f(p2 + 2 * h)) / (12 * h)
    return g


def sphere() -> SurfaceProfile:
    return SurfaceProfile.from_expression(sp.Integer(1), name="sphere", k_smooth=4)


def bump(amplitude: float, power: int = 1, k_smooth: int = 4) -> SurfaceProfile:
    """``R = 1 + amplitude * sin(p2)**(2*power)``."""
    expr = 1 + sp.Float(amplitude) * sp.sin(_THETA) ** (2 * power)
    name = f"bump:{amplitude:g}" if power == 1 else f"bump:{amplitude:g}:{power}"
    return SurfaceProfile.from_expression(expr, name=name, k_smooth=k_smooth)


def trig_profile(coeffs: Sequence[float], k_smooth: int = 4) -> SurfaceProfile:
    """``R = 1 + sum_j c_j sin(p2)**(2j)`` for j = 1, 2, ...  (R = 1 at both poles)."""
    expr = sp.Integer(1)
    for j, c in enumerate(coeffs, start=1):
        expr = expr + sp.Float(c) * sp.sin(_THETA) ** (2 * j)
    name = "trig:" + ",".join(f"{c:g}" for c in coeffs)
    return SurfaceProfile.from_expression(expr, name=name, k_smooth=k_smooth)


def parse_profile(spec: str, k_smooth: int = 4) -> SurfaceProfile:
    """Parse ``sphere``, ``bump:A``, ``bump:A:q`` or ``trig:c1,c2,...``."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    if head == "sphere":
        return sphere()
    if head == "bump":
        parts = rest.split(":")
        amp = float(parts[0])
        power = int(parts[1]) if len(parts) > 1 else 1
        return bump(amp, power, k_smooth=k_smooth)
    if head == "trig":
        return trig_profile([float(c) for c in rest.split(",") if c], k_smooth=k_smooth)
    raise InvalidProfile(f"unknown surface spec {spec!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    profile: str
    k: int
    checks: list = field(default_factory=list)
    witness: tuple | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        lines = [f"surface {self.profile} (k={self.k})"]
        for c in self.checks:
            lines.append(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name:<24s} {c.detail}")
        return "\n".join(lines)

    def to_kv(self) -> str:
        lines = [f"profile={self.profile}", f"k={self.k}", f"passed={int(self.passed)}"]
        for c in self.checks:
            lines.append(f"{c.name}={int(c.passed)}")
        if self.witness is not None:
            lines.append("chart_witness=" + ",".join(f"{a:.6f}" for a in self.witness))
        return "\n".join(lines)


def validate_surface(profile: SurfaceProfile, k: int, n_scan: int = 10_000,
                     tol: float = 1e-10) -> ValidationReport:
    """Check positivity, endpoint values, derivative vanishing at the poles and
    the existence of chart parameters a1 < a2 < pi/2 < a3 < a4."""
    p = np.linspace(0.0, np.pi, n_scan + 1)
    R = profile.R(p)
    if not np.all(np.isfinite(R)):
        raise InvalidProfile(f"non-finite R values in profile {profile.name}")
    report = ValidationReport(profile=profile.name, k=k)

    report.checks.append(Check("positivity", bool(R.min() > 0), f"min R = {R.min():.6g}"))
    ends = np.array([profile.R(np.array(0.0)), profile.R(np.array(np.pi))], dtype=float)
    report.checks.append(Check("endpoint_values", bool(np.all(np.abs(ends - 1) <= tol)),
                               f"R(0)={ends[0]:.12g}, R(pi)={ends[1]:.12g}"))
    for m in range(1, k + 1):
        d = profile.derivative(m)
        vals = np.array([d(np.array(0.0)), d(np.array(np.pi))], dtype=float)
        scale = 1.0 if not profile.finite_difference else 1e4
        ok = bool(np.all(np.isfinite(vals)) and np.all(np.abs(vals) <= tol * scale))
        report.checks.append(Check(f"pole_derivative_m{m}", ok,
                                   f"R^({m})(0)={vals[0]:.3g}, R^({m})(pi)={vals[1]:.3g}"))

    witness = _chart_witness(profile, p)
    report.witness = witness
    detail = "no admissible a1..a4" if witness is None else "a=" + ",".join(f"{a:.4f}" for a in witness)
    report.checks.append(Check("chart_monotonicity", witness is not None, detail))
    return report


def _chart_witness(profile: SurfaceProfile, p: np.ndarray):
    R, dR = profile.R(p), profile.dR(p)
    dQ = dR * np.sin(p) + R * np.cos(p)   # d/dp2 (R sin p2)
    dZ = dR * np.cos(p) - R * np.sin(p)   # d/dp2 (R cos p2)
    half = np.pi / 2
    north = p < half
    south = p > half

    # largest a2 < pi/2 with dQ > 0 on [0, a2]
    bad = np.nonzero(north & (dQ <= 0))[0]
    i2 = (bad[0] - 1) if bad.size else np.nonzero(north)[0][-1]
    # smallest a3 > pi/2 with dQ < 0 on [a3, pi]
    bad = np.nonzero(south & (dQ >= 0))[0]
    i3 = (bad[-1] + 1) if bad.size else np.nonzero(south)[0][0]
    if i2 < 1 or i3 >= p.size - 1 or p[i2] >= half or p[i3] <= half:
        return None
    # connected run of dZ < 0 around the equator
    neg = dZ < 0
    ieq = np.searchsorted(p, half)
    if not neg[ieq]:
        return None
    lo = ieq
    while lo > 0 and neg[lo - 1]:
        lo -= 1
    hi = ieq
    while hi < p.size - 1 and neg[hi + 1]:
        hi += 1
    i1 = max(lo, 1)
    i4 = min(hi, p.size - 2)
    if not (i1 < i2 and i3 < i4):
        return None
    return (float(p[i1]), float(p[i2]), float(p[i3]), float(p[i4]))


# ---------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class MetricSamples:
    """Metric coefficients sampled at colatitude nodes."""

    p2: np.ndarray
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    sqrt_detg: np.ndarray
    dg1: np.ndarray
    dg2: np.ndarray

    @property
    def sqrt_g1(self) -> np.ndarray:
        return np.sin(self.p2) * self.R

    @property
    def sqrt_g2(self) -> np.ndarray:
        return np.sqrt(self.g2)


def build_metric(profile: SurfaceProfile, colat_nodes) -> MetricSamples:
    p2 = np.asarray(colat_nodes, dtype=float)
    if np.any(p2 <= 0.0) or np.any(p2 >= np.pi):
        raise PoleNode("colatitude nodes must lie strictly inside (0, pi)")
    R, dR, d2R = profile.R(p2), profile.dR(p2), profile.d2R(p2)
    s, c = np.sin(p2), np.cos(p2)
    g1 = s**2 * R**2
    g2 = R**2 + dR**2
    dg1 = 2 * s * c * R**2 + 2 * s**2 * R * dR
    dg2 = 2 * R * dR + 2 * dR * d2R
    return MetricSamples(p2=p2, R=R, dR=dR, d2R=d2R, g1=g1, g2=g2,
                         sqrt_detg=np.sqrt(g1 * g2), dg1=dg1, dg2=dg2)


# ---------------------------------------------------------------------------
# pointwise algebra on fields


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g:
            raise GridMismatch("fields live on different grids")
    return g


def dot(v, w):
    """Metric dot product ``g1 v1 w1 + g2 v2 w2``."""
    from .fields import ScalarField

    grid = _same_grid(v, w)
    return ScalarField(grid.g1 * v.comp1 * w.comp1 + grid.g2 * v.comp2 * w.comp2, grid)


def rotate_J(v):
    """Clockwise rotation: ``(v1, v2) -> (-sqrt(g2/g1) v2, sqrt(g1/g2) v1)``."""
    from .fields import VectorField

    grid = v.grid
    r = grid.sqrt_g2 / grid.sqrt_g1
    return VectorField(-r * v.comp2, v.comp1 / r, grid)


def area_integral(f, grid=None) -> float:
    """Quadrature of a scalar over the surface.

    ``f`` is a ScalarField, or a raw ``(N1, N2)`` array together with its grid.
    """
    if hasattr(f, "values"):
        values, grid = f.values, f.grid
    elif grid is None:
        raise TypeError("area_integral of a raw array needs the grid")
    else:
        values = np.asarray(f)
    return float(np.sum(values * grid.area_weights))
