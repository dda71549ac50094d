"""
Discrete fields on a surface of revolution and the calculus operators on them.

Longitude is sampled uniformly and handled by FFT.  Colatitude nodes are the
Gauss-Legendre points in ``x = cos(p2)`` so the poles are never sampled.

Per zonal wavenumber ``m`` a smooth scalar behaves like ``sin(p2)**(m % 2)``
times a smooth function of ``x`` near the poles, and the physical (unit-frame)
components of a smooth vector field have the opposite parity.  Colatitude
derivatives therefore use one of two dense matrices, ``D0`` for even and
``D1`` for odd quantities, both exact on polynomials in ``x`` after the
parity factor is divided out.  This takes the place of a pole filter.

``div`` is built as the exact discrete negative adjoint of ``grad`` in the
quadrature inner product, so ``<grad f, v> = -<f, div v>`` and the skewness of
the large operator hold to rounding for every grid function, not just for
band-limited ones.

Vector fields store coefficients of the coordinate basis ``(v_d1, v_d2)``.
Internally the operators work with physical components
``w1 = sqrt(g1) v1`` and ``w2 = sqrt(g2) v2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import eigh
from scipy.special import roots_legendre

from .errors import BadOrder, GaugeViolation, GridMismatch
from .geometry import SurfaceProfile, build_metric, sphere

__all__ = [
    "Grid", "ScalarField", "VectorField", "State", "Params", "HodgeParts",
    "inner", "state_weights", "J", "Jinv",
    "grad", "div", "curl", "laplacian_scalar", "inverse_laplacian",
    "laplacian_vector", "hodge", "dealias", "hk_norm", "l2_norm",
    "random_scalar", "random_vector", "random_state",
]


def _barycentric_diff(x: np.ndarray) -> np.ndarray:
    """Collocation differentiation matrix for Gauss-Legendre nodes ``x``."""
    n = x.size
    order = np.argsort(x)
    xa = x[order]
    _, wq = roots_legendre(n)
    lam = (-1.0) ** np.arange(n) * np.sqrt((1 - xa**2) * wq)
    bw = np.empty(n)
    bw[order] = lam
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    D = (bw[None, :] / bw[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


class Grid:
    """Tensor-product longitude/colatitude grid with cached 1-D operators."""

    def __init__(self, profile: SurfaceProfile | None = None, N1: int = 64, N2: int = 48,
                 m_max: int | None = None):
        if profile is None:
            profile = sphere()
        if N1 < 4 or N2 < 4:
            raise ValueError("grid needs N1 >= 4 and N2 >= 4")
        self.profile = profile
        self.N1, self.N2 = int(N1), int(N2)
        self.m_max = (self.N1 - 2) // 2 if m_max is None else int(m_max)
        if self.N1 < 2 * self.m_max + 2:
            raise ValueError("N1 must be at least 2*m_max + 2")

        xa, wa = roots_legendre(self.N2)
        self.x = xa[::-1].copy()           # north to south
        self.wx = wa[::-1].copy()
        self.p2 = np.arccos(self.x)
        self.p1 = 2 * np.pi * np.arange(self.N1) / self.N1
        self.metric = build_metric(profile, self.p2)

        self.sin = np.sqrt(1 - self.x**2)
        self.g1, self.g2 = self.metric.g1, self.metric.g2
        self.sqrt_g1 = self.sin * self.metric.R
        self.sqrt_g2 = np.sqrt(self.g2)
        # quadrature weight for the area element sqrt(g1 g2) dp2 = R sqrt(g2) dx
        self.col_weights = self.wx * self.metric.R * self.sqrt_g2
        self.area_weights = np.broadcast_to((2 * np.pi / self.N1) * self.col_weights,
                                            (self.N1, self.N2))

        self.M = self.N1 // 2 + 1
        self.m = np.arange(self.M)
        k = self.m.astype(float)
        if self.N1 % 2 == 0:
            k[-1] = 0.0                    # Nyquist mode carries no p1-derivative
        self.k = k
        # Parseval multiplicity of each rfft row
        mult = np.full(self.M, 2.0)
        mult[0] = 1.0
        if self.N1 % 2 == 0:
            mult[-1] = 1.0
        self.mult = mult

        Dx = _barycentric_diff(self.x)
        s = self.sin
        self.Dx = Dx
        self.D0 = -s[:, None] * Dx
        self.D1 = np.diag(self.x / s) - (s**2)[:, None] * Dx / s[None, :]
        self.shape = (self.N1, self.N2)

    # -- basic 2-D arrays -------------------------------------------------

    @cached_property
    def P1(self) -> np.ndarray:
        return np.broadcast_to(self.p1[:, None], self.shape)

    @cached_property
    def P2(self) -> np.ndarray:
        return np.broadcast_to(self.p2[None, :], self.shape)

    @property
    def area(self) -> float:
        return float(self.area_weights.sum())

    def same(self, other: "Grid") -> bool:
        return other is self

    # -- spectral transforms ---------------------------------------------

    def fwd(self, a: np.ndarray) -> np.ndarray:
        return np.fft.rfft(a, axis=0)

    def inv(self, c: np.ndarray) -> np.ndarray:
        return np.fft.irfft(c, n=self.N1, axis=0)

    def _rows(self, shift: int):
        par = (self.m + shift) % 2
        return np.nonzero(par == 0)[0], np.nonzero(par == 1)[0]

    def dth(self, c: np.ndarray, shift: int = 0) -> np.ndarray:
        """d/dp2 of spectral rows; ``shift=0`` scalar parity, ``shift=1`` vector."""
        ev, od = self._rows(shift)
        out = np.empty_like(c)
        out[ev] = c[ev] @ self.D0.T
        out[od] = c[od] @ self.D1.T
        return out

    def dth_T(self, c: np.ndarray, shift: int = 0) -> np.ndarray:
        """Transpose of ``dth`` acting row-wise (``D^T r``)."""
        ev, od = self._rows(shift)
        out = np.empty_like(c)
        out[ev] = c[ev] @ self.D0
        out[od] = c[od] @ self.D1
        return out

    # -- spectral calculus on physical components -------------------------

    def grad_spec(self, hc):
        w1 = 1j * self.k[:, None] * hc / self.sqrt_g1
        w2 = self.dth(hc, 0) / self.sqrt_g2
        return w1, w2

    def div_spec(self, w1, w2):
        c = self.col_weights
        return (1j * self.k[:, None] * w1 / self.sqrt_g1
                - self.dth_T(c * w2 / self.sqrt_g2, 0) / c)

    def curl_spec(self, w1, w2):
        # curl v = -div(J v), J(w1, w2) = (-w2, w1)
        return -self.div_spec(-w2, w1)

    # -- per-wavenumber Laplacian eigen-systems ---------------------------

    def _lap_key(self, row: int):
        return (int(self.m[row] % 2), float(self.k[row]))

    @cached_property
    def _lap_cache(self) -> dict:
        return {}

    def lap_eig(self, row: int):
        """Eigenpairs of ``-Laplacian`` on row ``row``: (lam, V) with V^T C V = I."""
        key = self._lap_key(row)
        cache = self._lap_cache
        if key not in cache:
            par, k = key
            D = self.D0 if par == 0 else self.D1
            c = self.col_weights
            A = np.diag(k**2 * c / self.g1) + D.T @ (D * (c / self.g2)[:, None])
            A = 0.5 * (A + A.T)
            lam, V = eigh(A, np.diag(c))
            if k == 0 and par == 0:
                lam[0] = 0.0  # constants
            cache[key] = (lam, V)
        return cache[key]

    def lap_spec(self, hc):
        w1, w2 = self.grad_spec(hc)
        return self.div_spec(w1, w2)

    def inv_lap_spec(self, fc):
        out = np.zeros_like(fc)
        c = self.col_weights
        for r in range(self.M):
            lam, V = self.lap_eig(r)
            coef = V.T @ (c * fc[r])
            inv = np.zeros_like(lam)
            nz = lam > 0
            inv[nz] = -1.0 / lam[nz]
            out[r] = V @ (inv * coef)
        return out

    def sobolev_sq(self, fc, s: float) -> float:
        """``||f||_0^2 + ||(-Lap)^{s/2} f||_0^2`` summed over rows."""
        c = self.col_weights
        total = 0.0
        for r in range(self.M):
            lam, V = self.lap_eig(r)
            coef = V.T @ (c * fc[r])
            wts = 1.0 + np.abs(lam) ** s if s > 0 else np.ones_like(lam)
            total += self.mult[r] * float(np.sum(wts * np.abs(coef) ** 2))
        return total * 2 * np.pi / self.N1 / self.N1

    # -- dealiasing ------------------------------------------------------

    @cached_property
    def _legendre_filters(self):
        cut = max(2, (2 * self.N2) // 3)
        n = np.arange(self.N2)
        P = npleg.legvander(self.x, self.N2 - 1) * np.sqrt((2 * n + 1) / 2)
        proj = P[:, :cut] @ (P[:, :cut].T * self.wx[None, :])
        s = self.sin
        F0 = proj
        F1 = s[:, None] * proj / s[None, :]
        return F0, F1

    def dealias_spec(self, c, shift: int):
        """2/3 truncation in p1; modal truncation in p2 (parity-aware)."""
        out = c.copy()
        out[self.m > self.N1 // 3] = 0.0
        if shift == 0:
            cw = self.col_weights
            cut = max(2, (2 * self.N2) // 3)
            for r in range(self.M):
                if not np.any(out[r]):
                    continue
                lam, V = self.lap_eig(r)
                coef = V.T @ (cw * out[r])
                coef[cut:] = 0.0
                out[r] = V @ coef
        else:
            F0, F1 = self._legendre_filters
            ev, od = self._rows(shift)
            out[ev] = out[ev] @ F0.T
            out[od] = out[od] @ F1.T
        return out


# ---------------------------------------------------------------------------
# field value types


def _check(a, b):
    if a.grid is not b.grid:
        raise GridMismatch("fields live on different grids")


@dataclass(eq=False)
class ScalarField:
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            self.values = np.broadcast_to(self.values, self.grid.shape).copy()

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(np.asarray(fn(grid.P1, grid.P2), dtype=float), grid)

    @classmethod
    def zonal(cls, grid: Grid, profile) -> "ScalarField":
        return cls(np.broadcast_to(np.asarray(profile, float)[None, :], grid.shape).copy(), grid)

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(np.zeros(grid.shape), grid)

    def spec(self):
        return self.grid.fwd(self.values)

    @classmethod
    def from_spec(cls, c, grid: Grid) -> "ScalarField":
        return cls(grid.inv(c), grid)

    def mean(self) -> float:
        return float(np.sum(self.values * self.grid.area_weights)) / self.grid.area

    def zonal_mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    def copy(self):
        return ScalarField(self.values.copy(), self.grid)

    def __add__(self, o):
        if isinstance(o, ScalarField):
            _check(self, o)
            return ScalarField(self.values + o.values, self.grid)
        return ScalarField(self.values + o, self.grid)

    def __sub__(self, o):
        if isinstance(o, ScalarField):
            _check(self, o)
            return ScalarField(self.values - o.values, self.grid)
        return ScalarField(self.values - o, self.grid)

    def __mul__(self, o):
        if isinstance(o, ScalarField):
            _check(self, o)
            return ScalarField(self.values * o.values, self.grid)
        return ScalarField(self.values * o, self.grid)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return ScalarField(-self.values, self.grid)


@dataclass(eq=False)
class VectorField:
    """Coefficients of ``v_d1`` and ``v_d2``."""

    comp1: np.ndarray
    comp2: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.comp1 = np.asarray(self.comp1, dtype=float)
        self.comp2 = np.asarray(self.comp2, dtype=float)

    @classmethod
    def from_physical(cls, w1, w2, grid: Grid) -> "VectorField":
        return cls(w1 / grid.sqrt_g1, w2 / grid.sqrt_g2, grid)

    def physical(self):
        g = self.grid
        return self.comp1 * g.sqrt_g1, self.comp2 * g.sqrt_g2

    def spec(self):
        w1, w2 = self.physical()
        return self.grid.fwd(w1), self.grid.fwd(w2)

    @classmethod
    def from_spec(cls, w1c, w2c, grid: Grid) -> "VectorField":
        return cls.from_physical(grid.inv(w1c), grid.inv(w2c), grid)

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(np.zeros(grid.shape), np.zeros(grid.shape), grid)

    def copy(self):
        return VectorField(self.comp1.copy(), self.comp2.copy(), self.grid)

    def __add__(self, o):
        _check(self, o)
        return VectorField(self.comp1 + o.comp1, self.comp2 + o.comp2, self.grid)

    def __sub__(self, o):
        _check(self, o)
        return VectorField(self.comp1 - o.comp1, self.comp2 - o.comp2, self.grid)

    def __mul__(self, o):
        # scalar number or ScalarField multiplier
        f = o.values if isinstance(o, ScalarField) else o
        return VectorField(self.comp1 * f, self.comp2 * f, self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(-self.comp1, -self.comp2, self.grid)


@dataclass(frozen=True)
class Params:
    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")

    @property
    def mu(self) -> float:
        return self.delta / self.eps


@dataclass(eq=False)
class State:
    u: VectorField
    h: ScalarField
    params: Params

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid, params: Params) -> "State":
        return cls(VectorField.zeros(grid), ScalarField.zeros(grid), params)

    def copy(self):
        return State(self.u.copy(), self.h.copy(), self.params)

    def with_params(self, params: Params) -> "State":
        return State(self.u, self.h, params)

    def __add__(self, o):
        return State(self.u + o.u, self.h + o.h, self.params)

    def __sub__(self, o):
        return State(self.u - o.u, self.h - o.h, self.params)

    def __mul__(self, a):
        return State(self.u * a, self.h * a, self.params)

    __rmul__ = __mul__

    def __neg__(self):
        return State(-self.u, -self.h, self.params)

    # flat vectors in coordinate components: [comp1, comp2, h]
    def flatten(self) -> np.ndarray:
        return np.concatenate([self.u.comp1.ravel(), self.u.comp2.ravel(), self.h.values.ravel()])

    @classmethod
    def unflatten(cls, vec, grid: Grid, params: Params) -> "State":
        n = grid.N1 * grid.N2
        vec = np.asarray(vec)
        return cls(VectorField(vec[:n].reshape(grid.shape), vec[n:2 * n].reshape(grid.shape), grid),
                   ScalarField(vec[2 * n:].reshape(grid.shape), grid), params)

    def inner(self, o) -> float:
        return inner(self.u, o.u) + inner(self.h, o.h)


def state_weights(grid: Grid) -> np.ndarray:
    """Diagonal of the quadrature weight matrix for flattened states."""
    a = grid.area_weights
    return np.concatenate([(a * grid.g1).ravel(), (a * grid.g2).ravel(), a.ravel()])


def inner(a, b) -> float:
    """L2 inner product of two scalar fields or two vector fields."""
    _check(a, b)
    w = a.grid.area_weights
    if isinstance(a, ScalarField):
        return float(np.sum(a.values * b.values * w))
    g = a.grid
    return float(np.sum((g.g1 * a.comp1 * b.comp1 + g.g2 * a.comp2 * b.comp2) * w))


# ---------------------------------------------------------------------------
# operators


def grad(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField.from_spec(*g.grad_spec(f.spec()), g)


def div(v: VectorField) -> ScalarField:
    g = v.grid
    return ScalarField.from_spec(g.div_spec(*v.spec()), g)


def curl(v: VectorField) -> ScalarField:
    g = v.grid
    return ScalarField.from_spec(g.curl_spec(*v.spec()), g)


def J(v: VectorField) -> VectorField:
    w1, w2 = v.physical()
    return VectorField.from_physical(-w2, w1, v.grid)


def Jinv(v: VectorField) -> VectorField:
    w1, w2 = v.physical()
    return VectorField.from_physical(w2, -w1, v.grid)


def laplacian_scalar(f: ScalarField) -> ScalarField:
    g = f.grid
    return ScalarField.from_spec(g.lap_spec(f.spec()), g)


def _gauge_tol(f: ScalarField) -> float:
    return 1e-9 * max(float(np.sum(np.abs(f.values) * f.grid.area_weights)), 1e-300)


def inverse_laplacian(f: ScalarField, check: bool = True) -> ScalarField:
    """Zero-mean solution of ``Lap u = f``; ``f`` must have zero global mean."""
    g = f.grid
    if check:
        total = float(np.sum(f.values * g.area_weights))
        if abs(total) > _gauge_tol(f):
            raise GaugeViolation(f"inverse Laplacian needs zero-mean input (integral {total:.3e})")
    return ScalarField.from_spec(g.inv_lap_spec(f.spec()), g)


def laplacian_vector(v: VectorField) -> VectorField:
    return grad(div(v)) + J(grad(curl(v)))


@dataclass
class HodgeParts:
    irr: VectorField
    inc: VectorField
    sigma1: ScalarField
    sigma2: ScalarField

    def __iter__(self):
        return iter((self.irr, self.inc, self.sigma1, self.sigma2))


def hodge(v: VectorField) -> HodgeParts:
    sigma1 = inverse_laplacian(div(v), check=False)
    sigma2 = inverse_laplacian(curl(v), check=False)
    irr = grad(sigma1)
    inc = Jinv(grad(inverse_laplacian(div(J(v)), check=False)))
    return HodgeParts(irr, inc, sigma1, sigma2)


def dealias(x):
    """Project a scalar, vector or state onto the resolved (2/3) band."""
    if isinstance(x, State):
        return State(dealias(x.u), dealias(x.h), x.params)
    g = x.grid
    if isinstance(x, ScalarField):
        return ScalarField.from_spec(g.dealias_spec(x.spec(), 0), g)
    w1, w2 = x.spec()
    return VectorField.from_spec(g.dealias_spec(w1, 1), g.dealias_spec(w2, 1), g)


def l2_norm(x) -> float:
    if isinstance(x, State):
        return float(np.sqrt(inner(x.u, x.u) + inner(x.h, x.h)))
    return float(np.sqrt(max(inner(x, x), 0.0)))


def hk_norm(x, k: float) -> float:
    """Sobolev norm.

    Scalars: ``(||f||_0^2 + ||(-Lap)^{k/2} f||_0^2)^{1/2}`` (plain L2 for k=0).
    Vectors (k >= 1): ``(||div v||_{k-1}^2 + ||curl v||_{k-1}^2)^{1/2}``.
    States: vector and scalar parts combined in quadrature.
    """
    if isinstance(x, ScalarField):
        return float(np.sqrt(x.grid.sobolev_sq(x.spec(), k)))
    if isinstance(x, VectorField):
        if k < 1:
            raise BadOrder(f"vector H^k norm needs k >= 1, got {k}")
        return float(np.sqrt(x.grid.sobolev_sq(div(x).spec(), k - 1)
                             + x.grid.sobolev_sq(curl(x).spec(), k - 1)))
    if isinstance(x, State):
        return float(np.hypot(hk_norm(x.u, k), hk_norm(x.h, k)))
    raise TypeError(type(x))


# ---------------------------------------------------------------------------
# band-limited random data


def _random_spec(grid: Grid, rng, degree: int, m_max: int | None = None, decay: float = 1.0):
    m_max = min(grid.m_max if m_max is None else m_max, degree, grid.M - 1)
    if grid.N1 % 2 == 0:
        m_max = min(m_max, grid.M - 2)
    c = np.zeros((grid.M, grid.N2), complex)
    s = grid.sin
    for m in range(m_max + 1):
        nmax = degree - m
        n = np.arange(nmax + 1)
        scale = (1.0 + n + m) ** (-decay)
        coef = rng.standard_normal(nmax + 1) * scale
        if m > 0:
            coef = coef + 1j * rng.standard_normal(nmax + 1) * scale
        c[m] = s**m * npleg.legval(grid.x, coef) * grid.N1 / 2
    return c


def random_scalar(grid: Grid, rng=None, degree: int = 8, amplitude: float = 1.0,
                  zero_mean: bool = True, m_max: int | None = None) -> ScalarField:
    """Smooth band-limited scalar: sum over m of sin(p2)^m P(cos p2) e^{i m p1}."""
    rng = np.random.default_rng(rng)
    f = ScalarField.from_spec(_random_spec(grid, rng, degree, m_max), grid)
    if zero_mean:
        f = f - f.mean()
    nrm = l2_norm(f)
    return f * (amplitude / nrm) if nrm > 0 else f


def random_vector(grid: Grid, rng=None, degree: int = 8, amplitude: float = 1.0,
                  m_max: int | None = None) -> VectorField:
    rng = np.random.default_rng(rng)
    s1 = random_scalar(grid, rng, degree + 1, m_max=m_max)
    s2 = random_scalar(grid, rng, degree + 1, m_max=m_max)
    v = grad(s1) + J(grad(s2))
    return v * (amplitude / l2_norm(v))


def random_state(grid: Grid, params: Params, rng=None, degree: int = 8,
                 amplitude: float = 1.0, m_max: int | None = None) -> State:
    rng = np.random.default_rng(rng)
    u = random_vector(grid, rng, degree, m_max=m_max)
    h = random_scalar(grid, rng, degree, m_max=m_max)
    s = State(u, h, params)
    return s * (amplitude / l2_norm(s))
