"""
Kernel of the large operator and the zonal projection onto it.

A state lies in the kernel exactly when its velocity is a zonal flow
``u = J grad Phi(p2)`` and its height is balanced against it,
``h = mu * Psi`` with ``Psi' = F Phi'``.  The projection keeps the zonal mean
of the incompressible velocity and rebuilds the balancing height.  It is not
L2-orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_legendre

from .errors import NotZonal
from .geometry import build_metric
from .fields import (
    Grid, ScalarField, VectorField, State, Params,
    grad, div, J, hodge, hk_norm, l2_norm, inverse_laplacian,
)
from .operators import CoriolisProfile, apply_L


@dataclass(frozen=True)
class ZonalProfilePair:
    """Stream profile ``Phi`` and its balancing height profile ``Psi``.

    ``Psi`` satisfies ``Psi' = F Phi'`` and ``int_0^pi g1 g2 Psi dp2 = 0``.
    """

    Phi: np.ndarray
    Psi: np.ndarray
    grid: Grid

    @classmethod
    def from_phi(cls, Phi, cor: CoriolisProfile) -> "ZonalProfilePair":
        grid = cor.grid
        Phi = np.asarray(Phi, dtype=float)
        return cls(Phi=Phi, Psi=balance_profile(Phi, cor), grid=grid)

    def normalization(self) -> float:
        """Quadrature of ``int_0^pi g1 g2 Psi dp2``."""
        return _g1g2_integral(self.grid, self.Psi)

    def slope_residual(self, cor: CoriolisProfile) -> float:
        """Max of ``|Psi' - F Phi'|`` relative to ``max |F Phi'|``."""
        g = self.grid
        dPsi = g.D0 @ self.Psi
        rhs = cor.F * (g.D0 @ self.Phi)
        return float(np.max(np.abs(dPsi - rhs)) / max(np.max(np.abs(rhs)), 1e-300))


def _p2_rule(grid: Grid):
    """Gauss rule in ``p2`` on ``(0, pi)`` carrying the weight ``g1 g2``.

    In ``x = cos p2`` the weight has square-root endpoint singularities, so
    the collocation nodes would only give algebraic accuracy.
    """
    t, w = roots_legendre(2 * grid.N2 + 16)
    p = 0.5 * np.pi * (t + 1)
    m = build_metric(grid.profile, p)
    return np.cos(p), 0.5 * np.pi * w * m.g1 * m.g2


def _g1g2_integral(grid: Grid, f: np.ndarray) -> float:
    """``int_0^pi g1 g2 f dp2`` for ``f`` sampled at the colatitude nodes."""
    xq, wq = _p2_rule(grid)
    coef = npleg.legfit(grid.x, f, grid.N2 - 1)
    return float(np.sum(wq * npleg.legval(xq, coef)))


def _as_profile(grid: Grid, Phi) -> np.ndarray:
    if isinstance(Phi, ScalarField):
        vals = Phi.values
        spread = np.max(np.abs(vals - vals.mean(axis=0)))
        if spread > 1e-12 * max(np.max(np.abs(vals)), 1.0):
            raise NotZonal(f"profile varies with longitude (spread {spread:.3g})")
        return vals.mean(axis=0)
    arr = np.asarray(Phi, dtype=float)
    if arr.shape == (grid.N2,):
        return arr
    if arr.shape == grid.shape:
        return _as_profile(grid, ScalarField(arr, grid))
    raise NotZonal(f"expected a zonal profile of length {grid.N2}, got shape {arr.shape}")


def balance_profile(Phi, cor: CoriolisProfile) -> np.ndarray:
    """Solve ``Psi' = F Phi'`` with ``int g1 g2 Psi dp2 = 0``.

    Works in ``x = cos(p2)``: ``dPsi/dx = F dPhi/dx``.  The right-hand side is
    interpolated by its Legendre series at the Gauss nodes and integrated
    exactly, so the antiderivative is exact for polynomial data.
    """
    grid = cor.grid
    Phi = _as_profile(grid, Phi)
    rhs = cor.F * (grid.Dx @ Phi)
    coef = npleg.legint(npleg.legfit(grid.x, rhs, grid.N2 - 1))
    # the constant is fixed by the weighted-mean condition
    xq, wq = _p2_rule(grid)
    shift = np.sum(wq * npleg.legval(xq, coef)) / np.sum(wq)
    return npleg.legval(grid.x, coef) - shift


def zonal_mean_velocity(v: VectorField, use_incompressible: bool = True) -> VectorField:
    """Zonal mean of the ``v_d1`` component of the incompressible part of ``v``.

    On each circle ``g1`` is constant, so the circulation ratio reduces to a
    longitude average of ``comp1``.
    """
    src = hodge(v).inc if use_incompressible else v
    c1 = src.comp1.mean(axis=0)
    g = v.grid
    return VectorField(np.broadcast_to(c1, g.shape).copy(), np.zeros(g.shape), g)


def _balance_height(ut: VectorField, cor: CoriolisProfile, params: Params) -> ScalarField:
    f = div(J(ut) * cor.field())
    return inverse_laplacian(f, check=False) * (-params.mu)


def project_kernel(s: State, cor: CoriolisProfile) -> State:
    """``(u~, -mu Lap^{-1} div(F J u~))``."""
    ut = zonal_mean_velocity(s.u)
    return State(ut, _balance_height(ut, cor, s.params), s.params)


def build_kernel_state(Phi, params: Params, cor: CoriolisProfile) -> State:
    """Kernel element ``(J grad Phi, mu Psi)`` for a zonal stream profile.

    The height is shifted to zero area mean.  The weighted normalisation of
    ``Psi`` is kept in :class:`ZonalProfilePair`; only the constant differs.
    """
    grid = cor.grid
    Phi = _as_profile(grid, Phi)
    pair = ZonalProfilePair.from_phi(Phi, cor)
    u = J(grad(ScalarField.zonal(grid, Phi)))
    h = ScalarField.zonal(grid, pair.Psi) * params.mu
    return State(u, h - h.mean(), params)


@dataclass
class KernelDistanceReport:
    k: int
    lhs_u: float
    lhs_h: float
    rhs: float
    inc_distance: float
    inc_forcing: float
    tol: float = 1e-9

    @property
    def lhs(self) -> float:
        return self.lhs_u + self.lhs_h

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs <= self.tol else np.inf)

    @property
    def inc_ratio(self) -> float:
        """``||u_inc - u~||_k / ||div(F u_inc)||_{k+1}``."""
        if self.inc_forcing > 0:
            return self.inc_distance / self.inc_forcing
        return 0.0 if self.inc_distance <= self.tol else np.inf

    @property
    def inconsistent(self) -> bool:
        """Set when ``L s`` vanishes but ``s`` is measurably off the kernel."""
        return self.rhs <= self.tol and self.lhs > self.tol

    def as_dict(self) -> dict:
        return {"k": self.k, "lhs": self.lhs, "lhs_u": self.lhs_u, "lhs_h": self.lhs_h,
                "rhs": self.rhs, "ratio": self.ratio, "inc_ratio": self.inc_ratio,
                "inconsistent": int(self.inconsistent)}


def kernel_distance_report(s: State, cor: CoriolisProfile, k: int = 1,
                           tol: float = 1e-8) -> KernelDistanceReport:
    """Compare the distance of ``s`` from its projection with ``||L s||_{k+2}``.

    ``tol`` is relative to ``||s||_{k+2}``.
    """
    params = s.params
    tol = tol * max(hk_norm(s.u, max(k, 1) + 2) + hk_norm(s.h, k + 2), 1e-300)
    hp = hodge(s.u)
    ut = zonal_mean_velocity(s.u)
    du = s.u - ut
    bal = s.h * (1.0 / params.mu) + inverse_laplacian(div(J(ut) * cor.field()), check=False)
    rhs = hk_norm(apply_L(s, cor), k + 2)
    inc_forcing = hk_norm(div(hp.inc * cor.field()), k + 1)
    return KernelDistanceReport(
        k=k,
        lhs_u=hk_norm(du, k) if k >= 1 else l2_norm(du),
        lhs_h=hk_norm(bal, k + 1),
        rhs=rhs,
        inc_distance=hk_norm(hp.inc - ut, k) if k >= 1 else l2_norm(hp.inc - ut),
        inc_forcing=inc_forcing,
        tol=tol,
    )


def random_zonal_profile(grid: Grid, rng=None, degree: int = 6) -> np.ndarray:
    """Smooth zonal stream profile: a random polynomial in ``cos(p2)``."""
    rng = np.random.default_rng(rng)
    coef = rng.standard_normal(degree + 1) / (1.0 + np.arange(degree + 1))
    coef[0] = 0.0
    return npleg.legval(grid.x, coef)
