"""
The large operator, the zero-order corrector and the commutator algebra.

    L_d (u, h) = (grad h, div u)
    L_0 (u, h) = (F J u, 0)
    L          = L_d / delta + L_0 / eps

Every commutator below is evaluated by composing the constituent discrete
operators on sampled fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import DegenerateInput
from .fields import (
    Grid, ScalarField, VectorField, State, Params,
    grad, div, curl, J, Jinv, laplacian_scalar, laplacian_vector,
    hk_norm, l2_norm, random_state, random_vector, random_scalar, hodge, inner, dealias,
)
from .geometry import dot


# ---------------------------------------------------------------------------
# Coriolis profiles


@dataclass(frozen=True)
class CoriolisProfile:
    """Zonal Coriolis factor sampled at the colatitude nodes of ``grid``."""

    name: str
    F: np.ndarray
    dF: np.ndarray
    C_F: float
    grid: Grid
    perturbation: float = 0.0

    def field(self) -> ScalarField:
        return ScalarField.zonal(self.grid, self.F)

    def defect_field(self) -> ScalarField:
        """``((dF) sqrt(g1 g2) - C_F g1 g2) / g2``."""
        g = self.grid
        vals = (self.dF * g.metric.sqrt_detg - self.C_F * g.g1 * g.g2) / g.g2
        return ScalarField.zonal(g, vals)

    def defect_norm(self, k: int = 3) -> float:
        return hk_norm(self.defect_field(), k)

    def C_F_prime(self, eps: float, k: int = 3) -> float:
        return self.defect_norm(k) / eps


def _area_density(grid: Grid, theta):
    """``sqrt(g1 g2)`` as a function of colatitude (vectorised)."""
    prof = grid.profile
    R, dR = prof.R(theta), prof.dR(theta)
    return np.sin(theta) * R * np.sqrt(R**2 + dR**2)


def _cumulative_area(grid: Grid, theta: np.ndarray, order: int = 128) -> np.ndarray:
    """``int_0^theta sqrt(g1 g2) dp2`` by per-node Gauss-Legendre quadrature."""
    xq, wq = roots_legendre(order)
    out = np.empty_like(theta)
    for i, t in enumerate(theta):
        nodes = 0.5 * t * (xq + 1)
        out[i] = 0.5 * t * np.sum(wq * _area_density(grid, nodes))
    return out


def _exact_constant(grid: Grid) -> float:
    total = _cumulative_area(grid, np.array([np.pi]))[0]
    return -2.0 / total


def coriolis_cos(grid: Grid) -> CoriolisProfile:
    """``F = cos p2``; the exact case on the unit sphere with ``C_F = -1``."""
    p = grid.p2
    return CoriolisProfile("cos", np.cos(p), -np.sin(p), _exact_constant(grid), grid)


def coriolis_exact(grid: Grid) -> CoriolisProfile:
    """``dF/dp2 = C_F sqrt(g1 g2)`` with ``F(0) = 1`` and ``F(pi) = -1``."""
    C = _exact_constant(grid)
    F = 1.0 + C * _cumulative_area(grid, grid.p2)
    dF = C * grid.metric.sqrt_detg
    return CoriolisProfile("exact", F, dF, C, grid)


def eta_default(p2):
    return np.sin(p2) ** 2 * np.cos(p2)


def deta_default(p2):
    s, c = np.sin(p2), np.cos(p2)
    return 2 * s * c**2 - s**3


def coriolis_perturbed(grid: Grid, amplitude: float, eta=eta_default, deta=deta_default) -> CoriolisProfile:
    """Exact-case profile plus ``amplitude * eta(p2)``; eta vanishes at both poles."""
    base = coriolis_exact(grid)
    p = grid.p2
    return CoriolisProfile(f"perturbed:{amplitude:g}", base.F + amplitude * eta(p),
                           base.dF + amplitude * deta(p), base.C_F, grid, amplitude)


def parse_coriolis(spec: str, grid: Grid) -> CoriolisProfile:
    head, _, rest = spec.strip().partition(":")
    if head == "cos":
        return coriolis_cos(grid)
    if head == "exact":
        return coriolis_exact(grid)
    if head == "perturbed":
        return coriolis_perturbed(grid, float(rest))
    raise ValueError(f"unknown Coriolis spec {spec!r}")


# ---------------------------------------------------------------------------
# the large operator


def apply_Lpartial(s: State) -> State:
    return State(grad(s.h), div(s.u), s.params)


def apply_L0(s: State, cor: CoriolisProfile) -> State:
    return State(J(s.u) * cor.F, ScalarField.zeros(s.grid), s.params)


def apply_L(s: State, cor: CoriolisProfile) -> State:
    p = s.params
    return apply_Lpartial(s) * (1.0 / p.delta) + apply_L0(s, cor) * (1.0 / p.eps)


class SpectralL:
    """The large operator on spectral rows of physical components.

    Operates on tuples ``(w1c, w2c, hc)`` of shape ``(M, N2)``; every zonal
    wavenumber is independent.
    """

    def __init__(self, grid: Grid, cor: CoriolisProfile, params: Params):
        self.grid, self.cor, self.params = grid, cor, params

    def partial(self, w1, w2, h):
        g = self.grid
        gw1, gw2 = g.grad_spec(h)
        return gw1, gw2, g.div_spec(w1, w2)

    def zero(self, w1, w2, h):
        F = self.cor.F
        return -F * w2, F * w1, np.zeros_like(h)

    def __call__(self, w1, w2, h, scale: float = 1.0):
        p = self.params
        a = self.partial(w1, w2, h)
        b = self.zero(w1, w2, h)
        return tuple(scale * (x / p.delta + y / p.eps) for x, y in zip(a, b))

    def row_matrix(self, row: int) -> np.ndarray:
        """Dense ``3 N2 x 3 N2`` block of L for one rfft row."""
        g = self.grid
        n = g.N2
        out = np.zeros((3 * n, 3 * n), complex)
        for j in range(3 * n):
            e = [np.zeros((g.M, n), complex) for _ in range(3)]
            e[j // n][row, j % n] = 1.0
            res = self(*e)
            out[:, j] = np.concatenate([r[row] for r in res])
        return out


def state_spec(s: State):
    w1c, w2c = s.u.spec()
    return w1c, w2c, s.h.spec()


def state_from_spec(w1c, w2c, hc, grid: Grid, params: Params) -> State:
    return State(VectorField.from_spec(w1c, w2c, grid), ScalarField.from_spec(hc, grid), params)


# ---------------------------------------------------------------------------
# corrector


@dataclass(frozen=True)
class CorrectorCoeffs:
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def from_coriolis(cls, cor: CoriolisProfile, params: Params) -> "CorrectorCoeffs":
        mu = params.mu
        return cls(a=mu**2 * cor.F**2, b=2 * mu * cor.F)


def _Jgrad_zonal(grid: Grid, b: np.ndarray) -> VectorField:
    return J(grad(ScalarField.zonal(grid, b)))


def apply_N_di(s: State, coeffs: CorrectorCoeffs) -> State:
    return State(s.u * coeffs.a, s.h * coeffs.a, s.params)


def apply_N_ad(s: State, coeffs: CorrectorCoeffs) -> State:
    jb = _Jgrad_zonal(s.grid, coeffs.b)
    return State(jb * s.h, dot(jb, s.u), s.params)


def apply_N(s: State, coeffs: CorrectorCoeffs) -> State:
    return apply_N_di(s, coeffs) + apply_N_ad(s, coeffs)


def apply_Lap(s: State) -> State:
    return State(laplacian_vector(s.u), laplacian_scalar(s.h), s.params)


def commutator(A, B, s: State) -> State:
    """``[A, B] s = A(B s) - B(A s)`` for callables on states."""
    return A(B(s)) - B(A(s))


def corrected_commutator(s: State, cor: CoriolisProfile, coeffs: CorrectorCoeffs) -> State:
    """``[Lap - N, L] s``."""
    def P(x):
        return apply_Lap(x) - apply_N(x, coeffs)

    return commutator(P, lambda x: apply_L(x, cor), s)


def commutator_defect(s: State, cor: CoriolisProfile, coeffs: CorrectorCoeffs | None = None,
                      k: int = 3, band_limit: bool = True) -> float:
    """``||[Lap - N, L] s||_k / ||u||_k``.

    With ``band_limit`` the commutator is projected onto the resolved band
    before the norm is taken.  For band-limited ``s`` this removes nothing
    but rounding noise in the top modes, which the H^k weights would
    otherwise amplify by up to ``lam_max**(k/2)``.
    """
    if coeffs is None:
        coeffs = CorrectorCoeffs.from_coriolis(cor, s.params)
    nu = hk_norm(s.u, k)
    if nu == 0:
        raise DegenerateInput("velocity has zero H^k norm")
    c = corrected_commutator(s, cor, coeffs)
    if band_limit:
        c = dealias(c)
    return hk_norm(c, k) / nu


def commutator_remainder(u: VectorField, cor: CoriolisProfile, k: int = 3,
                         band_limit: bool = True) -> float:
    """``||[Lap, F J] u - 2 A^s u||_k / ||u||_k``; equals eps times the
    velocity part of the corrected commutator."""
    nu = hk_norm(u, k)
    if nu == 0:
        raise DegenerateInput("velocity has zero H^k norm")
    r = lap_FJ_commutator(u, cor) - apply_As(u, cor) * 2.0
    if band_limit:
        r = dealias(r)
    return hk_norm(r, k) / nu


# ---------------------------------------------------------------------------
# commutator algebra of [Lap, F J]


def _gradF(cor: CoriolisProfile) -> VectorField:
    return grad(cor.field())


def apply_A(v: VectorField, cor: CoriolisProfile) -> VectorField:
    """``A v = (J grad F) div v``."""
    return J(_gradF(cor)) * div(v)


def apply_Astar(v: VectorField, cor: CoriolisProfile) -> VectorField:
    """``A* v = grad((grad F) . (J v))``."""
    return grad(dot(_gradF(cor), J(v)))


def apply_As(v: VectorField, cor: CoriolisProfile) -> VectorField:
    return apply_A(v, cor) + apply_Astar(v, cor)


def conjJ(op):
    """``C_J(op) = J^{-1} op J``."""
    return lambda v, *a: Jinv(op(J(v), *a))


def apply_conjJ(opname: str, v: VectorField, cor: CoriolisProfile) -> VectorField:
    ops = {"A": apply_A, "Astar": apply_Astar, "As": apply_As}
    return conjJ(ops[opname])(v, cor)


def lap_FJ_commutator(u: VectorField, cor: CoriolisProfile) -> VectorField:
    """``[Lap, F J] u``."""
    F = cor.F
    return laplacian_vector(J(u) * F) - J(laplacian_vector(u)) * F


def lap_FJ_identity_residual(u: VectorField, cor: CoriolisProfile) -> VectorField:
    """``[Lap, F J] u - (1 + C_J)(A^s) u``."""
    As = apply_As(u, cor)
    return lap_FJ_commutator(u, cor) - As - apply_conjJ("As", u, cor)


def apply_G(sigma: ScalarField, cor: CoriolisProfile) -> ScalarField:
    """``G = grad^* (A + A^*) grad = -div (A^s grad)``."""
    return -div(apply_As(grad(sigma), cor))


def apply_H(sigma: ScalarField, cor: CoriolisProfile) -> ScalarField:
    """``H = grad^* (J A + (J A)^*) grad`` with ``(J A)^* = -A^* J``."""
    gs = grad(sigma)
    return -div(J(apply_A(gs, cor)) - apply_Astar(J(gs), cor))


# ---------------------------------------------------------------------------
# identity suite


@dataclass
class IdentityRow:
    name: str
    measured: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)


def _rel(a, b) -> float:
    return l2_norm(a) / max(l2_norm(b), 1e-300)


def verify_operators(grid: Grid, cor: CoriolisProfile, params: Params, seed: int = 0,
                     degree: int | None = None, n_fields: int = 5) -> list[IdentityRow]:
    """Run the operator identities on band-limited random fields."""
    rng = np.random.default_rng(seed)
    degree = degree if degree is not None else max(4, grid.N2 // 4)
    worst = {}

    def record(name, val, tol):
        worst[name] = (max(worst.get(name, (0.0, tol))[0], val), tol)

    for _ in range(n_fields):
        f = random_scalar(grid, rng, degree)
        v = random_vector(grid, rng, degree)
        lap = laplacian_scalar(f)
        record("div_grad_eq_lap", _rel(div(grad(f)) - lap, lap), 1e-8)
        record("curl_Jgrad_eq_lap", _rel(curl(J(grad(f))) - lap, lap), 1e-8)
        record("curl_grad_zero", l2_norm(curl(grad(f))) / hk_norm(f, 2), 1e-8)
        record("div_Jgrad_zero", l2_norm(div(J(grad(f)))) / hk_norm(f, 2), 1e-8)
        lhs = inner(grad(f), v)
        record("grad_div_adjoint", abs(lhs + inner(f, div(v))) / (l2_norm(grad(f)) * l2_norm(v)), 1e-8)
        hp = hodge(v)
        record("hodge_reconstruction", _rel(v - hp.irr - hp.inc, v), 1e-8)
        record("hodge_orthogonality", abs(inner(hp.irr, hp.inc)) / l2_norm(v) ** 2, 1e-8)
        record("lap_FJ_identity", l2_norm(lap_FJ_identity_residual(v, cor)) / hk_norm(v, 2), 1e-7)
        s = random_state(grid, params, rng, degree)
        Ls = apply_L(s, cor)
        s2 = random_state(grid, params, rng, degree)
        scale = l2_norm(Ls) * l2_norm(s2)
        record("L_skew", abs(Ls.inner(s2) + s.inner(apply_L(s2, cor))) / scale, 1e-9)
        coeffs = CorrectorCoeffs.from_coriolis(cor, params)
        Ns = apply_N(s, coeffs)
        record("N_selfadjoint", abs(Ns.inner(s2) - s.inner(apply_N(s2, coeffs))) / (l2_norm(Ns) * l2_norm(s2)), 1e-9)
        c0 = commutator(lambda x: apply_N_di(x, coeffs), lambda x: apply_L0(x, cor), s)
        record("N_di_L0_commute", l2_norm(c0) / l2_norm(s), 1e-12)
        cad = commutator(lambda x: apply_N_ad(x, coeffs), apply_Lpartial, s)
        record("N_ad_Ld_h_component", l2_norm(cad.h) / hk_norm(s.u, 1), 1e-8)
    return [IdentityRow(n, *worst[n]) for n in worst]

