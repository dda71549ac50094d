"""
Time integration of the rotating shallow water system

    d/dt (u, h) + B(u, h) + L (u, h) = 0,
    B(u, h) = (grad_u u, div(h u)).

Two steppers are provided.  ``RK4`` is classical explicit Runge-Kutta and
must resolve the fast waves of L.  ``IMEX`` is an integrating-factor RK4
(Lawson): L is skew and independent across zonal wavenumbers, so its exact
propagator is diagonalized once per wavenumber and only B is stepped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .errors import BlowupDetected, ConfigError
from .fields import Grid, ScalarField, VectorField, State, Params, hk_norm, l2_norm
from .operators import CoriolisProfile, SpectralL, apply_L, state_spec, state_from_spec

# stability radius of classical RK4 on the imaginary axis
RK4_IMAG_LIMIT = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class ChristoffelSamples:
    """Nonzero Christoffel symbols of ``diag(g1, g2)`` at the colatitude nodes.

    ``G1_12 = G1_21 = g1'/(2 g1)``, ``G2_11 = -g1'/(2 g2)``, ``G2_22 = g2'/(2 g2)``.
    """

    G1_12: np.ndarray
    G2_11: np.ndarray
    G2_22: np.ndarray

    @classmethod
    def from_grid(cls, grid: Grid) -> "ChristoffelSamples":
        m = grid.metric
        return cls(G1_12=m.dg1 / (2 * m.g1), G2_11=-m.dg1 / (2 * m.g2), G2_22=m.dg2 / (2 * m.g2))

    def parallel_curvature(self, grid: Grid) -> np.ndarray:
        """Geodesic curvature of the circles of latitude, ``G1_12 / sqrt(g2)``."""
        return self.G1_12 / grid.sqrt_g2


def _phys_derivs(grid: Grid, w: np.ndarray):
    """``d/dp1`` and ``d/dp2`` of a physical vector component."""
    c = grid.fwd(w)
    d1 = grid.inv(1j * grid.k[:, None] * c)
    d2 = grid.inv(grid.dth(c, 1))
    return d1, d2


def covariant_derivative(u: VectorField, v: VectorField, chris: ChristoffelSamples | None = None) -> VectorField:
    """``grad_u v`` in the coordinate basis.

    Evaluated in the orthonormal frame ``(v_d1/sqrt(g1), v_d2/sqrt(g2))``,
    where the only connection coefficient is the curvature ``kappa`` of the
    latitude circles:

        (grad_u v)_1 = u(w1) + kappa a1 w2,   (grad_u v)_2 = u(w2) - kappa a1 w1

    with ``a``, ``w`` the frame components of ``u`` and ``v``.
    """
    g = u.grid
    chris = chris or ChristoffelSamples.from_grid(g)
    kappa = chris.parallel_curvature(g)
    a1, a2 = u.physical()
    w1, w2 = v.physical()
    d11, d21 = _phys_derivs(g, w1)
    d12, d22 = _phys_derivs(g, w2)
    r1, r2 = a1 / g.sqrt_g1, a2 / g.sqrt_g2
    c1 = r1 * d11 + r2 * d21 + kappa * a1 * w2
    c2 = r1 * d12 + r2 * d22 - kappa * a1 * w1
    return VectorField.from_physical(c1, c2, g)


def _dealias_vector(v: VectorField) -> VectorField:
    g = v.grid
    w1, w2 = v.spec()
    return VectorField.from_spec(g.dealias_spec(w1, 1), g.dealias_spec(w2, 1), g)


def nonlinearity_B(s: State, chris: ChristoffelSamples | None = None, dealias: bool = True) -> State:
    """``(grad_u u, u . grad h + h div u)``.

    The scalar part is evaluated in flux form ``div(h u)`` so that its area
    integral vanishes exactly on the grid.
    """
    g = s.grid
    adv = covariant_derivative(s.u, s.u, chris)
    w1, w2 = s.u.physical()
    hc = g.div_spec(g.fwd(s.h.values * w1), g.fwd(s.h.values * w2))
    if dealias:
        adv = _dealias_vector(adv)
        hc = g.dealias_spec(hc, 0)
    return State(adv, ScalarField.from_spec(hc, g), s.params)


def rhs(s: State, cor: CoriolisProfile, chris: ChristoffelSamples | None = None,
        nonlinear: bool = True) -> State:
    """``-B(s) - L s``."""
    out = -apply_L(s, cor)
    if nonlinear:
        out = out - nonlinearity_B(s, chris)
    return out


def energy(s: State) -> float:
    """``<u, u> + <h, h>``; conserved by the linear flow."""
    return l2_norm(s) ** 2


# ---------------------------------------------------------------------------
# exact propagator of L


class LinearPropagator:
    """``exp(-t L)`` applied row by row in spectral space.

    Each rfft row of ``L`` is skew-adjoint for the column-weighted inner
    product, so ``i C^{1/2} A C^{-1/2}`` is Hermitian and ``eigh`` gives a
    unitary diagonalization.
    """

    def __init__(self, grid: Grid, cor: CoriolisProfile, params: Params):
        self.grid, self.params = grid, params
        self.op = SpectralL(grid, cor, params)
        n = grid.N2
        sw = np.sqrt(np.tile(grid.col_weights, 3))
        self._sw = sw
        self._eig = []
        for r in range(grid.M):
            A = self.op.row_matrix(r)
            H = 1j * (sw[:, None] * A / sw[None, :])
            H = 0.5 * (H + H.conj().T)
            lam, U = eigh(H)
            # A = C^{-1/2} (-i H) C^{1/2}, so L has eigenvalues -i lam
            self._eig.append((lam, U))
        self._n = n

    @property
    def max_frequency(self) -> float:
        return float(max(np.max(np.abs(lam)) for lam, _ in self._eig))

    def apply_spec(self, spec, t: float):
        w1, w2, h = spec
        n = self._n
        out = [np.empty_like(w1), np.empty_like(w2), np.empty_like(h)]
        for r, (lam, U) in enumerate(self._eig):
            v = np.concatenate([w1[r], w2[r], h[r]]) * self._sw
            # exp(-t L) = C^{-1/2} U exp(i t lam) U^H C^{1/2}
            v = U @ (np.exp(1j * t * lam) * (U.conj().T @ v)) / self._sw
            out[0][r], out[1][r], out[2][r] = v[:n], v[n:2 * n], v[2 * n:]
        return tuple(out)

    def __call__(self, s: State, t: float) -> State:
        spec = self.apply_spec(state_spec(s), t)
        return state_from_spec(*spec, self.grid, s.params)


def max_linear_frequency(grid: Grid, cor: CoriolisProfile, params: Params) -> float:
    """Largest ``|eigenvalue|`` of L on the grid."""
    return LinearPropagator(grid, cor, params).max_frequency


# ---------------------------------------------------------------------------
# integration


@dataclass
class IntegratorConfig:
    dt: float
    t_end: float
    scheme: str = "RK4"
    stride: int = 1
    safety: float = 0.9
    ceiling: float = 1e6
    norm_orders: tuple = (3,)
    nonlinear: bool = True

    def validate(self, max_freq: float | None = None) -> None:
        bad = []
        if not self.dt > 0:
            bad.append(f"dt must be positive (got {self.dt})")
        if not self.t_end >= 0:
            bad.append(f"t_end must be nonnegative (got {self.t_end})")
        if self.stride < 1:
            bad.append(f"stride must be >= 1 (got {self.stride})")
        if self.scheme not in ("RK4", "IMEX"):
            bad.append(f"unknown scheme {self.scheme!r}")
        if (self.scheme == "RK4" and max_freq is not None and self.dt > 0
                and self.dt * max_freq > self.safety * RK4_IMAG_LIMIT):
            bad.append(f"dt={self.dt:.3g} violates the explicit stability limit "
                       f"{self.safety * RK4_IMAG_LIMIT / max_freq:.3g}")
        if bad:
            raise ConfigError(bad)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def stable_dt(grid: Grid, cor: CoriolisProfile, params: Params, safety: float = 0.9) -> float:
    """Largest explicit RK4 step that keeps ``dt * |lambda(L)|`` inside the stability region."""
    return safety * RK4_IMAG_LIMIT / max_linear_frequency(grid, cor, params)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diag_t: list = field(default_factory=list)
    h_mean: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)
    status: str = "ok"

    def diagnostics_table(self) -> np.ndarray:
        cols = [self.diag_t, self.h_mean, self.energy] + [self.norms[k] for k in sorted(self.norms)]
        return np.column_stack(cols) if self.diag_t else np.zeros((0, 3 + len(self.norms)))

    def max_norm(self, k) -> float:
        return float(np.max(self.norms[k]))


def _record(traj: Trajectory, t: float, s: State, orders) -> float:
    traj.diag_t.append(t)
    traj.h_mean.append(s.h.mean())
    traj.energy.append(energy(s))
    worst = 0.0
    for k in orders:
        v = l2_norm(s) if k == 0 else hk_norm(s, k)
        traj.norms.setdefault(k, []).append(v)
        worst = max(worst, v)
    return worst


def _rk4_step(f, s: State, dt: float) -> State:
    k1 = f(s)
    k2 = f(s + k1 * (dt / 2))
    k3 = f(s + k2 * (dt / 2))
    k4 = f(s + k3 * dt)
    return s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6)


def _lawson_step(prop: LinearPropagator, nl, s: State, dt: float) -> State:
    half = lambda x: prop(x, dt / 2)
    full = lambda x: prop(x, dt)
    k1 = nl(s)
    k2 = nl(half(s + k1 * (dt / 2)))
    k3 = nl(half(s) + k2 * (dt / 2))
    k4 = nl(full(s) + half(k3) * dt)
    return full(s + k1 * (dt / 6)) + half(k2 + k3) * (dt / 3) + k4 * (dt / 6)


def integrate(s0: State, cor: CoriolisProfile, cfg: IntegratorConfig,
              propagator: LinearPropagator | None = None) -> Trajectory:
    """Advance ``s0`` to ``cfg.t_end``.

    Snapshots are kept every ``cfg.stride`` steps (and at the final time);
    diagnostics are recorded at the same instants.  A norm above
    ``cfg.ceiling`` or a non-finite value raises :class:`BlowupDetected`
    carrying the partial trajectory.
    """
    grid = s0.grid
    chris = ChristoffelSamples.from_grid(grid)
    if cfg.scheme == "IMEX":
        prop = propagator or LinearPropagator(grid, cor, s0.params)
        cfg.validate()
    else:
        prop = None
        cfg.validate(max_linear_frequency(grid, cor, s0.params))

    if cfg.nonlinear:
        def nl(x):
            return -nonlinearity_B(x, chris)
    else:
        def nl(x):
            return State.zeros(grid, x.params)

    def full_rhs(x):
        return rhs(x, cor, chris, cfg.nonlinear)

    traj = Trajectory()
    s = s0
    n = cfg.n_steps
    for i in range(n + 1):
        t = i * cfg.dt
        if i % cfg.stride == 0 or i == n:
            traj.times.append(t)
            traj.states.append(s)
            worst = _record(traj, t, s, cfg.norm_orders)
            if not np.isfinite(worst) or worst > cfg.ceiling:
                traj.status = "blowup"
                err = BlowupDetected(t)
                err.trajectory = traj
                raise err
        if i == n:
            break
        s = _lawson_step(prop, nl, s, cfg.dt) if prop is not None else _rk4_step(full_rhs, s, cfg.dt)
        if not np.all(np.isfinite(s.h.values)):
            traj.status = "blowup"
            err = BlowupDetected(t + cfg.dt, "non-finite state")
            err.trajectory = traj
            raise err
    return traj
