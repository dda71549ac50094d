"""
Dense operator matrices on coarse grids, their exponentials, the averaged
nonlinearity and the zonal time-average diagnostics.

States are flattened as ``[comp1, comp2, h]`` (see :meth:`State.flatten`).
With ``W`` the diagonal quadrature weights of that layout, the large
operator satisfies ``M^T W = -W M``, so ``K = W^{1/2} M W^{-1/2}`` is real
skew and ``i K`` is Hermitian.  All exponentials go through ``eigh`` of that
Hermitian matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import eigh

from .errors import TooLarge, InsufficientData, NonConvergentAverage
from .fields import (
    Grid, ScalarField, VectorField, State, Params, state_weights,
    grad, J, hk_norm, l2_norm,
)
from .operators import (
    CoriolisProfile, CorrectorCoeffs, apply_Lpartial, apply_L0, apply_Lap, apply_N,
)
from .kernel import zonal_mean_velocity, balance_profile
from .dynamics import nonlinearity_B, ChristoffelSamples

MAX_DIM = 4000


def _operator(opname: str, cor: CoriolisProfile, params: Params):
    mu = params.mu
    if opname == "L":
        # the bracket L_d + mu L_0; the full operator is this divided by delta
        return lambda s: apply_Lpartial(s) + apply_L0(s, cor) * mu
    if opname == "Lap-N":
        coeffs = CorrectorCoeffs.from_coriolis(cor, params)
        return lambda s: apply_Lap(s) - apply_N(s, coeffs)
    if opname == "zero":
        return lambda s: s * 0.0
    raise ValueError(f"unknown operator {opname!r}")


@dataclass
class OperatorMatrix:
    """Dense matrix of a linear state operator together with its spectral data."""

    name: str
    matrix: np.ndarray
    weights: np.ndarray
    grid: Grid
    params: Params
    skew: bool
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, s: State) -> State:
        return State.unflatten(self.matrix @ s.flatten(), self.grid, s.params)

    def symmetrized(self) -> np.ndarray:
        sw = np.sqrt(self.weights)
        return sw[:, None] * self.matrix / sw[None, :]

    def skew_defect(self) -> float:
        """``||M + W^{-1} M^T W|| / ||M||`` (Frobenius)."""
        M, w = self.matrix, self.weights
        nrm = np.linalg.norm(M)
        if nrm == 0:
            return 0.0
        return float(np.linalg.norm(M + (M.T * w[None, :]) / w[:, None]) / nrm)

    def symmetry_defect(self) -> float:
        """``||M - W^{-1} M^T W|| / ||M||``."""
        M, w = self.matrix, self.weights
        nrm = np.linalg.norm(M)
        if nrm == 0:
            return 0.0
        return float(np.linalg.norm(M - (M.T * w[None, :]) / w[:, None]) / nrm)

    def max_real_part(self) -> float:
        """``max |Re lambda| / ||M||_2`` from a general (non-symmetric) eigen solve."""
        lam = np.linalg.eigvals(self.matrix)
        nrm = np.linalg.norm(self.matrix, 2)
        return float(np.max(np.abs(lam.real)) / nrm) if nrm > 0 else 0.0

    @property
    def eig(self):
        """``(lam, U)``: for skew operators ``i K = U diag(lam) U^H``, otherwise ``K = U diag(lam) U^T``."""
        if self._eig is None:
            K = self.symmetrized()
            if self.skew:
                H = 1j * K
                lam, U = eigh(0.5 * (H + H.conj().T))
            else:
                lam, U = eigh(0.5 * (K + K.T))
            self._eig = (lam, U)
        return self._eig

    def to_modes(self, vec: np.ndarray) -> np.ndarray:
        lam, U = self.eig
        return U.conj().T @ (np.sqrt(self.weights) * vec)

    def from_modes(self, c: np.ndarray) -> np.ndarray:
        lam, U = self.eig
        return (U @ c) / np.sqrt(self.weights)

    def exp_factor(self, t: float) -> np.ndarray:
        lam, _ = self.eig
        # K = -i U lam U^H for skew operators
        return np.exp(-1j * t * lam) if self.skew else np.exp(t * lam)


def assemble_operator(opname: str, grid: Grid, params: Params, cor: CoriolisProfile) -> OperatorMatrix:
    """Assemble ``L_d + mu L_0`` (``"L"``), ``Lap - N`` (``"Lap-N"``) or ``"zero"``
    column by column."""
    n = grid.N1 * grid.N2
    dim = 3 * n
    if dim > MAX_DIM:
        raise TooLarge(f"state dimension {dim} exceeds the dense cap {MAX_DIM}")
    op = _operator(opname, cor, params)
    Mx = np.empty((dim, dim))
    e = np.zeros(dim)
    for j in range(dim):
        e[j] = 1.0
        Mx[:, j] = op(State.unflatten(e, grid, params)).flatten()
        e[j] = 0.0
    return OperatorMatrix(name=opname, matrix=Mx, weights=state_weights(grid), grid=grid,
                          params=params, skew=(opname in ("L", "zero")))


def exp_L(t: float, M: OperatorMatrix, s: State) -> State:
    """``exp(t M) s`` through the cached eigendecomposition."""
    c = M.to_modes(s.flatten()) * M.exp_factor(t)
    return State.unflatten(M.from_modes(c).real, M.grid, s.params)


def transformed_variable(s: State, t: float, M: OperatorMatrix) -> State:
    """``V = exp(t L) s`` with ``L = M / delta``."""
    return exp_L(t / s.params.delta, M, s)


# ---------------------------------------------------------------------------
# averaged nonlinearity


@dataclass
class AveragedB:
    value: State
    ell: float
    residual: float            # ||B_ell - B_{ell/2}|| / ||B_ell||
    residual_prev: float       # ||B_{ell/2} - B_{ell/4}|| / ||B_ell||
    norm: float = 0.0          # ||B_ell||

    @property
    def abs_residual(self) -> float:
        """``||B_ell - B_{ell/2}||`` without normalization."""
        return self.residual * self.norm


def _trapz_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    return w


def averaged_B(Vbar: State, M: OperatorMatrix, ell: float = 200.0, n_samples: int = 4000,
               chris: ChristoffelSamples | None = None, warn: bool = True) -> AveragedB:
    """Trapezoid average of ``exp(s M) B(exp(-s M) V)`` over ``s in [0, ell]``.

    The half and quarter windows reuse the same samples, so ``n_samples``
    is rounded up to a multiple of 4.
    """
    n = int(np.ceil(n_samples / 4.0)) * 4
    grid = M.grid
    chris = chris or ChristoffelSamples.from_grid(grid)
    lam, _ = M.eig
    c0 = M.to_modes(Vbar.flatten())
    taus = np.linspace(0.0, ell, n + 1)
    acc = {1: 0.0, 2: 0.0, 4: 0.0}
    w = {d: _trapz_weights(n // d, ell / n) for d in acc}
    for i, tau in enumerate(taus):
        v = M.from_modes(c0 * M.exp_factor(-tau)).real
        b = nonlinearity_B(State.unflatten(v, grid, Vbar.params), chris).flatten()
        cb = M.to_modes(b) * M.exp_factor(tau)
        for d in acc:
            if i <= n // d:
                acc[d] = acc[d] + w[d][i] * cb
    avg = {d: M.from_modes(acc[d] / (ell / d)).real for d in acc}
    nrm = max(float(np.sqrt(np.sum(M.weights * avg[1] ** 2))), 1e-300)

    def wdist(a, b):
        return float(np.sqrt(np.sum(M.weights * (a - b) ** 2))) / nrm

    res = wdist(avg[1], avg[2])
    prev = wdist(avg[2], avg[4])
    if warn and res >= prev and res > 1e-12:
        warnings.warn(f"window residual did not decrease ({prev:.3g} -> {res:.3g}) at ell={ell}",
                      NonConvergentAverage, stacklevel=2)
    return AveragedB(State.unflatten(avg[1], grid, Vbar.params), ell, res, prev, nrm)


@dataclass
class LimitConfig:
    dt: float
    t_end: float
    ell: float = 200.0
    n_samples: int = 4000
    stride: int = 1


@dataclass
class LimitTrajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    mean_corrections: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def integrate_limit_equation(V0: State, M: OperatorMatrix, cfg: LimitConfig) -> LimitTrajectory:
    """RK4 on ``dV/dt + Bbar(V) = 0``.

    After each step the area mean of ``h`` is reset to its initial value; the
    size of each correction is logged in ``mean_corrections``.
    """
    chris = ChristoffelSamples.from_grid(M.grid)
    target = V0.h.mean()
    out = LimitTrajectory()

    def f(V):
        ab = averaged_B(V, M, cfg.ell, cfg.n_samples, chris, warn=False)
        out.residuals.append(ab.residual)
        return -ab.value

    n = int(round(cfg.t_end / cfg.dt))
    V = V0
    for i in range(n + 1):
        if i % cfg.stride == 0 or i == n:
            out.times.append(i * cfg.dt)
            out.states.append(V)
        if i == n:
            break
        k1 = f(V)
        k2 = f(V + k1 * (cfg.dt / 2))
        k3 = f(V + k2 * (cfg.dt / 2))
        k4 = f(V + k3 * cfg.dt)
        V = V + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (cfg.dt / 6)
        drift = V.h.mean() - target
        out.mean_corrections.append(abs(drift))
        V = State(V.u, V.h - drift, V.params)
    return out


# ---------------------------------------------------------------------------
# zonal time averages


@dataclass
class TimeAverageReport:
    T: float
    k: int
    avg_u: VectorField
    avg_h: ScalarField
    Phi_fit: np.ndarray
    Psi_fit: np.ndarray
    err_u: float
    err_h: float
    M: float
    eps: float
    slope_residual: float

    @property
    def bound(self) -> float:
        """``eps (2M/T + M^2)`` with unit constant."""
        return self.eps * (2 * self.M / self.T + self.M ** 2)

    @property
    def ratio_u(self) -> float:
        return self.err_u / self.bound

    @property
    def ratio_h(self) -> float:
        return self.err_h / self.bound

    def as_dict(self) -> dict:
        return {"T": self.T, "k": self.k, "eps": self.eps, "err_u": self.err_u, "err_h": self.err_h,
                "M": self.M, "bound": self.bound, "ratio_u": self.ratio_u, "ratio_h": self.ratio_h,
                "psi_slope_residual": self.slope_residual}


def _sobolev(x, k: float) -> float:
    if isinstance(x, VectorField) and k < 1:
        return l2_norm(x)
    return hk_norm(x, k)


def stream_profile(u_zonal: VectorField) -> np.ndarray:
    """``Phi`` with ``J grad Phi`` equal to a zonal ``v_d1`` flow.

    From ``comp1 = -d2 Phi / sqrt(g1 g2)`` one gets ``dPhi/dx = comp1 R sqrt(g2)``,
    integrated exactly through its Legendre series.
    """
    g = u_zonal.grid
    c1 = u_zonal.comp1.mean(axis=0)
    rhs = c1 * g.metric.R * g.sqrt_g2
    coef = npleg.legfit(g.x, rhs, g.N2 - 1)
    Phi = npleg.legval(g.x, npleg.legint(coef))
    return Phi - np.sum(g.col_weights * Phi) / np.sum(g.col_weights)


def _trapz_states(values, times):
    t = np.asarray(times)
    w = np.zeros(len(t))
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    acc = values[0] * w[0]
    for v, wi in zip(values[1:], w[1:]):
        acc = acc + v * wi
    return acc


def zonal_time_average(times, states, cor: CoriolisProfile, T: float | None = None,
                       k: int = 3) -> TimeAverageReport:
    """Time averages of ``u`` and ``h/mu`` over ``[0, T]`` compared with the
    nearest zonal kernel profile."""
    times = np.asarray(times, dtype=float)
    if T is None:
        T = float(times[-1] - times[0])
    sel = np.nonzero(times <= times[0] + T * (1 + 1e-12))[0]
    if sel.size < 3:
        raise InsufficientData(f"need at least 3 snapshots in the window, got {sel.size}")
    ts = times[sel]
    sts = [states[i] for i in sel]
    span = ts[-1] - ts[0]
    params = sts[0].params
    grid = sts[0].grid
    avg_u = _trapz_states([s.u for s in sts], ts) * (1.0 / span)
    avg_h = _trapz_states([s.h for s in sts], ts) * (1.0 / (span * params.mu))

    ut = zonal_mean_velocity(avg_u)
    Phi = stream_profile(ut)
    Psi = balance_profile(Phi, cor)
    u_fit = J(grad(ScalarField.zonal(grid, Phi)))
    h_fit = ScalarField.zonal(grid, Psi)
    h_fit = h_fit - h_fit.mean()
    dPsi = grid.D0 @ Psi
    dref = cor.F * (grid.D0 @ Phi)
    slope = float(np.max(np.abs(dPsi - dref)) / max(np.max(np.abs(dref)), 1e-300))
    Mmax = max(hk_norm(s, k) for s in sts)
    return TimeAverageReport(
        T=float(span), k=k, avg_u=avg_u, avg_h=avg_h, Phi_fit=Phi, Psi_fit=Psi,
        err_u=_sobolev(avg_u - u_fit, k - 3), err_h=_sobolev(avg_h - h_fit, k - 2),
        M=Mmax, eps=params.eps, slope_residual=slope,
    )
