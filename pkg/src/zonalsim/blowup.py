"""
Finite-time blow-up of two model problems on the flat torus.

Shear example (``run_example1``)::

    v_t + v v_y + (sin y / eps) v_x = 0

Rotation example without pressure (``run_example2``)::

    v_t + v v_y + (sin y / eps) u = 0,    u_t - (sin y / eps) v = 0

Along the curve ``x = y = 0`` the solution keeps ``v = 0`` and the slopes obey
closed ODEs, which blow up after a time of order ``sqrt(eps)``.  Those ODEs
are the primary measurement; pseudo-spectral PDE runs corroborate them.

The PDE steppers are integrating-factor RK4: the ``1/eps`` terms are linear
and act node by node in ``y`` (a phase shift of each ``x`` Fourier mode in
the shear example, a rotation of ``(v, u)`` in the rotation example), so they are applied
exactly and only the advection term is stepped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy import stats


@dataclass
class TorusField:
    """Samples on the uniform ``N x N`` grid of ``[0, 2 pi)^2``, indexed ``[ix, iy]``."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("torus field must be a square 2-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("torus field must be finite")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def nodes(N: int):
        x = 2 * np.pi * np.arange(N) / N
        return np.meshgrid(x, x, indexing="ij")

    @classmethod
    def from_function(cls, N: int, fn) -> "TorusField":
        X, Y = cls.nodes(N)
        return cls(fn(X, Y))

    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * (2 * np.pi / self.N) ** 2))


def example1_initial(N: int) -> TorusField:
    """``sin x - sin y``: zero at the origin with ``v_x = 1``, ``v_y = -1``."""
    return TorusField.from_function(N, lambda X, Y: np.sin(X) - np.sin(Y))


# ---------------------------------------------------------------------------
# characteristic ODEs


@dataclass
class OracleResult:
    eps: float
    t_blow: float
    t: np.ndarray
    slope: np.ndarray          # v_y along the curve
    crossed: bool

    def slope_at(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.slope)


def _oracle(fun, y0, eps, threshold, t_max, index):
    def hit(t, y):
        return y[index] + threshold
    hit.terminal = True
    hit.direction = -1
    sol = solve_ivp(fun, (0.0, t_max), y0, method="DOP853", rtol=1e-11, atol=1e-12,
                    events=hit, dense_output=True)
    crossed = sol.t_events[0].size > 0
    t_blow = float(sol.t_events[0][0]) if crossed else float(sol.t[-1])
    tt = np.linspace(0.0, t_blow, 2001)
    return OracleResult(eps, t_blow, tt, sol.sol(tt)[index], crossed)


def example1_oracle(eps: float, threshold: float = 1e3, t_max: float | None = None) -> OracleResult:
    """``a' = -a b``, ``b' = -b^2 - a/eps`` with ``a = v_x``, ``b = v_y``, ``(a, b)(0) = (1, -1)``."""
    t_max = t_max or 20 * math.sqrt(eps) + 1.0
    return _oracle(lambda t, y: [-y[0] * y[1], -y[1] ** 2 - y[0] / eps], [1.0, -1.0],
                   eps, threshold, t_max, 1)


def example2_oracle(eps: float, threshold: float = 1e3, t_max: float | None = None) -> OracleResult:
    """``b' = -b^2 - u/eps`` with ``u = 1`` on the curve, ``b(0) = -1``."""
    t_max = t_max or 20 * math.sqrt(eps) + 1.0
    return _oracle(lambda t, y: [-y[0] ** 2 - 1.0 / eps], [-1.0], eps, threshold, t_max, 0)


def example2_crossing_time(eps: float, threshold: float = 1e3) -> float:
    """Closed form: ``b = -tan(t/sqrt(eps) + atan(sqrt(eps)))/sqrt(eps)``."""
    r = math.sqrt(eps)
    return r * (math.atan(threshold * r) - math.atan(r))


@dataclass
class ExponentFit:
    p: float
    ci_low: float
    ci_high: float
    prefactor: float
    eps: np.ndarray
    t_blow: np.ndarray


def fit_exponent(eps, t_blow, confidence: float = 0.95) -> ExponentFit:
    """Least-squares fit of ``log t = p log eps + c`` with a t-interval on ``p``."""
    le, lt = np.log(np.asarray(eps, float)), np.log(np.asarray(t_blow, float))
    res = stats.linregress(le, lt)
    dof = le.size - 2
    if dof > 0:
        half = stats.t.ppf(0.5 + confidence / 2, dof) * res.stderr
    else:
        half = float("nan")
    return ExponentFit(float(res.slope), float(res.slope - half), float(res.slope + half),
                       float(math.exp(res.intercept)), np.asarray(eps, float), np.asarray(t_blow, float))


# ---------------------------------------------------------------------------
# PDE runs


@dataclass
class BlowupConfig:
    N: int = 256
    dt: float = 2e-4
    t_max: float | None = None          # defaults to the oracle crossing time
    ceiling: float | None = None        # max |v_y| treated as blow-up; default N/6
    tail_tol: float = 1e-8              # energy fraction in the outer third of the band
    sample_every: int = 1


@dataclass
class BlowupRecord:
    example: int
    eps: float
    t_blow: float
    method: str
    unresolved: bool = False
    l2_drift: float = 0.0
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slope: np.ndarray = field(default_factory=lambda: np.zeros(0))
    origin_value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    drift_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    aux_origin: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def drift_before(self, t: float) -> float:
        sel = self.times <= t
        return float(np.max(self.drift_history[sel])) if np.any(sel) else 0.0


def _wavenumbers(N: int):
    return np.fft.fftfreq(N, 1.0 / N)


def _tail_fraction(vhat: np.ndarray, N: int, ndim: int) -> float:
    k = np.abs(_wavenumbers(N))
    outer = (k > N // 6) & (k <= N // 3)
    if ndim == 1:
        sel = outer
    else:
        inner = ~outer & (k <= N // 3)
        sel = (outer[:, None] & (k <= N // 3)[None, :]) | (inner[:, None] & outer[None, :])
    e = np.abs(vhat) ** 2
    tot = e.sum()
    return float(e[sel].sum() / tot) if tot > 0 else 0.0


def _ddy(v: np.ndarray, axis: int) -> np.ndarray:
    n = v.shape[axis]
    k = np.fft.rfftfreq(n, 1.0 / n)
    k[-1] = 0.0 if n % 2 == 0 else k[-1]
    shape = [1] * v.ndim
    shape[axis] = k.size
    return np.fft.irfft(1j * k.reshape(shape) * np.fft.rfft(v, axis=axis), n=n, axis=axis)


def _truncate(w: np.ndarray) -> np.ndarray:
    """2/3-rule projection of a real periodic array."""
    N = w.shape[-1]
    wh = np.fft.rfftn(w, axes=tuple(range(w.ndim)))
    kr = np.fft.rfftfreq(N, 1.0 / N)
    wh[..., kr > N // 3] = 0.0
    if w.ndim == 2:
        k = np.abs(_wavenumbers(w.shape[0]))
        wh[k > w.shape[0] // 3, :] = 0.0
    return np.fft.irfftn(wh, s=w.shape, axes=tuple(range(w.ndim)))


def _advection(v: np.ndarray, axis: int) -> np.ndarray:
    """``-P[(v v_y + (v^2)_y) / 3]``: skew form, conserves sum(v^2)."""
    w = -(v * _ddy(v, axis) + _ddy(v * v, axis)) / 3.0
    return _truncate(w)


def _slope_y(v: np.ndarray, axis: int) -> np.ndarray:
    return _ddy(v, axis)


def _default_ceiling(cfg: BlowupConfig) -> float:
    return cfg.ceiling if cfg.ceiling is not None else cfg.N / 6.0


def run_example1(eps: float, v0: TorusField | None = None, cfg: BlowupConfig | None = None) -> BlowupRecord:
    """Integrate the shear example until ``max |v_y|`` reaches the ceiling or resolution is lost."""
    cfg = cfg or BlowupConfig()
    N = cfg.N
    v0 = v0 or example1_initial(N)
    if v0.N != N:
        raise ValueError("initial field does not match the configured grid")
    t_max = cfg.t_max or example1_oracle(eps).t_blow
    kx = np.fft.rfftfreq(N, 1.0 / N)[:, None]
    sy = np.sin(2 * np.pi * np.arange(N) / N)[None, :]
    ceiling = _default_ceiling(cfg)

    def lin(v, t):
        # exact solution operator of v_t + (sin y/eps) v_x = 0: shift each x-mode
        vh = np.fft.rfft(v, axis=0) * np.exp(-1j * kx * sy * t / eps)
        vh[-1] = 0.0 if N % 2 == 0 else vh[-1]
        return np.fft.irfft(vh, n=N, axis=0)

    def nl(v):
        return _advection(v, axis=1)

    return _run(1, eps, _truncate(v0.values), lin, nl, lambda v: _slope_y(v, 1),
                lambda v: np.sum(v * v), cfg, t_max, ceiling, ndim=2,
                origin=lambda v: (v[0, 0], np.nan))


def run_example2(eps: float, cfg: BlowupConfig | None = None) -> BlowupRecord:
    """Rotation example, independent of ``x``: ``v0 = -sin y``, ``u0 = 1``."""
    cfg = cfg or BlowupConfig(N=2048, dt=1e-4)
    N = cfg.N
    t_max = cfg.t_max or example2_oracle(eps).t_blow
    y = 2 * np.pi * np.arange(N) / N
    s = np.sin(y)
    ceiling = _default_ceiling(cfg)
    state0 = np.stack([-np.sin(y), np.ones(N)])

    def lin(q, t):
        # (v, u)' = (sin y/eps) (-u, v): rotation by sin(y) t/eps
        c, sn = np.cos(s * t / eps), np.sin(s * t / eps)
        return np.stack([c * q[0] - sn * q[1], sn * q[0] + c * q[1]])

    def nl(q):
        return np.stack([_advection(q[0], axis=0), np.zeros(N)])

    return _run(2, eps, state0, lin, nl, lambda q: _slope_y(q[0], 0),
                lambda q: np.sum(q * q), cfg, t_max, ceiling, ndim=1,
                origin=lambda q: (q[0][0], q[1][0]))


def _run(example, eps, q, lin, nl, slope_fn, energy_fn, cfg, t_max, ceiling, ndim, origin):
    dt = cfg.dt
    n_steps = int(math.ceil(t_max / dt))
    e0 = energy_fn(q)
    times, slopes, vals, aux, drift = [], [], [], [], []
    unresolved = False
    t_blow = None

    def sample(t, q):
        sl = slope_fn(q)
        times.append(t)
        slopes.append(float(sl.flat[0]))
        o = origin(q)
        vals.append(float(o[0]))
        aux.append(float(o[1]))
        drift.append(abs(energy_fn(q) / e0 - 1.0))
        return float(np.max(np.abs(sl)))

    t = 0.0
    peak = sample(t, q)
    for i in range(n_steps):
        k1 = nl(q)
        k2 = nl(lin(q + k1 * (dt / 2), dt / 2))
        k3 = nl(lin(q, dt / 2) + k2 * (dt / 2))
        k4 = nl(lin(q, dt) + lin(k3, dt / 2) * dt)
        q = lin(q + k1 * (dt / 6), dt) + lin(k2 + k3, dt / 2) * (dt / 3) + k4 * (dt / 6)
        t = (i + 1) * dt
        if not np.all(np.isfinite(q)):
            unresolved = True
            t_blow = t
            break
        if (i + 1) % cfg.sample_every == 0 or i == n_steps - 1:
            peak = sample(t, q)
            first = q[0] if ndim == 1 and q.ndim == 2 else q
            vh = np.fft.fftn(first)
            if _tail_fraction(vh, cfg.N, ndim) > cfg.tail_tol:
                unresolved = True
                t_blow = t
                break
            if peak >= ceiling:
                t_blow = t
                break
    if t_blow is None:
        # neither the ceiling nor the resolution limit was reached: a lower bound
        t_blow = t
        unresolved = True
    return BlowupRecord(example=example, eps=eps, t_blow=t_blow, method="pde",
                        unresolved=unresolved, l2_drift=float(max(drift)),
                        times=np.array(times), slope=np.array(slopes),
                        origin_value=np.array(vals), drift_history=np.array(drift),
                        aux_origin=np.array(aux))


def oracle_agreement(record: BlowupRecord, oracle: OracleResult, fraction: float = 0.8) -> float:
    """Max relative gap between PDE and ODE ``v_y`` at the origin up to
    ``fraction * t_blow`` of the oracle.  ``inf`` if the PDE stopped earlier."""
    t_stop = fraction * oracle.t_blow
    if record.times.size == 0 or record.times[-1] < t_stop * (1 - 1e-9):
        return float("inf")
    sel = record.times <= t_stop
    ref = oracle.slope_at(record.times[sel])
    return float(np.max(np.abs(record.slope[sel] - ref) / np.abs(ref)))


def oracle_record(example: int, eps: float, threshold: float = 1e3) -> BlowupRecord:
    o = example1_oracle(eps, threshold) if example == 1 else example2_oracle(eps, threshold)
    return BlowupRecord(example=example, eps=eps, t_blow=o.t_blow, method="oracle",
                        unresolved=not o.crossed, times=o.t, slope=o.slope)
