"""
Independent reference computations for the tests.

Everything here is derived symbolically from the embedding
``X(p1, p2) = R(p2) (sin p2 cos p1, sin p2 sin p1, cos p2)`` in R^3 with
sympy, without using any metric formula from the package.  Christoffel
symbols come from the second fundamental form of the embedding
(``Gamma^k_ij = (d_i d_j X . d_k X) / g_kk``), and the Laplace-Beltrami
operator from the divergence form ``|g|^{-1/2} d_i (|g|^{1/2} g^{ij} d_j f)``.
"""

from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import quad

p1, p2 = sp.symbols("p1 p2", real=True)
x_, y_, z_ = sp.symbols("x y z", real=True)


class SymbolicSurface:
    def __init__(self, R):
        self.R = sp.sympify(R)
        X = self.R * sp.Matrix([sp.sin(p2) * sp.cos(p1), sp.sin(p2) * sp.sin(p1), sp.cos(p2)])
        self.X = X
        self.dX = [X.diff(p1), X.diff(p2)]
        self.g = [sp.simplify(self.dX[0].dot(self.dX[0])), sp.simplify(self.dX[1].dot(self.dX[1]))]
        self.g12 = sp.simplify(self.dX[0].dot(self.dX[1]))
        # sqrt(g11) = R sin p2 on the open chart
        self.sg = [self.R * sp.sin(p2), sp.sqrt(self.g[1])]
        self.vol = self.sg[0] * self.sg[1]
        coords = (p1, p2)
        self.Gamma = [[[sp.simplify(X.diff(coords[i]).diff(coords[j]).dot(self.dX[k]) / self.g[k])
                        for j in range(2)] for i in range(2)] for k in range(2)]

    def restrict(self, f):
        """Pull an expression in ambient ``x, y, z`` back to ``(p1, p2)``."""
        X = self.X
        return sp.sympify(f).subs({x_: X[0], y_: X[1], z_: X[2]})

    def grad(self, f):
        return (f.diff(p1) / self.g[0], f.diff(p2) / self.g[1])

    def div(self, u):
        return ((self.vol * u[0]).diff(p1) + (self.vol * u[1]).diff(p2)) / self.vol

    def laplacian(self, f):
        return self.div(self.grad(f))

    def J(self, u):
        """Rotation ``(w1, w2) -> (-w2, w1)`` of the orthonormal components."""
        return (-self.sg[1] * u[1] / self.sg[0], self.sg[0] * u[0] / self.sg[1])

    def curl(self, u):
        J = self.J(u)
        return -self.div(J)

    def covariant(self, u, v):
        """``grad_u v`` in coordinate components."""
        coords = (p1, p2)
        out = []
        for k in range(2):
            e = sum(u[i] * v[k].diff(coords[i]) for i in range(2))
            e += sum(self.Gamma[k][i][j] * u[i] * v[j] for i in range(2) for j in range(2))
            out.append(e)
        return tuple(out)


def numeric(expr):
    """Vectorized evaluation of an expression in ``(p1, p2)``."""
    f = sp.lambdify((p1, p2), expr, "numpy")

    def call(P1, P2):
        return np.broadcast_to(np.asarray(f(P1, P2), dtype=float), np.broadcast(P1, P2).shape)

    return call


@lru_cache(maxsize=None)
def surface(R_text: str) -> SymbolicSurface:
    return SymbolicSurface(sp.sympify(R_text, locals={"p2": p2}))


def surface_area(R_text: str) -> float:
    """Area of the surface of revolution by adaptive quadrature."""
    R = sp.sympify(R_text, locals={"p2": p2})
    integrand = sp.lambdify(p2, 2 * sp.pi * R * sp.sin(p2) * sp.sqrt(R**2 + R.diff(p2) ** 2))
    return quad(integrand, 0.0, np.pi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]


def sphere_harmonic(l: int, m: int):
    """Real spherical harmonic (unnormalized) as an expression in ``(p1, p2)``."""
    x = sp.Symbol("x")
    P = sp.assoc_legendre(l, abs(m), x)
    trig = sp.cos(m * p1) if m >= 0 else sp.sin(-m * p1)
    return sp.simplify(P.subs(x, sp.cos(p2))) * trig


def shear_blowup_time(eps: float, threshold: float = 1e3) -> float:
    """Time at which ``v_y`` reaches ``-threshold`` at the origin in the shear example.

    With ``v_y = q'/q`` the slope system gives ``v_x = 1/q`` and ``q'' = -1/eps``,
    so ``q = 1 - t - t^2/(2 eps)`` and ``v_y = -(1 + t/eps)/q``.  Setting
    ``v_y = -threshold`` leaves a quadratic in ``t``.
    """
    A = threshold / (2 * eps)
    B = threshold + 1.0 / eps
    C = 1.0 - threshold
    return float((-B + np.sqrt(B * B - 4 * A * C)) / (2 * A))


def rotation_blowup_time(eps: float, threshold: float = 1e3) -> float:
    """Same for the rotation example, where ``v_y`` solves ``b' = -b^2 - 1/eps``, ``b(0) = -1``."""
    r = np.sqrt(eps)
    # b = -tan(t/r + atan(r))/r; solve b = -threshold
    return r * (np.arctan(threshold * r) - np.arctan(r))
