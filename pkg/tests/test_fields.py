import numpy as np
import pytest
from hypothesis import given, strategies as st

from zonalsim.errors import BadOrder, GaugeViolation
from zonalsim.fields import (
    Grid, ScalarField, VectorField, State, Params, state_weights, inner,
    grad, div, curl, J, Jinv, laplacian_scalar, inverse_laplacian, laplacian_vector,
    hodge, dealias, l2_norm, hk_norm, random_scalar, random_vector, random_state,
)
from zonalsim.geometry import sphere, bump, area_integral, dot

import oracles

seeds = st.integers(0, 2**31 - 1)


def rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_gradient_of_degree_one_harmonic(sphere_grid):
    g = sphere_grid
    f = ScalarField.from_function(g, lambda p1, p2: np.sin(p2) * np.cos(p1))
    v = grad(f)
    assert np.allclose(v.comp1, -np.sin(g.P1) / np.sin(g.P2), atol=1e-12)
    assert np.allclose(v.comp2, np.cos(g.P1) * np.cos(g.P2), atol=1e-12)


def test_laplacian_examples(sphere_grid):
    g = sphere_grid
    f = ScalarField.from_function(g, lambda p1, p2: np.cos(p2))
    assert np.allclose(laplacian_scalar(f).values, -2 * f.values, atol=1e-12)
    f = ScalarField.from_function(g, lambda p1, p2: np.sin(p2) ** 2 * np.cos(2 * p1))
    assert np.allclose(laplacian_scalar(f).values, -6 * f.values, atol=1e-11)


@pytest.mark.parametrize("l,m", [(1, 0), (2, 1), (3, -2), (5, 3), (6, 0), (7, 7)])
def test_spherical_harmonic_eigenvalues(sphere_grid, l, m):
    g = sphere_grid
    f = ScalarField.from_function(g, oracles.numeric(oracles.sphere_harmonic(l, m)))
    assert rel(laplacian_scalar(f).values, -l * (l + 1) * f.values) < 1e-11


@pytest.mark.parametrize("name,R", [("sphere", "1"), ("bump:0.2", "1+0.2*sin(p2)**2")])
def test_operators_match_symbolic_oracle(name, R):
    from zonalsim.geometry import parse_profile
    S = oracles.surface(R)
    g = Grid(parse_profile(name), 32, 24)
    f = S.restrict(oracles.x_ * oracles.y_ + oracles.z_**3)
    h = S.restrict(oracles.x_ * oracles.z_ - oracles.y_)
    Jg = S.J(S.grad(h))
    u = S.grad(f)
    v = (u[0] + Jg[0], u[1] + Jg[1])
    F = ScalarField.from_function(g, oracles.numeric(f))
    V = VectorField(oracles.numeric(v[0])(g.P1, g.P2), oracles.numeric(v[1])(g.P1, g.P2), g)
    ev = lambda e: oracles.numeric(e)(g.P1, g.P2)
    tol = 1e-12 if name == "sphere" else 1e-10
    assert rel(laplacian_scalar(F).values, ev(S.laplacian(f))) < 100 * tol
    G = grad(F)
    assert rel(G.comp1, ev(u[0])) < 100 * tol and rel(G.comp2, ev(u[1])) < 100 * tol
    assert rel(div(V).values, ev(S.div(v))) < 100 * tol
    assert rel(curl(V).values, ev(S.curl(v))) < 100 * tol


def test_inverse_laplacian(sphere_grid, rng):
    f = random_scalar(sphere_grid, rng, degree=8)
    u = inverse_laplacian(f)
    assert rel(laplacian_scalar(u).values, f.values) < 1e-11
    assert abs(u.mean()) < 1e-13


def test_inverse_laplacian_gauge(sphere_grid):
    with pytest.raises(GaugeViolation):
        inverse_laplacian(ScalarField(np.ones(sphere_grid.shape), sphere_grid))


def test_vector_norm_order_zero_rejected(sphere_grid):
    with pytest.raises(BadOrder):
        hk_norm(VectorField.zeros(sphere_grid), 0)


def test_sobolev_norm_matches_dense_eigenbasis():
    g = Grid(sphere(), 24, 24)
    rng = np.random.default_rng(5)
    f = random_scalar(g, rng, degree=6)
    n = g.N1 * g.N2
    E = np.eye(n)
    L = np.column_stack([laplacian_scalar(ScalarField(E[:, i].reshape(g.shape), g)).values.ravel()
                         for i in range(n)])
    w = np.sqrt(g.area_weights.ravel())
    S = w[:, None] * L / w[None, :]
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    lam = np.clip(-lam, 0.0, None)
    fhat = V.T @ (w * f.values.ravel())
    for s in (0, 1, 2, 3):
        ref = np.sqrt(np.sum((1 + lam**s) * fhat**2)) if s else np.sqrt(np.sum(fhat**2))
        assert hk_norm(f, s) == pytest.approx(ref, rel=1e-8)


def test_hodge_reconstruction_and_orthogonality():
    g = Grid(sphere(), 48, 48)
    rng = np.random.default_rng(0)
    v = random_vector(g, rng, degree=10)
    parts = hodge(v)
    r = v - parts.irr - parts.inc
    assert l2_norm(r) / l2_norm(v) <= 1e-8
    assert abs(inner(parts.irr, parts.inc)) <= 1e-10 * l2_norm(v) ** 2
    assert l2_norm(curl(parts.irr)) <= 1e-9 * l2_norm(v)
    assert l2_norm(div(parts.inc)) <= 1e-9 * l2_norm(v)


def test_hodge_on_bump(bump_grid, rng):
    v = random_vector(bump_grid, rng, degree=8)
    parts = hodge(v)
    assert l2_norm(v - parts.irr - parts.inc) / l2_norm(v) <= 1e-9


def test_vector_laplacian_sums_hodge_branches(sphere_grid, rng):
    v = random_vector(sphere_grid, rng, degree=7)
    branches = grad(div(v)) + J(grad(curl(v)))
    lv = laplacian_vector(v)
    assert l2_norm(lv - branches) <= 1e-12 * l2_norm(lv)
    # on the sphere the vector Laplacian of grad f is grad(Lap f)
    f = random_scalar(sphere_grid, rng, degree=7)
    a, b = laplacian_vector(grad(f)), grad(laplacian_scalar(f))
    assert l2_norm(a - b) <= 1e-10 * l2_norm(b)


def test_dealias_idempotent(sphere_grid, rng):
    s = random_state(sphere_grid, Params(0.1, 0.1), rng, degree=20, m_max=15)
    d = dealias(s)
    dd = dealias(d)
    assert l2_norm(dd - d) <= 1e-13 * l2_norm(d)
    low = random_state(sphere_grid, Params(0.1, 0.1), rng, degree=6, m_max=6)
    assert l2_norm(dealias(low) - low) <= 1e-12 * l2_norm(low)


def test_state_weights_give_inner_product(sphere_grid, rng):
    p = Params(0.1, 0.1)
    a, b = random_state(sphere_grid, p, rng), random_state(sphere_grid, p, rng)
    W = state_weights(sphere_grid)
    assert np.sum(W * a.flatten() * b.flatten()) == pytest.approx(a.inner(b), rel=1e-12)
    back = State.unflatten(a.flatten(), sphere_grid, p)
    assert l2_norm(back - a) == 0.0


def test_params_validation():
    with pytest.raises(ValueError):
        Params(0.0, 0.1)
    assert Params(0.1, 0.05).mu == pytest.approx(0.5)


@given(seeds)
def test_div_is_negative_adjoint_of_grad(seed):
    g = Grid(bump(0.2), 16, 12)
    rng = np.random.default_rng(seed)
    f, v = random_scalar(g, rng, degree=6), random_vector(g, rng, degree=6)
    lhs = area_integral(ScalarField(f.values * div(v).values, g))
    rhs = -area_integral(dot(grad(f), v))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


@given(seeds)
def test_curl_grad_and_div_Jgrad_vanish(seed):
    g = Grid(sphere(), 16, 12)
    f = random_scalar(g, np.random.default_rng(seed), degree=6)
    gf = grad(f)
    scale = hk_norm(f, 2)
    assert l2_norm(curl(gf)) <= 1e-11 * scale
    assert l2_norm(div(J(gf))) <= 1e-11 * scale
    assert l2_norm(curl(J(gf)) - laplacian_scalar(f)) <= 1e-11 * scale


@given(seeds)
def test_J_is_an_isometry_with_inverse(seed):
    g = Grid(bump(0.2), 12, 10)
    v = random_vector(g, np.random.default_rng(seed), degree=5)
    assert l2_norm(J(v)) == pytest.approx(l2_norm(v), rel=1e-13)
    assert l2_norm(Jinv(J(v)) - v) <= 1e-14 * l2_norm(v)
    assert abs(inner(J(v), v)) <= 1e-13 * l2_norm(v) ** 2


@given(seeds, st.floats(-3, 3).filter(lambda c: c == 0 or abs(c) > 1e-100))
def test_norms_are_homogeneous(seed, c):
    g = Grid(sphere(), 12, 10)
    s = random_state(g, Params(0.1, 0.1), np.random.default_rng(seed), degree=5)
    assert hk_norm(s * c, 3) == pytest.approx(abs(c) * hk_norm(s, 3), rel=1e-12, abs=1e-300)
    assert l2_norm(s * c) == pytest.approx(abs(c) * l2_norm(s), rel=1e-12, abs=1e-300)
