import numpy as np
import pytest
from hypothesis import given, strategies as st

from zonalsim.errors import NotZonal
from zonalsim.fields import (
    Grid, ScalarField, Params, grad, div, J,
    l2_norm, hk_norm, random_scalar, random_state,
)
from zonalsim.geometry import sphere, bump
from zonalsim.kernel import (
    ZonalProfilePair, balance_profile, zonal_mean_velocity, project_kernel,
    build_kernel_state, kernel_distance_report, random_zonal_profile,
)
from zonalsim.operators import apply_L, coriolis_cos, coriolis_exact

seeds = st.integers(0, 2**31 - 1)


@pytest.fixture(scope="module")
def g():
    return Grid(sphere(), 24, 20)


def test_balance_profile_closed_form(g):
    # Psi' = F Phi' with F = Phi = cos gives Psi = cos^2/2 + c, and
    # int sin^2 (cos^2/2 + c) dp2 = pi/16 + c pi/2 = 0 fixes c = -1/8
    cor = coriolis_cos(g)
    Psi = balance_profile(np.cos(g.p2), cor)
    assert np.allclose(Psi, np.cos(g.p2) ** 2 / 2 - 0.125, atol=1e-14)
    pair = ZonalProfilePair.from_phi(np.cos(g.p2), cor)
    assert abs(pair.normalization()) <= 1e-15
    assert pair.slope_residual(cor) <= 1e-12


def test_balance_profile_on_bump():
    gb = Grid(bump(0.2), 24, 32)
    cor = coriolis_exact(gb)
    Phi = random_zonal_profile(gb, 3)
    pair = ZonalProfilePair.from_phi(Phi, cor)
    assert abs(pair.normalization()) <= 1e-13
    assert pair.slope_residual(cor) <= 1e-9


def test_constant_stream_profile_gives_zero_state(g):
    s = build_kernel_state(np.full(g.N2, 2.5), Params(0.1, 0.1), coriolis_exact(g))
    assert l2_norm(s) <= 1e-13


def test_non_zonal_profile_rejected(g):
    f = ScalarField.from_function(g, lambda p1, p2: np.cos(p1) * np.sin(p2))
    with pytest.raises(NotZonal):
        build_kernel_state(f, Params(0.1, 0.1), coriolis_exact(g))
    with pytest.raises(NotZonal):
        balance_profile(np.ones(g.N2 + 1), coriolis_exact(g))


def test_kernel_state_is_annihilated(g):
    cor = coriolis_exact(g)
    for mu in (0.5, 1.0, 2.0):
        s = build_kernel_state(random_zonal_profile(g, 7), Params(0.1, 0.1 * mu), cor)
        assert l2_norm(apply_L(s, cor)) <= 1e-8 * hk_norm(s, 1)
        assert abs(s.h.mean()) <= 1e-15


def test_kernel_state_is_fixed_by_projection(g):
    cor = coriolis_exact(g)
    s = build_kernel_state(random_zonal_profile(g, 1), Params(0.1, 0.1), cor)
    assert l2_norm(project_kernel(s, cor) - s) <= 1e-10 * l2_norm(s)


def test_zonal_mean_velocity_cases(g, rng):
    v = J(grad(ScalarField.zonal(g, random_zonal_profile(g, rng))))
    assert l2_norm(zonal_mean_velocity(v) - v) <= 1e-9 * l2_norm(v)
    w = grad(random_scalar(g, rng))
    assert l2_norm(zonal_mean_velocity(w)) <= 1e-12 * l2_norm(w)
    u = random_state(g, Params(0.1, 0.1), rng).u
    a, b = zonal_mean_velocity(u), zonal_mean_velocity(u, use_incompressible=False)
    assert l2_norm(a - b) <= 1e-12 * l2_norm(u)


@given(seeds)
def test_projection_properties(seed):
    g = Grid(sphere(), 16, 12)
    cor = coriolis_exact(g)
    p = Params(0.1, 0.07)
    s = random_state(g, p, np.random.default_rng(seed), degree=6)
    ps = project_kernel(s, cor)
    # idempotent
    assert l2_norm(project_kernel(ps, cor) - ps) <= 1e-9 * max(l2_norm(ps), 1e-300)
    # range inside the kernel
    assert l2_norm(apply_L(ps, cor)) <= 1e-7 * hk_norm(ps, 1)
    # zonal, divergence free, and div(F u~) = 0
    ut = ps.u
    assert np.max(np.abs(np.fft.rfft(ut.comp1, axis=0)[1:])) <= 1e-12 * max(np.max(np.abs(ut.comp1)), 1)
    assert np.max(np.abs(ut.comp2)) == 0.0
    assert l2_norm(div(ut)) <= 1e-12 * hk_norm(ut, 1)
    assert l2_norm(div(ut * cor.field())) <= 1e-12 * hk_norm(ut, 1)
    # gradient balance: grad h/delta + F J u~/eps = 0
    bal = grad(ps.h) * (1 / p.delta) + J(ut) * cor.F * (1 / p.eps)
    assert l2_norm(bal) <= 1e-8 * hk_norm(ut, 1) / p.eps


def test_projection_is_not_orthogonal(g, rng):
    cor = coriolis_exact(g)
    s = random_state(g, Params(0.1, 0.1), rng)
    ps = project_kernel(s, cor)
    # for an orthogonal projection <s - Ps, Ps> would vanish
    assert abs((s - ps).inner(ps)) > 1e-6 * l2_norm(s) ** 2


def test_distance_report_on_kernel_state(g):
    cor = coriolis_exact(g)
    s = build_kernel_state(random_zonal_profile(g, 4), Params(0.1, 0.1), cor)
    rep = kernel_distance_report(s, cor, k=1)
    assert rep.lhs <= 1e-10 * hk_norm(s, 3)
    assert rep.rhs <= 1e-6 * hk_norm(s, 3) / 0.1
    assert not rep.inconsistent


def test_distance_report_ratio_bounded(g):
    cor = coriolis_exact(g)
    ratios = []
    for seed in range(10):
        s = random_state(g, Params(0.1, 0.1), np.random.default_rng(seed))
        rep = kernel_distance_report(s, cor, k=1)
        assert not rep.inconsistent
        assert set(rep.as_dict()) >= {"lhs", "rhs", "ratio", "inc_ratio"}
        ratios.append(rep.ratio)
    assert 0 < max(ratios) < 1.0


def test_incompressible_distance_scales_inversely_with_alpha(g, rng):
    # exact case with dF = alpha sqrt(g1 g2): doubling alpha halves the ratio
    from zonalsim.operators import CoriolisProfile
    base = coriolis_exact(g)
    s = random_state(g, Params(0.1, 0.1), rng)
    r = []
    for scale in (1.0, 2.0):
        cor = CoriolisProfile("scaled", base.F * scale, base.dF * scale, base.C_F * scale, g)
        r.append(kernel_distance_report(s, cor, k=1).inc_ratio)
    assert r[0] / r[1] == pytest.approx(2.0, rel=1e-10)
