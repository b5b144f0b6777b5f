"""Constitutive-layer tests: potential derivatives, validation, energy
values on round spheres, and stationarity of the constrained Lagrangian."""

import numpy as np
import pytest

from vesiclebif.harmonics import SpectralField, build_grid, synthesize
from vesiclebif.model import (
    ModelState,
    constitutive_from_config,
    constraints,
    energy,
    lagrangian,
    psi,
    quartic_constitutive,
    recover_multipliers,
    tabulated_constitutive,
    trivial_multipliers,
)
from vesiclebif.residual import full_residual
from vesiclebif.geometry import geometry_from_u

from conftest import random_band_limited


def test_quartic_well_derivatives_consistent():
    con = quartic_constitutive()
    x = np.linspace(-2, 2, 41)
    h = 1e-6
    assert np.allclose(con.Wp(x), (con.W(x + h) - con.W(x - h)) / (2 * h),
                       atol=1e-7)
    assert np.allclose(con.Wpp(x), (con.Wp(x + h) - con.Wp(x - h)) / (2 * h),
                       atol=1e-7)
    assert np.allclose(con.Wppp(x),
                       (con.Wpp(x + h) - con.Wpp(x - h)) / (2 * h), atol=1e-6)


def test_sigmoid_moduli_derivatives_consistent():
    con = quartic_constitutive(b0=1.0, b1=0.5, e0=0.1, e1=0.3, width=0.2)
    x = np.linspace(-2, 2, 41)
    h = 1e-6
    for f, fp in ((con.B, con.Bp), (con.Bp, con.Bpp), (con.Bpp, con.Bppp),
                  (con.E, con.Ep), (con.Ep, con.Epp), (con.Epp, con.Eppp)):
        assert np.allclose(fp(x), (f(x + h) - f(x - h)) / (2 * h), atol=1e-6)


def test_sigmoid_moduli_no_overflow():
    con = quartic_constitutive(b1=0.5)
    with np.errstate(over="raise"):
        vals = con.B(np.array([-1e4, 1e4]))
    assert np.allclose(vals, [1.0, 1.5])


def test_validation_rejects_bad_constitutive():
    with pytest.raises(ValueError):
        quartic_constitutive(epsilon=2.0)  # B < epsilon
    with pytest.raises(ValueError):
        quartic_constitutive(pressure=-1.0)


def test_constitutive_from_config_roundtrip():
    cfg = {"epsilon": 0.02, "pressure": 0.1,
           "W": {"type": "quartic_double_well"},
           "B": {"b0": 1.5, "b1": 0.2, "width": 0.3},
           "E": {"e0": 0.0, "e1": 0.0}}
    con = constitutive_from_config(cfg)
    assert con.epsilon == 0.02
    assert con.pressure == 0.1
    assert con.B(0.0) == pytest.approx(1.6)
    with pytest.raises(ValueError):
        constitutive_from_config({"W": {"type": "nope"}})


def test_tabulated_constitutive_matches_quartic():
    ref = quartic_constitutive()
    x = np.linspace(-2.5, 2.5, 801)
    con = tabulated_constitutive(x, ref.W(x), ref.Wp(x), ref.Wpp(x))
    s = np.linspace(-2, 2, 101)
    assert np.max(np.abs(con.W(s) - ref.W(s))) < 1e-6
    assert con.spinodal[0] == pytest.approx(ref.spinodal[0], abs=1e-2)


def test_psi_and_trivial_multipliers():
    con = quartic_constitutive()
    lam = 0.3
    w, wp, wpp, wppp = psi(con, lam)
    assert w == pytest.approx(con.W(lam) + 1.0)  # B = 1, E = 0
    assert wp == pytest.approx(con.Wp(lam))
    tb = trivial_multipliers(con, lam)
    assert tb.mu == pytest.approx(con.Wp(lam))
    assert tb.gamma == pytest.approx(con.W(lam) - lam * con.Wp(lam))
    st = ModelState.trivial(4)
    st.zeta, st.xi = 0.2, -0.1
    gamma, mu = recover_multipliers(con, lam, st)
    assert gamma == pytest.approx(tb.gamma + 0.2)
    assert mu == pytest.approx(tb.mu - 0.1)


def test_energy_on_round_sphere():
    con = quartic_constitutive(pressure=0.5)
    l_max = 8
    grid = build_grid(l_max)
    lam = 0.2
    st = ModelState.trivial(l_max)
    # H^2 = K = 1 on the unit sphere, fields constant
    expect = 4 * np.pi * (con.B(lam) + con.E(lam) + con.W(lam)) \
        - con.pressure * 4 * np.pi / 3
    assert energy(st, lam, con, grid) == pytest.approx(expect, rel=1e-12)
    ca, cp = constraints(st, lam, con, grid)
    assert abs(ca) < 1e-12 and abs(cp) < 1e-12


def test_lagrangian_stationary_at_spherical_state():
    # includes the mean (degree-0) direction, which exposes any
    # inconsistency between the multipliers and the constraint targets
    con = quartic_constitutive(pressure=0.3)
    l_max = 8
    grid = build_grid(l_max)
    lam = 0.25
    rng = np.random.default_rng(7)
    nb = (l_max + 1) ** 2
    h = 1e-6
    for _ in range(4):
        d_phi = rng.standard_normal(nb) / np.sqrt(grid.norms2[:nb])
        d_u = rng.standard_normal(nb) / np.sqrt(grid.norms2[:nb])
        lp = lagrangian(ModelState(SpectralField(l_max, h * d_phi),
                                   SpectralField(l_max, h * d_u)),
                        lam, con, grid)
        lm = lagrangian(ModelState(SpectralField(l_max, -h * d_phi),
                                   SpectralField(l_max, -h * d_u)),
                        lam, con, grid)
        assert abs((lp - lm) / (2 * h)) < 1e-8


def test_lagrangian_gradient_matches_residual_pairing():
    # full first-variation identity at a generic (non-equilibrium) state:
    # dL = int r_phase dphi J + int r_shape exp(3u) du
    #      - int r_phase (grad_Sigma phi . x_hat) exp(u) du J.
    # The exp(3u) weight is the normal speed times the area element of
    # the radial graph; the last term is the tangential transport of phi
    # by the non-normal part of the variation exp(u) du x_hat, whose
    # density sums to r_phase because every phi-dependent energy and
    # constraint term contributes its own phi-derivative. Both correction
    # terms vanish at equilibria.
    from vesiclebif.geometry import _grad_and_frame_components

    con = quartic_constitutive()
    l_max = 12
    grid = build_grid(l_max)
    lam = 0.2
    rng = np.random.default_rng(8)
    nb = (l_max + 1) ** 2
    phi = SpectralField(l_max, random_band_limited(l_max, grid, rng, l_band=2))
    u = SpectralField(l_max, random_band_limited(l_max, grid, rng, l_band=2))
    st = ModelState(phi, u, 0.05, -0.02)
    res = full_residual(st, lam, con, grid)
    g = geometry_from_u(u, grid)
    phig = synthesize(phi, grid)
    _, f1, f2 = _grad_and_frame_components(phig, g)
    grad_sig = f1[None] * g.a_up[0] + f2[None] * g.a_up[1]
    radial_transport = np.einsum("i...,i...->...", grad_sig, g.x)
    h = 1e-6
    for _ in range(3):
        d_phi = np.zeros(nb)
        d_u = np.zeros(nb)
        d_phi[:9] = rng.standard_normal(9)
        d_u[:9] = rng.standard_normal(9)
        lp = lagrangian(ModelState(SpectralField(l_max, phi.coeffs + h * d_phi),
                                   SpectralField(l_max, u.coeffs + h * d_u),
                                   st.zeta, st.xi), lam, con, grid)
        lm = lagrangian(ModelState(SpectralField(l_max, phi.coeffs - h * d_phi),
                                   SpectralField(l_max, u.coeffs - h * d_u),
                                   st.zeta, st.xi), lam, con, grid)
        fd = (lp - lm) / (2 * h)
        dpg = synthesize(SpectralField(l_max, d_phi), grid).values
        dug = synthesize(SpectralField(l_max, d_u), grid).values
        pairing = (grid.integrate(res.r_phase.values * dpg * g.J)
                   + grid.integrate(res.r_shape.values * dug
                                    * np.exp(3.0 * g.u))
                   - grid.integrate(res.r_phase.values * radial_transport
                                    * np.exp(g.u) * dug * g.J))
        assert fd == pytest.approx(pairing, rel=1e-7, abs=1e-9)


def test_state_json_roundtrip():
    rng = np.random.default_rng(9)
    st = ModelState(SpectralField(3, rng.standard_normal(16)),
                    SpectralField(3, rng.standard_normal(16)), 0.1, -0.2)
    back, lam = ModelState.from_json(st.to_json(0.4))
    assert lam == 0.4
    assert np.allclose(back.phi.coeffs, st.phi.coeffs)
    assert np.allclose(back.u.coeffs, st.u.coeffs)
    assert back.zeta == st.zeta and back.xi == st.xi
