"""Symmetry-machinery tests: group closure, representation matrices,
fixed-space dimensions and published coefficient ratios, and the
symmetry-reduced basis."""

import numpy as np
import pytest

from vesiclebif.harmonics import SpectralField, build_grid, sf_index, synthesize
from vesiclebif.linear import mode_data
from vesiclebif.symmetry import (
    CATALOG,
    act,
    bifurcation_direction,
    close_subgroup,
    fixed_space,
    reduce_basis,
    rep_matrix,
    rotation,
    subgroup,
)


def test_rotation_matrices_orthogonal():
    rng = np.random.default_rng(41)
    for _ in range(5):
        R = rotation(rng.standard_normal(3), rng.uniform(0, 2 * np.pi))
        assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_group_orders():
    assert subgroup("T").order() == 12
    assert subgroup("O").order() == 24
    assert subgroup("O-").order() == 24
    assert subgroup("OxZ2c").order() == 48
    assert subgroup("I").order() == 60
    assert subgroup("IxZ2c").order() == 120
    assert subgroup("D6d").order() == 12
    assert subgroup("O2-").finite is False


def test_close_subgroup_detects_continuous_group():
    with pytest.raises(RuntimeError):
        close_subgroup([rotation([0, 0, 1], 1.0)], max_order=50)


def test_degree_one_representation_is_the_group_element():
    # coefficient order (m = -1, 0, 1) corresponds to (x2, x3, x1)
    rng = np.random.default_rng(42)
    perm = [1, 2, 0]
    for _ in range(4):
        G = rotation(rng.standard_normal(3), rng.uniform(0, 2 * np.pi))
        T = rep_matrix(1, G)
        assert np.allclose(T, G[np.ix_(perm, perm)], atol=1e-10)
    refl = np.diag([1.0, 1.0, -1.0])
    T = rep_matrix(1, refl)
    assert np.allclose(T, refl[np.ix_(perm, perm)], atol=1e-12)


def test_representation_is_homomorphism():
    rng = np.random.default_rng(43)
    G1 = rotation(rng.standard_normal(3), 0.7)
    G2 = rotation(rng.standard_normal(3), 1.9)
    for l in (2, 4):
        T12 = rep_matrix(l, G1 @ G2)
        assert np.allclose(rep_matrix(l, G1) @ rep_matrix(l, G2), T12,
                           atol=1e-9)


def test_representation_orthogonal_in_norm_scaled_basis():
    grid = build_grid(6)
    G = rotation([1.0, 0.5, -0.3], 1.1)
    for l in (1, 3, 5):
        T = rep_matrix(l, G, grid)
        base = sf_index(l, -l)
        d = np.sqrt(grid.norms2[base:base + 2 * l + 1])
        Tn = d[:, None] * T / d[None, :]
        assert np.allclose(Tn.T @ Tn, np.eye(2 * l + 1), atol=1e-9)


def test_act_is_composition_with_inverse_element():
    # rho(G^T x) synthesized from transformed coefficients equals the
    # original field evaluated at rotated nodes; check via double action
    rng = np.random.default_rng(44)
    grid = build_grid(6)
    G = rotation(rng.standard_normal(3), 0.9)
    f = SpectralField(6, rng.standard_normal(49))
    once = act(G, f, grid)
    back = act(G.T, once, grid)
    assert np.max(np.abs(back.coeffs - f.coeffs)) < 1e-9


def test_fixed_space_examples():
    grid = build_grid(8)
    # degree 3, 12-element dihedral-type group: single sectoral harmonic
    fs = fixed_space(3, subgroup("D6d"), grid)
    assert fs.dimension == 1
    vec = fs.basis_unnormalized[0]
    mask = np.zeros(7)
    mask[3 + 3] = 1.0
    assert np.max(np.abs(vec / vec[6] - mask)) < 1e-9
    # degree 3, orientation-mixed octahedral group: single m = -2 harmonic
    fs = fixed_space(3, subgroup("O-"), grid)
    assert fs.dimension == 1
    vec = fs.basis_unnormalized[0]
    assert abs(vec[3 - 2]) == pytest.approx(np.max(np.abs(vec)))
    # degree 4 octahedral-with-inversion ratio 168 : 1
    fs = fixed_space(4, subgroup("OxZ2c"), grid)
    assert fs.dimension == 1
    vec = fs.basis_unnormalized[0]
    assert vec[4 + 0] / vec[4 + 4] == pytest.approx(168.0, rel=1e-9)
    # degree 6 icosahedral-with-inversion ratio 3960 : -1
    fs = fixed_space(6, subgroup("IxZ2c"), grid)
    assert fs.dimension == 1
    vec = fs.basis_unnormalized[0]
    assert vec[6 + 0] / vec[6 + 5] == pytest.approx(-3960.0, rel=1e-9)


def test_degree_one_fixed_spaces_pin_translations():
    for name in CATALOG:
        dim = fixed_space(1, subgroup(name)).dimension
        assert dim == (1 if name == "O2-" else 0)


def test_degree_two_zonal_space_is_one_dimensional():
    # the 3-fold axis kills |m| in {1, 2} and both flips fix the even
    # zonal harmonic, leaving exactly span{rho_{2,0}}
    fs = fixed_space(2, subgroup("D6d"))
    assert fs.dimension == 1
    vec = fs.basis_unnormalized[0]
    assert abs(vec[2]) == pytest.approx(np.max(np.abs(vec)))


def test_axial_selection_rule():
    assert fixed_space(3, subgroup("O2-")).dimension == 1
    assert fixed_space(3, subgroup("O2xZ2c")).dimension == 0
    assert fixed_space(4, subgroup("O2xZ2c")).dimension == 1


def test_bifurcation_direction_structure(con):
    mode = [m for m in mode_data(3, con) if m.lam > 0][0]
    z = bifurcation_direction(3, subgroup("D6d"), mode, l_max=8)
    assert z.zeta == 0.0 and z.xi == 0.0
    # u component is tau * phi component (tau = 0 for constant moduli)
    assert np.allclose(z.u.coeffs, mode.tau * z.phi.coeffs)
    assert np.any(z.phi.coeffs != 0.0)
    with pytest.raises(ValueError):
        bifurcation_direction(2, subgroup("T"), mode, l_max=8)


def test_reduce_basis_orthonormal(grid8):
    basis = reduce_basis(8, subgroup("D6d"), grid8)
    vals = []
    for b in basis:
        f = b.phi if np.any(b.phi.coeffs) else b.u
        vals.append(synthesize(f, grid8).values)
    n = len(basis)
    for i in range(n):
        for j in range(i, n):
            dot = grid8.integrate(vals[i] * vals[j])
            same_channel = (np.any(basis[i].phi.coeffs)
                            == np.any(basis[j].phi.coeffs))
            expect = 1.0 if i == j else 0.0
            if not same_channel:
                continue  # phi and u states are orthogonal by construction
            assert dot == pytest.approx(expect, abs=1e-9)


def test_invariance_of_reduced_states(grid8):
    group = subgroup("D6d")
    basis = reduce_basis(8, group, grid8)
    rng = np.random.default_rng(45)
    c = rng.standard_normal(len(basis))
    st = None
    from vesiclebif.residual import state_from_coeffs
    st = state_from_coeffs(c, basis, 8)
    for G in group.generators:
        rotated = act(G, st, grid8)
        assert np.max(np.abs(rotated.phi.coeffs - st.phi.coeffs)) < 1e-8
        assert np.max(np.abs(rotated.u.coeffs - st.u.coeffs)) < 1e-8
