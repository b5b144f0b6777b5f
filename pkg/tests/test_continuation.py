"""Branch-machinery tests at moderate resolution: Newton solves,
bifurcation detection, branch switching, short continuations, and the
frozen-shape rigidity probe."""

import numpy as np
import pytest

from vesiclebif.continuation import (
    ContinuationConfig,
    NewtonError,
    branch_switch,
    continue_branch,
    detect_bifurcations,
    frozen_u_probe,
    newton_solve,
)
from vesiclebif.harmonics import build_grid
from vesiclebif.linear import mode_data
from vesiclebif.model import ModelState
from vesiclebif.residual import state_from_coeffs
from vesiclebif.symmetry import reduce_basis, subgroup

L_MAX = 8


@pytest.fixture(scope="module")
def grid():
    return build_grid(L_MAX)


@pytest.fixture(scope="module")
def group():
    return subgroup("D6d")


@pytest.fixture(scope="module")
def mode3(con):
    return [m for m in mode_data(3, con) if m.lam > 0][0]


def test_config_validation():
    with pytest.raises(ValueError):
        ContinuationConfig(ds=1.0, ds_max=0.1).validate()
    with pytest.raises(ValueError):
        ContinuationConfig(t0=0.0).validate()
    assert ContinuationConfig().validate() is not None


def test_newton_converges_to_trivial_from_small_start(con, grid, group):
    basis = reduce_basis(L_MAX, group, grid)
    rng = np.random.default_rng(51)
    c0 = 1e-3 * rng.standard_normal(len(basis))
    pt = newton_solve(0.2, (c0, 0.0, 0.0), con, basis, L_MAX, grid)
    assert pt.residual_norm < 1e-9
    assert np.max(np.abs(pt.coeffs)) < 1e-8


def test_newton_reports_nonconvergence(con, grid, group):
    basis = reduce_basis(L_MAX, group, grid)
    rng = np.random.default_rng(52)
    c0 = 50.0 * rng.standard_normal(len(basis))
    with pytest.raises(NewtonError):
        newton_solve(0.2, (c0, 0.0, 0.0), con, basis, L_MAX, grid,
                     max_iter=2)


def test_detect_bifurcations_degree3(con, group):
    modes = detect_bifurcations(3, group, con, l_max=L_MAX)
    lams = sorted(m.lam for m in modes)
    exact = np.sqrt((1 - 12 * con.epsilon) / 3)
    assert len(lams) == 2
    assert lams[0] == pytest.approx(-exact, abs=1e-9)
    assert lams[1] == pytest.approx(exact, abs=1e-9)


def test_detect_bifurcations_requires_one_dimensional_space(con):
    # degree 2 under the tetrahedral group has no invariant direction
    assert detect_bifurcations(2, subgroup("T"), con, l_max=L_MAX) == []


def test_branch_switch_leaves_trivial_branch(con, grid, group, mode3):
    t0 = 1e-2
    pt = branch_switch(mode3, group, con, t0, l_max=L_MAX, grid=grid)
    assert pt.residual_norm < 1e-9
    assert pt.amplitude == pytest.approx(t0, rel=0.2)
    assert abs(pt.lam - mode3.lam) < 0.05
    assert pt.min_J > 0


def test_branch_switch_both_signs_pitchfork(con, grid, group, mode3):
    t0 = 1e-2
    pp = branch_switch(mode3, group, con, +t0, l_max=L_MAX, grid=grid)
    pm = branch_switch(mode3, group, con, -t0, l_max=L_MAX, grid=grid)
    # odd degree: both sides see the same quadratic shift in lambda
    defect = abs(pp.lam - pm.lam)
    assert defect <= 0.05 * abs(pp.lam - mode3.lam)


def test_continue_branch_produces_converged_points(con, grid, group, mode3):
    start = branch_switch(mode3, group, con, 1e-2, l_max=L_MAX, grid=grid)
    cfg = ContinuationConfig(ds=2e-2, max_points=5, l=3, l_max=L_MAX)
    br = continue_branch(start, mode3, group, con, cfg, grid)
    assert len(br.points) == 5
    assert br.termination == "max points"
    for pt in br.points:
        assert pt.residual_norm < 1e-8
        assert pt.min_J > 0
    # amplitude grows monotonically away from the bifurcation point
    amps = [pt.amplitude for pt in br.points]
    assert all(b > a for a, b in zip(amps, amps[1:]))


def test_branch_point_json_roundtrip(con, grid, group, mode3):
    pt = branch_switch(mode3, group, con, 1e-2, l_max=L_MAX, grid=grid)
    obj = pt.to_json()
    assert obj["lambda"] == pt.lam
    assert len(obj["coeffs"]) == len(pt.coeffs)
    y = pt.y()
    assert y[-1] == pt.lam and y[-2] == pt.xi and y[-3] == pt.zeta


def test_frozen_probe_finds_no_full_system_solution(con):
    rep = frozen_u_probe(0.1, con, trials=15, seed=0, l_max=6)
    assert rep["full_system_solutions"] == []
    assert rep["phase_patterns"] == 0
    assert rep["converged_trivial"] == 15
