"""Nonlinear equilibrium residual of the constrained two-phase vesicle model.

The unknown is v = (phi, u, zeta, xi). The residual stacks the phase
equation, the shape equation, and the area / mean-phase constraints; the
multipliers (gamma, mu) are reconstructed from (zeta, xi) and the trivial
branch at lambda, so the residual vanishes identically at v = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import GridField, SpectralField, analyze, build_grid, synthesize
from .geometry import (
    curvature_contract,
    geometry_from_u,
    grad_sigma_norm2,
    laplace_beltrami_sigma,
)
from .model import ModelState, psi, recover_multipliers

__all__ = [
    "ResidualValue",
    "ReducedJacobian",
    "phase_residual",
    "shape_residual",
    "full_residual",
    "project_residual",
    "reduced_system",
    "reduced_jacobian",
]


@dataclass
class ResidualValue:
    """Defects of the two field equations plus the two constraint values."""

    r_phase: GridField
    r_shape: GridField
    c_area: float
    c_phase: float

    def norms(self):
        return (float(np.max(np.abs(self.r_phase.values))),
                float(np.max(np.abs(self.r_shape.values))),
                abs(self.c_area), abs(self.c_phase))


def _prep(state, lam, con, grid):
    if grid is None:
        grid = build_grid(state.u.l_max)
    g = geometry_from_u(state.u, grid)
    phig = synthesize(state.phi, grid)
    phit = lam + phig.values
    gamma, mu = recover_multipliers(con, lam, state)
    return grid, g, phig, phit, gamma, mu


def phase_residual(state, lam, con, grid=None, _prepped=None):
    """Chemical-equilibrium defect
    -eps Lap_Sigma(phi) + B'H^2 + E'K + W' - mu on the deformed surface."""
    grid, g, phig, phit, gamma, mu = _prepped or _prep(state, lam, con, grid)
    lap = laplace_beltrami_sigma(phig, g).values
    r = (-con.epsilon * lap + con.Bp(phit) * g.H ** 2
         + con.Ep(phit) * g.K + con.Wp(phit) - mu)
    return GridField(grid, r)


def shape_residual(state, lam, con, grid=None, _prepped=None):
    """Normal mechanical-equilibrium defect: bending, coupling, and
    pressure terms of the shape equation, evaluated term by term."""
    grid, g, phig, phit, gamma, mu = _prepped or _prep(state, lam, con, grid)
    BH = GridField(grid, con.B(phit) * g.H)
    Ef = GridField(grid, con.E(phit))
    lap_BH = laplace_beltrami_sigma(BH, g).values
    lap_E = laplace_beltrami_sigma(Ef, g).values
    _, q2_E = curvature_contract(Ef, g)
    q1_phi, _ = curvature_contract(phig, g)
    gn2 = grad_sigma_norm2(phig, g).values
    r = (lap_BH - 2.0 * g.H * lap_E + q2_E.values
         + con.epsilon * (q1_phi.values - g.H * gn2)
         + 2.0 * con.B(phit) * g.H * (g.H ** 2 - g.K)
         - 2.0 * g.H * (con.W(phit) - gamma - mu * phit)
         - con.pressure)
    return GridField(grid, r)


def full_residual(state, lam, con, grid=None):
    """All four residual components in one geometry pass."""
    prepped = _prep(state, lam, con, grid)
    grid, g, phig, phit, gamma, mu = prepped
    c_area = grid.integrate(g.J) - 4.0 * np.pi
    c_phase = grid.integrate(phig.values * g.J)
    return ResidualValue(
        r_phase=phase_residual(state, lam, con, grid, _prepped=prepped),
        r_shape=shape_residual(state, lam, con, grid, _prepped=prepped),
        c_area=float(c_area), c_phase=float(c_phase))


def _basis_values(b, grid):
    """Nodal values of the (phi, u) parts of a basis state, cached on the
    state per grid; None marks an identically zero part."""
    cache = getattr(b, "_nodal_cache", None)
    if cache is None or cache[0] is not grid:
        pv = (synthesize(b.phi, grid).values
              if b.phi is not None and np.any(b.phi.coeffs) else None)
        uv = (synthesize(b.u, grid).values
              if b.u is not None and np.any(b.u.coeffs) else None)
        cache = (grid, pv, uv)
        b._nodal_cache = cache
    return cache[1], cache[2]


def project_residual(res, basis):
    """Galerkin rows: residual fields paired with the (phi, u) parts of
    each basis state under the round-sphere measure, plus the two
    constraint rows."""
    grid = res.r_phase.grid
    w = grid.w_theta[:, None] * grid.w_psi
    wp = w * res.r_phase.values
    ws = w * res.r_shape.values
    rows = np.empty(len(basis) + 2)
    for k, b in enumerate(basis):
        pv, uv = _basis_values(b, grid)
        val = 0.0
        if pv is not None:
            val += float(np.vdot(wp, pv))
        if uv is not None:
            val += float(np.vdot(ws, uv))
        rows[k] = val
    rows[-2] = res.c_area
    rows[-1] = res.c_phase
    return rows


def state_from_coeffs(c, basis, l_max, zeta=0.0, xi=0.0):
    """Assemble a ModelState from reduced coefficients on a basis."""
    phi = SpectralField.zeros(l_max)
    u = SpectralField.zeros(l_max)
    for ck, b in zip(c, basis):
        if b.phi is not None:
            phi.coeffs += ck * b.phi.coeffs
        if b.u is not None:
            u.coeffs += ck * b.u.coeffs
    return ModelState(phi, u, float(zeta), float(xi))


def reduced_system(c, zeta, xi, lam, con, basis, l_max, grid=None):
    """Residual rows of the Galerkin-reduced system at reduced unknowns."""
    state = state_from_coeffs(c, basis, l_max, zeta, xi)
    return project_residual(full_residual(state, lam, con, grid), basis)


@dataclass
class ReducedJacobian:
    basis: list
    matrix: np.ndarray
    condition: float


def reduced_jacobian(state, lam, con, basis, grid=None, h_scale=None):
    """Finite-difference Jacobian of the reduced system.

    Field columns are central differences along basis directions; the
    multiplier columns are exact one-sided differences because the
    residual is affine in (zeta, xi).
    """
    if grid is None:
        grid = build_grid(state.u.l_max)
    l_max = state.u.l_max
    n = len(basis)
    # current reduced coefficients: Euclidean projection assuming the basis
    # states are orthonormal in the normalized coefficient convention
    c0 = coeffs_from_state(state, basis, grid)
    h = h_scale if h_scale is not None else np.sqrt(np.finfo(float).eps) * max(
        1.0, np.max(np.abs(c0)) if n else 1.0)
    J = np.empty((n + 2, n + 2))
    base = reduced_system(c0, state.zeta, state.xi, lam, con, basis, l_max, grid)
    for k in range(n):
        cp = c0.copy(); cp[k] += h
        cm = c0.copy(); cm[k] -= h
        rp = reduced_system(cp, state.zeta, state.xi, lam, con, basis, l_max, grid)
        rm = reduced_system(cm, state.zeta, state.xi, lam, con, basis, l_max, grid)
        J[:, k] = (rp - rm) / (2.0 * h)
    rz = reduced_system(c0, state.zeta + 1.0, state.xi, lam, con, basis, l_max, grid)
    rx = reduced_system(c0, state.zeta, state.xi + 1.0, lam, con, basis, l_max, grid)
    J[:, n] = rz - base
    J[:, n + 1] = rx - base
    cond = float(np.linalg.cond(J))
    return ReducedJacobian(basis=basis, matrix=J, condition=cond)


def coeffs_from_state(state, basis, grid=None):
    """Reduced coefficients of a state on an orthonormal-in-L2 basis."""
    if grid is None:
        grid = build_grid(state.u.l_max)
    c = np.empty(len(basis))
    w = grid.w_theta[:, None] * grid.w_psi
    phig = None
    ug = None
    for k, b in enumerate(basis):
        pv, uv = _basis_values(b, grid)
        val = 0.0
        if pv is not None:
            if phig is None:
                phig = w * synthesize(state.phi, grid).values
            val += float(np.vdot(phig, pv))
        if uv is not None:
            if ug is None:
                ug = w * synthesize(state.u, grid).values
            val += float(np.vdot(ug, uv))
        c[k] = val
    return c
