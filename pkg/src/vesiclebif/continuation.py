"""Branch computation: reduced Newton correction, bifurcation detection
on the spherical branch, branch switching along symmetry-adapted
directions, and pseudo-arclength continuation.

All solves happen in a symmetry-reduced Galerkin space (coefficients on
the reduced basis plus the two multipliers), with the full nonlinear
residual evaluated spectrally at every iteration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .harmonics import SpectralField, build_grid, sf_index, synthesize
from .geometry import DegenerateSurfaceError, geometry_from_u
from .model import ModelState, energy as model_energy, psi, trivial_multipliers
from .linear import ModeData, characteristic_roots, crossing_function, mode_data, sigma_tau
from .residual import (
    coeffs_from_state,
    full_residual,
    project_residual,
    reduced_jacobian,
    reduced_system,
    shape_residual,
    state_from_coeffs,
)
from .symmetry import bifurcation_direction, fixed_space, reduce_basis, subgroup

__all__ = [
    "ContinuationConfig",
    "BranchPoint",
    "Branch",
    "NewtonError",
    "newton_solve",
    "detect_bifurcations",
    "branch_switch",
    "continue_branch",
    "frozen_u_probe",
]


class NewtonError(RuntimeError):
    pass


@dataclass
class ContinuationConfig:
    t0: float = 1e-2
    ds: float = 2e-2
    ds_min: float = 1e-5
    ds_max: float = 0.1
    newton_tol: float = 1e-9
    max_newton: int = 12
    max_points: int = 40
    max_folds: int = 10
    subgroup: str = "D6d"
    l: int = 3
    l_max: int = 16

    def validate(self):
        if not (0 < self.ds_min <= self.ds <= self.ds_max):
            raise ValueError("arclength step bounds must be ordered")
        if self.newton_tol <= 0 or self.t0 == 0:
            raise ValueError("tolerances and t0 must be nonzero")
        return self


@dataclass
class BranchPoint:
    lam: float
    coeffs: np.ndarray
    zeta: float
    xi: float
    residual_norm: float
    amplitude: float
    energy: float
    min_J: float
    newton_iters: int

    def y(self):
        """Extended unknown vector (coeffs, zeta, xi, lambda)."""
        return np.concatenate([self.coeffs, [self.zeta, self.xi, self.lam]])

    def to_json(self):
        return {"lambda": self.lam, "coeffs": list(self.coeffs),
                "zeta": self.zeta, "xi": self.xi,
                "residual_norm": self.residual_norm,
                "amplitude": self.amplitude, "energy": self.energy,
                "min_J": self.min_J, "newton_iters": self.newton_iters}


@dataclass
class Branch:
    mode: ModeData
    subgroup: str
    points: list
    termination: str


def _point_from_coeffs(c, zeta, xi, lam, con, basis, l_max, grid, iters):
    state = state_from_coeffs(c, basis, l_max, zeta, xi)
    res = full_residual(state, lam, con, grid)
    rows = project_residual(res, basis)
    g = geometry_from_u(state.u, grid)
    return BranchPoint(
        lam=float(lam), coeffs=np.asarray(c, dtype=float).copy(),
        zeta=float(zeta), xi=float(xi),
        residual_norm=float(np.linalg.norm(rows)),
        amplitude=float(np.linalg.norm(np.concatenate([c, [zeta, xi]]))),
        energy=float(model_energy(state, lam, con, grid)),
        min_J=float(np.min(g.J)), newton_iters=iters)


def newton_solve(lam, v0, con, basis, l_max, grid=None, tol=1e-9,
                 max_iter=12, damped=True):
    """Newton iteration on the Galerkin-reduced residual at fixed lambda.

    v0 may be a ModelState in the span of the basis or a reduced
    coefficient tuple (c, zeta, xi). Step halving on residual increase.
    """
    if grid is None:
        grid = build_grid(l_max)
    if isinstance(v0, ModelState):
        c = coeffs_from_state(v0, basis, grid)
        zeta, xi = v0.zeta, v0.xi
    else:
        c, zeta, xi = np.asarray(v0[0], dtype=float).copy(), v0[1], v0[2]
    y = np.concatenate([c, [zeta, xi]])
    n = len(basis)

    def residual(yv):
        return reduced_system(yv[:n], yv[n], yv[n + 1], lam, con, basis,
                              l_max, grid)

    r = residual(y)
    rn = np.linalg.norm(r)
    iters = 0
    while rn > tol:
        if iters >= max_iter:
            raise NewtonError(f"no convergence after {max_iter} iterations "
                              f"(residual {rn:.3e})")
        state = state_from_coeffs(y[:n], basis, l_max, y[n], y[n + 1])
        J = reduced_jacobian(state, lam, con, basis, grid).matrix
        try:
            dy = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonError("singular reduced Jacobian") from exc
        step = 1.0
        while True:
            r_new = residual(y + step * dy)
            rn_new = np.linalg.norm(r_new)
            if (not damped) or rn_new < rn or step < 1.0 / 64:
                break
            step *= 0.5
        y = y + step * dy
        r, rn = r_new, rn_new
        iters += 1
    return _point_from_coeffs(y[:n], y[n], y[n + 1], lam, con, basis,
                              l_max, grid, iters)


def detect_bifurcations(l, group, con, interval=None, l_max=8, grid=None,
                        rank_check=True):
    """Characteristic roots of degree l that are admissible bifurcation
    points for the given subgroup: sign change of the crossing function
    plus a verified rank drop of the reduced Jacobian at the root."""
    if fixed_space(l, group).dimension != 1:
        return []
    if grid is None:
        grid = build_grid(l_max)
    modes = [m for m in mode_data(l, con, interval) if not m.tangential]
    out = []
    basis = reduce_basis(l_max, group, grid)
    for m in modes:
        # sign change of the crossing function around the root
        d = 1e-4
        s_lo = crossing_function(m.lam - d, l, con)
        s_hi = crossing_function(m.lam + d, l, con)
        if s_lo * s_hi >= 0:
            continue
        if rank_check:
            state = ModelState.trivial(l_max)
            J = reduced_jacobian(state, m.lam, con, basis, grid).matrix
            s = np.linalg.svd(J, compute_uv=False)
            J_off = reduced_jacobian(state, m.lam + 0.05, con, basis,
                                     grid).matrix
            s_off = np.linalg.svd(J_off, compute_uv=False)
            if not (s[-1] < 1e-5 * s[0] and s_off[-1] > 1e3 * s[-1]):
                continue
        out.append(m)
    return out


def _direction_coeffs(mode, group, basis, l_max, grid):
    """Reduced coefficients of the unit-norm branch direction z_hat."""
    zhat = bifurcation_direction(mode.l, group, mode, l_max, grid)
    zc = coeffs_from_state(zhat, basis, grid)
    # normalize in the reduced metric (basis states are L2-orthonormal)
    return zc / np.linalg.norm(zc)


def branch_switch(mode, group, con, t0, l_max=16, grid=None, config=None):
    """First nontrivial point on the bifurcating branch.

    Predictor (lambda_l, t0 z_hat); corrector solves the reduced system
    with lambda released and the amplitude pinned: <c, z_hat> = t0.
    """
    if grid is None:
        grid = build_grid(l_max)
    cfg = config or ContinuationConfig(l=mode.l, subgroup=getattr(
        group, "name", str(group)), l_max=l_max)
    basis = reduce_basis(l_max, group, grid)
    n = len(basis)
    zc = _direction_coeffs(mode, group, basis, l_max, grid)

    y = np.zeros(n + 3)
    y[:n] = t0 * zc
    y[-1] = mode.lam

    def F(yv):
        rows = reduced_system(yv[:n], yv[n], yv[n + 1], yv[-1], con, basis,
                              l_max, grid)
        pin = zc @ yv[:n] - t0
        return np.concatenate([rows, [pin]])

    r = F(y)
    rn = np.linalg.norm(r)
    for it in range(cfg.max_newton):
        if rn <= cfg.newton_tol:
            break
        state = state_from_coeffs(y[:n], basis, l_max, y[n], y[n + 1])
        Jv = reduced_jacobian(state, y[-1], con, basis, grid).matrix
        J = np.zeros((n + 3, n + 3))
        J[: n + 2, : n + 2] = Jv
        h = 1e-7 * max(1.0, abs(y[-1]))
        J[: n + 2, -1] = (reduced_system(y[:n], y[n], y[n + 1], y[-1] + h,
                                         con, basis, l_max, grid)
                          - reduced_system(y[:n], y[n], y[n + 1], y[-1] - h,
                                           con, basis, l_max, grid)) / (2 * h)
        J[-1, :n] = zc
        dy = np.linalg.solve(J, -r)
        step = 1.0
        while True:
            r_new = F(y + step * dy)
            rn_new = np.linalg.norm(r_new)
            if rn_new < rn or step < 1.0 / 64:
                break
            step *= 0.5
        y = y + step * dy
        r, rn = r_new, rn_new
    if rn > cfg.newton_tol:
        raise NewtonError(f"branch switch failed to converge ({rn:.3e})")
    if np.linalg.norm(y[:n]) < 0.1 * abs(t0):
        raise NewtonError("corrector fell back to the trivial branch; "
                          "retry with larger t0")
    return _point_from_coeffs(y[:n], y[n], y[n + 1], y[-1], con, basis,
                              l_max, grid, it)


def continue_branch(start, mode, group, con, config, grid=None):
    """Pseudo-arclength continuation from a converged starting point.

    Secant-tangent predictor, Newton corrector with the arclength row,
    step halving on failure, fold recording via sign changes of the
    lambda-component of the tangent.
    """
    cfg = config.validate()
    l_max = cfg.l_max
    if grid is None:
        grid = build_grid(l_max)
    basis = reduce_basis(l_max, group, grid)
    n = len(basis)
    points = [start]
    termination = "max points"
    folds = 0

    # secant from the trivial branch point at the same lambda
    y_prev = np.zeros(n + 3)
    y_prev[-1] = mode.lam
    y_cur = start.y()
    ds = cfg.ds

    def corrector(y_pred, tangent):
        y = y_pred.copy()

        def F(yv):
            rows = reduced_system(yv[:n], yv[n], yv[n + 1], yv[-1], con,
                                  basis, l_max, grid)
            arc = tangent @ (yv - y_pred)
            return np.concatenate([rows, [arc]])

        r = F(y)
        rn = np.linalg.norm(r)
        for it in range(cfg.max_newton):
            if rn <= cfg.newton_tol:
                return y, it
            state = state_from_coeffs(y[:n], basis, l_max, y[n], y[n + 1])
            Jv = reduced_jacobian(state, y[-1], con, basis, grid).matrix
            J = np.zeros((n + 3, n + 3))
            J[: n + 2, : n + 2] = Jv
            h = 1e-7 * max(1.0, abs(y[-1]))
            J[: n + 2, -1] = (
                reduced_system(y[:n], y[n], y[n + 1], y[-1] + h, con, basis,
                               l_max, grid)
                - reduced_system(y[:n], y[n], y[n + 1], y[-1] - h, con,
                                 basis, l_max, grid)) / (2 * h)
            J[-1] = tangent
            dy = np.linalg.solve(J, -r)
            y = y + dy
            r = F(y)
            rn = np.linalg.norm(r)
        if rn <= cfg.newton_tol:
            return y, cfg.max_newton
        raise NewtonError(f"corrector stalled at {rn:.3e}")

    prev_dlam = None
    while len(points) < cfg.max_points:
        tangent = y_cur - y_prev
        nt = np.linalg.norm(tangent)
        if nt == 0:
            termination = "stagnated"
            break
        tangent /= nt
        accepted = False
        while not accepted:
            y_pred = y_cur + ds * tangent
            try:
                y_new, iters = corrector(y_pred, tangent)
                accepted = True
            except (NewtonError, DegenerateSurfaceError, np.linalg.LinAlgError):
                ds *= 0.5
                if ds < cfg.ds_min:
                    termination = "step floor"
                    return Branch(mode=mode, subgroup=getattr(
                        group, "name", str(group)), points=points,
                        termination=termination)
        pt = _point_from_coeffs(y_new[:n], y_new[n], y_new[n + 1], y_new[-1],
                                con, basis, l_max, grid, iters)
        points.append(pt)
        dlam = y_new[-1] - y_cur[-1]
        if prev_dlam is not None and dlam * prev_dlam < 0:
            folds += 1
            if folds >= cfg.max_folds:
                termination = "fold count"
                break
        prev_dlam = dlam
        y_prev, y_cur = y_cur, y_new
        if iters <= 3 and ds < cfg.ds_max:
            ds = min(cfg.ds_max, 1.3 * ds)
    return Branch(mode=mode, subgroup=getattr(group, "name", str(group)),
                  points=points, termination=termination)


def frozen_u_probe(lam, con, trials=50, seed=0, l_max=8, amp=0.02,
                   tol=1e-11, max_iter=60):
    """Search for nontrivial equilibria on the frozen round sphere.

    Newton on the phase equation with u = 0 plus the mean-phase
    constraint, from seeded random spectral starts. The phase equation
    alone does admit nontrivial patterns inside the spinodal interval
    (they are stationary states of the phase field on a fixed sphere);
    the point of the probe is that none of them survives the shape
    equation, which on the round sphere reduces to the pointwise
    condition W - gamma - mu*phi = p/2 and therefore forces a constant
    phase field. Every converged nontrivial pattern is scored by its
    shape-equation defect; 'full_system_solutions' collects patterns
    that also satisfy the shape equation and must come back empty.
    """
    grid = build_grid(l_max)
    nb = (l_max + 1) ** 2
    eig = np.array([l * (l + 1) for l in range(l_max + 1)
                    for _ in range(2 * l + 1)], dtype=float)
    # nodal values of every basis mode, used to assemble the Jacobian
    modes = np.empty((nb, grid.n_theta, grid.n_psi))
    for k in range(nb):
        c = SpectralField.zeros(l_max)
        c.coeffs[k] = 1.0
        modes[k] = synthesize(c, grid).values
    w = grid.weights
    norms2 = grid.norms2[:nb]
    mu0 = float(psi(con, lam)[1])

    def newton(c0):
        c = c0.copy()
        xi = 0.0
        for it in range(max_iter):
            phig = np.tensordot(c, modes, axes=(0, 0))
            phit = lam + phig
            point = (con.Wp(phit) + con.Bp(phit) + con.Ep(phit)
                     - mu0 - xi)
            r_field = con.epsilon * eig * c + np.tensordot(
                modes, w * point, axes=([1, 2], [0, 1])) / norms2
            r = np.concatenate([r_field, [np.sum(w * phig)]])
            if np.linalg.norm(r) < tol:
                return c, xi, True
            dpoint = con.Wpp(phit) + con.Bpp(phit) + con.Epp(phit)
            mult = np.tensordot(modes * (w * dpoint), modes,
                                axes=([1, 2], [1, 2]))
            J = np.zeros((nb + 1, nb + 1))
            J[:nb, :nb] = np.diag(con.epsilon * eig) + mult / norms2[:, None]
            J[:nb, nb] = -1.0 * (np.tensordot(
                modes, w, axes=([1, 2], [0, 1])) / norms2)
            J[nb, :nb] = np.tensordot(modes, w, axes=([1, 2], [0, 1]))
            try:
                d = np.linalg.solve(J, -r)
            except np.linalg.LinAlgError:
                return c, xi, False
            c = c + d[:nb]
            xi = xi + d[nb]
            if not np.all(np.isfinite(c)) or np.max(np.abs(c)) > 1e6:
                return c, xi, False
        return c, xi, False

    def shape_defect(c, xi):
        """Residual of the shape equation at u = 0 for a phase-only
        solution; the constant mean is removed because the area
        multiplier can always absorb it."""
        st = ModelState(SpectralField(l_max, c.copy()),
                        SpectralField.zeros(l_max), 0.0, float(xi))
        fdef = shape_residual(st, lam, con, grid).values
        fdef = fdef - np.sum(w * fdef) / (4.0 * np.pi)
        return float(np.max(np.abs(fdef)))

    rng = np.random.default_rng(seed)
    report = {"lambda": lam, "trials": trials, "converged_trivial": 0,
              "diverged": 0, "phase_patterns": 0,
              "full_system_solutions": []}
    for _ in range(trials):
        c0 = amp * rng.standard_normal(nb) / np.sqrt(norms2)
        c, xi, ok = newton(c0)
        if not ok:
            report["diverged"] += 1
        elif np.max(np.abs(np.tensordot(c, modes, axes=(0, 0)))) < 1e-7:
            report["converged_trivial"] += 1
        else:
            report["phase_patterns"] += 1
            if shape_defect(c, xi) < 1e-8:
                report["full_system_solutions"].append(list(c))
    return report
