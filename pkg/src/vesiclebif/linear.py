"""Linearized analysis along the spherical branch.

Everything here lives at the trivial state: roots of the characteristic
equation eps l(l+1) + Psi''(lambda) = 0, the amplitude factors sigma_l and
tau_l of the bifurcation modes, the analytic linearized operator, and the
crossing function whose sign change certifies a bifurcation point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .harmonics import SpectralField, build_grid, sf_index
from .model import psi

__all__ = [
    "ModeData",
    "characteristic_roots",
    "sigma_tau",
    "mode_data",
    "apply_L",
    "crossing_function",
    "build_L_matrix",
    "null_space_dimension",
]


@dataclass
class ModeData:
    """One root of the characteristic equation and its mode amplitudes."""

    l: int
    lam: float
    sigma: float
    tau: float
    pitchfork: bool
    tangential: bool = False
    crossing_slope: float = 0.0


def crossing_function(lam, l, con):
    """sigma_hat(lambda) = eps l(l+1) + Psi''(lambda); a sign change at a
    root marks an admissible bifurcation point."""
    n = l * (l + 1)
    return con.epsilon * n + psi(con, lam)[2]


def characteristic_roots(l, con, interval=None, n_scan=4000,
                         include_tangential=False):
    """All roots of the characteristic equation for degree l.

    Sign-scan plus bisection refinement to 1e-12 over the search interval
    (default: spinodal hull widened by 20%). Roots where sigma_hat touches
    zero without changing sign are excluded from the returned list; pass
    include_tangential=True to get them as a second list.
    """
    if interval is None:
        m1, m2 = con.spinodal
        half = 0.1 * (m2 - m1)
        interval = (m1 - half, m2 + half)
    lo, hi = interval
    xs = np.linspace(lo, hi, n_scan + 1)
    fs = np.array([crossing_function(x, l, con) for x in xs])
    roots = []
    exact_tangential = []
    for i in range(n_scan):
        if fs[i] == 0.0:
            # classify by the neighboring signs: no sign change -> tangential
            if 0 < i and fs[i - 1] * fs[i + 1] > 0.0:
                exact_tangential.append(xs[i])
            else:
                roots.append(xs[i])
        elif fs[i] * fs[i + 1] < 0.0:
            roots.append(brentq(lambda x: crossing_function(x, l, con),
                                xs[i], xs[i + 1], xtol=1e-13, rtol=1e-15))
    tangential = list(exact_tangential)
    # interior minima of |sigma_hat| that touch zero without a sign change
    scale = max(np.max(np.abs(fs)), 1.0)
    absfs = np.abs(fs)
    for i in range(1, n_scan):
        if absfs[i] <= absfs[i - 1] and absfs[i] <= absfs[i + 1]:
            if fs[i] * fs[i - 1] > 0 and fs[i] * fs[i + 1] > 0:
                sgn = np.sign(fs[i])
                res = minimize_scalar(
                    lambda x: sgn * crossing_function(x, l, con),
                    bracket=(xs[i - 1], xs[i], xs[i + 1]))
                if abs(res.fun) < 1e-9 * scale:
                    tangential.append(float(res.x))
    roots = sorted(set(round(r, 14) for r in roots))
    if include_tangential:
        return roots, tangential
    return roots


def sigma_tau(l, lam_l, con):
    """Mode amplitudes: sigma_l for mean curvature and tau_l for the
    radial displacement; tau_1 = 0 identically."""
    n = l * (l + 1)
    q = con.Ep(lam_l) * (2 + n) + con.Bp(lam_l) * (2 - n)
    denom = n * con.B(lam_l) + con.pressure
    sigma = -q / denom
    if l == 1:
        return float(sigma), 0.0
    tau = 2.0 * sigma / (2.0 - n)
    return float(sigma), float(tau)


def mode_data(l, con, interval=None):
    """ModeData records for every characteristic root of degree l."""
    roots, tang = characteristic_roots(l, con, interval,
                                       include_tangential=True)
    out = []
    for lam in roots:
        s, t = sigma_tau(l, lam, con)
        out.append(ModeData(l=l, lam=lam, sigma=s, tau=t,
                            pitchfork=(l % 2 == 1),
                            crossing_slope=float(psi(con, lam)[3])))
    for lam in tang:
        s, t = sigma_tau(l, lam, con)
        out.append(ModeData(l=l, lam=lam, sigma=s, tau=t,
                            pitchfork=(l % 2 == 1), tangential=True,
                            crossing_slope=float(psi(con, lam)[3])))
    return out


def apply_L(lam, z, con, fd_convention=False):
    """Analytic linearized operator at the trivial state.

    z = (G, nu, zeta, xi) with spectral fields G, nu. Returns the four
    components (phase, shape, area, mean-phase); the field components are
    spectral. Diagonal per harmonic except for the constant couplings to
    the multipliers.

    With fd_convention=True the rows are rescaled/completed to agree with
    directional finite differences of the nonlinear residual: the shape
    row carries a factor 1/2, the area row integrates 2 nu (the first
    variation of the area element), and the phase row gains the
    moduli-curvature coupling -(B'+E')(Delta nu + 2 nu), which vanishes
    for constant moduli. The default returns the normalized rows used for
    the null-space analysis; both conventions have the same null space
    for constant moduli.
    """
    G, nu, zeta, xi = z
    _, _, psipp, _ = psi(con, lam)
    Bl = float(con.B(lam))
    Bpl = float(con.Bp(lam))
    Epl = float(con.Ep(lam))
    p = con.pressure
    l_max = G.l_max
    c1 = SpectralField.zeros(l_max)
    c2 = SpectralField.zeros(l_max)
    for l in range(l_max + 1):
        n = l * (l + 1)
        sl = slice(sf_index(l, -l), sf_index(l, l) + 1)
        g = G.coeffs[sl]
        v = nu.coeffs[sl]
        c1.coeffs[sl] = (con.epsilon * n + psipp) * g
        c2.coeffs[sl] = ((-2.0 * n * (Epl - Bpl) - 4.0 * (Bpl + Epl)) * g
                         + (n - 2.0) * (Bl * n + p) * v)
    c1.coeffs[0] -= xi
    c2.coeffs[0] -= 4.0 * (zeta + lam * xi)
    c3 = 4.0 * np.pi * nu.coeffs[0]
    c4 = 4.0 * np.pi * G.coeffs[0]
    if fd_convention:
        for l in range(l_max + 1):
            n = l * (l + 1)
            sl = slice(sf_index(l, -l), sf_index(l, l) + 1)
            c1.coeffs[sl] -= (Bpl + Epl) * (2.0 - n) * nu.coeffs[sl]
        c2.coeffs *= 0.5
        c3 *= 2.0
    return c1, c2, float(c3), float(c4)


def build_L_matrix(lam, l_max, con, grid=None):
    """Dense matrix of the linearized operator in the norm-scaled
    harmonic basis, unknown ordering (G coeffs, nu coeffs, zeta, xi)."""
    nb = (l_max + 1) ** 2
    dim = 2 * nb + 2
    M = np.zeros((dim, dim))
    _, _, psipp, _ = psi(con, lam)
    Bl = float(con.B(lam))
    Bpl = float(con.Bp(lam))
    Epl = float(con.Ep(lam))
    p = con.pressure
    for l in range(l_max + 1):
        n = l * (l + 1)
        for m in range(-l, l + 1):
            k = sf_index(l, m)
            M[k, k] = con.epsilon * n + psipp
            M[nb + k, k] = -2.0 * n * (Epl - Bpl) - 4.0 * (Bpl + Epl)
            M[nb + k, nb + k] = (n - 2.0) * (Bl * n + p)
    root4pi = np.sqrt(4.0 * np.pi)
    # multiplier couplings: the constant function is sqrt(4 pi) times the
    # unit-norm constant mode
    M[0, 2 * nb + 1] = -root4pi
    M[nb, 2 * nb] = -4.0 * root4pi
    M[nb, 2 * nb + 1] = -4.0 * lam * root4pi
    M[2 * nb, nb] = root4pi
    M[2 * nb + 1, 0] = root4pi
    return M


def null_space_dimension(lam, l_max, con, grid=None, threshold=1e-7,
                         root_tol=1e-6):
    """Count near-zero singular values of the discretized linearization
    and return the associated null vectors.

    Warns when lambda sits within root tolerance of two distinct
    characteristic roots (clustered modes are not separable)."""
    close = []
    for l in range(1, l_max + 1):
        for r in characteristic_roots(l, con):
            if abs(r - lam) < root_tol:
                close.append((l, r))
    if len(close) > 1:
        warnings.warn(f"lambda={lam} is near {len(close)} characteristic "
                      "roots; null spaces overlap", RuntimeWarning)
    M = build_L_matrix(lam, l_max, con, grid)
    U, s, Vt = np.linalg.svd(M)
    scale = s[0] if s[0] > 0 else 1.0
    mask = s < threshold * scale
    dim = int(np.sum(mask))
    vectors = Vt[mask]
    return dim, vectors, s
