"""Constitutive functions, model parameters, energy and constraints.

The default constitutive family is a quartic double well
W(phi) = (phi^2 - 1)^2 / 4 with sigmoid-interpolated bending moduli
B(phi) = b0 + b1 s(phi/width), E(phi) = e0 + e1 s(phi/width); b1 = e1 = 0
recovers the constant-moduli case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .harmonics import (
    GridField,
    SpectralField,
    build_grid,
    sf_index,
    synthesize,
)
from .geometry import (
    enclosed_volume,
    geometry_from_u,
    grad_sigma_norm2,
)

__all__ = [
    "Constitutive",
    "ModelState",
    "TrivialBranch",
    "quartic_constitutive",
    "tabulated_constitutive",
    "constitutive_from_config",
    "DEFAULT_CONFIG",
    "psi",
    "trivial_multipliers",
    "recover_multipliers",
    "energy",
    "constraints",
    "lagrangian",
]


def _sigmoid(t):
    return expit(t)


@dataclass
class Constitutive:
    """Phase potential W, bending moduli B and E, and model parameters.

    Callables accept scalars or arrays. spinodal is the interval where
    W'' < 0.
    """

    W: Callable
    Wp: Callable
    Wpp: Callable
    Wppp: Callable
    B: Callable
    Bp: Callable
    Bpp: Callable
    Bppp: Callable
    E: Callable
    Ep: Callable
    Epp: Callable
    Eppp: Callable
    epsilon: float = 0.01
    pressure: float = 0.0
    spinodal: tuple = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))

    def validate(self, lo=-3.0, hi=3.0, n=601):
        """Sanity checks: B >= epsilon everywhere sampled, W >= 0, and W''
        with exactly two sign changes."""
        s = np.linspace(lo, hi, n)
        if np.any(self.B(s) < self.epsilon - 1e-12):
            raise ValueError("bending modulus B must stay >= epsilon")
        if np.any(self.W(s) < -1e-12):
            raise ValueError("potential W must be nonnegative")
        signs = np.sign(self.Wpp(s))
        flips = int(np.sum(signs[1:] * signs[:-1] < 0))
        if flips != 2:
            raise ValueError(f"W'' must have exactly two zeros, found {flips}")
        if self.pressure < 0:
            raise ValueError("pressure must be nonnegative")
        return self


def _sigmoid_modulus(c0, c1, width):
    s = width

    def f(x):
        return c0 + c1 * _sigmoid(np.asarray(x, dtype=float) / s)

    def fp(x):
        sg = _sigmoid(np.asarray(x, dtype=float) / s)
        return c1 * sg * (1 - sg) / s

    def fpp(x):
        sg = _sigmoid(np.asarray(x, dtype=float) / s)
        return c1 * sg * (1 - sg) * (1 - 2 * sg) / s ** 2

    def fppp(x):
        sg = _sigmoid(np.asarray(x, dtype=float) / s)
        d1 = sg * (1 - sg)
        return c1 * (d1 * (1 - 2 * sg) ** 2 - 2 * d1 ** 2) / s ** 3

    return f, fp, fpp, fppp


def quartic_constitutive(epsilon=0.01, pressure=0.0, b0=1.0, b1=0.0,
                         e0=0.0, e1=0.0, width=0.2):
    """Quartic double well with optional sigmoid moduli transition."""
    B, Bp, Bpp, Bppp = _sigmoid_modulus(b0, b1, width)
    E, Ep, Epp, Eppp = _sigmoid_modulus(e0, e1, width)
    return Constitutive(
        W=lambda x: 0.25 * (np.asarray(x, dtype=float) ** 2 - 1.0) ** 2,
        Wp=lambda x: np.asarray(x, dtype=float) ** 3 - np.asarray(x, dtype=float),
        Wpp=lambda x: 3.0 * np.asarray(x, dtype=float) ** 2 - 1.0,
        Wppp=lambda x: 6.0 * np.asarray(x, dtype=float),
        B=B, Bp=Bp, Bpp=Bpp, Bppp=Bppp,
        E=E, Ep=Ep, Epp=Epp, Eppp=Eppp,
        epsilon=epsilon, pressure=pressure,
        spinodal=(-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0)),
    ).validate()


def tabulated_constitutive(phi, W, Wp, Wpp, epsilon=0.01, pressure=0.0,
                           b0=1.0, b1=0.0, e0=0.0, e1=0.0, width=0.2):
    """Constitutive W from tabulated (phi, W, W', W'') samples.

    Monotone-cubic (PCHIP) interpolation of each channel; W''' is a
    finite-difference approximation of the interpolated W'' and therefore
    carries no smoothness guarantee.
    """
    from scipy.interpolate import PchipInterpolator

    iW = PchipInterpolator(phi, W)
    iWp = PchipInterpolator(phi, Wp)
    iWpp = PchipInterpolator(phi, Wpp)

    def Wppp(x, h=1e-5):
        x = np.asarray(x, dtype=float)
        return (iWpp(x + h) - iWpp(x - h)) / (2 * h)

    s = np.asarray(phi, dtype=float)
    wpp = np.asarray(Wpp, dtype=float)
    neg = s[wpp < 0]
    spin = (float(neg.min()), float(neg.max())) if neg.size else (0.0, 0.0)
    B, Bp, Bpp, Bppp = _sigmoid_modulus(b0, b1, width)
    E, Ep, Epp, Eppp = _sigmoid_modulus(e0, e1, width)
    return Constitutive(W=iW, Wp=iWp, Wpp=iWpp, Wppp=Wppp,
                        B=B, Bp=Bp, Bpp=Bpp, Bppp=Bppp,
                        E=E, Ep=Ep, Epp=Epp, Eppp=Eppp,
                        epsilon=epsilon, pressure=pressure, spinodal=spin)


DEFAULT_CONFIG = {
    "epsilon": 0.01,
    "pressure": 0.0,
    "W": {"type": "quartic_double_well"},
    "B": {"b0": 1.0, "b1": 0.0, "width": 0.2},
    "E": {"e0": 0.0, "e1": 0.0, "width": 0.2},
    "l_max": 16,
}


def constitutive_from_config(cfg):
    """Build a Constitutive from the JSON config schema."""
    eps = float(cfg.get("epsilon", 0.01))
    p = float(cfg.get("pressure", 0.0))
    bcfg = cfg.get("B", {})
    ecfg = cfg.get("E", {})
    wcfg = cfg.get("W", {"type": "quartic_double_well"})
    kind = wcfg.get("type", "quartic_double_well")
    kw = dict(epsilon=eps, pressure=p,
              b0=float(bcfg.get("b0", 1.0)), b1=float(bcfg.get("b1", 0.0)),
              e0=float(ecfg.get("e0", 0.0)), e1=float(ecfg.get("e1", 0.0)),
              width=float(bcfg.get("width", ecfg.get("width", 0.2))))
    if kind == "quartic_double_well":
        return quartic_constitutive(**kw)
    if kind == "tabulated":
        return tabulated_constitutive(wcfg["phi"], wcfg["W"], wcfg["Wp"],
                                      wcfg["Wpp"], **kw)
    raise ValueError(f"unknown potential type {kind!r}")


@dataclass
class ModelState:
    """Unknown v = (phi, u, zeta, xi): phase deviation, log-radius, and
    shifted area / phase multipliers."""

    phi: SpectralField
    u: SpectralField
    zeta: float = 0.0
    xi: float = 0.0

    @classmethod
    def trivial(cls, l_max):
        return cls(SpectralField.zeros(l_max), SpectralField.zeros(l_max))

    def copy(self):
        return ModelState(self.phi.copy(), self.u.copy(), self.zeta, self.xi)

    def to_json(self, lam):
        return {"lambda": lam, "zeta": self.zeta, "xi": self.xi,
                "phi": self.phi.to_json(), "u": self.u.to_json()}

    @classmethod
    def from_json(cls, obj):
        state = cls(SpectralField.from_json(obj["phi"]),
                    SpectralField.from_json(obj["u"]),
                    float(obj["zeta"]), float(obj["xi"]))
        return state, float(obj["lambda"])


@dataclass
class TrivialBranch:
    """Spherical solution data at control parameter lambda."""

    lam: float
    mu: float
    gamma: float


def psi(con, lam):
    """Combined potential Psi = W + B + E and derivatives up to third."""
    lam = np.asarray(lam, dtype=float)
    return (con.W(lam) + con.B(lam) + con.E(lam),
            con.Wp(lam) + con.Bp(lam) + con.Ep(lam),
            con.Wpp(lam) + con.Bpp(lam) + con.Epp(lam),
            con.Wppp(lam) + con.Bppp(lam) + con.Eppp(lam))


def trivial_multipliers(con, lam):
    """Multipliers on the spherical branch: mu = Psi'(lam),
    gamma = W(lam) - lam Psi'(lam) - p/2."""
    _, psip, _, _ = psi(con, lam)
    gamma = float(con.W(lam)) - lam * float(psip) - con.pressure / 2.0
    return TrivialBranch(lam=lam, mu=float(psip), gamma=gamma)


def recover_multipliers(con, lam, state):
    """(gamma, mu) of the shifted variables (zeta, xi) at lambda."""
    tb = trivial_multipliers(con, lam)
    return tb.gamma + state.zeta, tb.mu + state.xi


def energy(state, lam, con, grid=None):
    """Total potential energy of the configuration (surface integrals over
    the deformed surface pulled back to S^2)."""
    if grid is None:
        grid = build_grid(state.u.l_max)
    g = geometry_from_u(state.u, grid)
    phig = synthesize(state.phi, grid)
    phit = lam + phig.values
    gn2 = grad_sigma_norm2(phig, g).values
    density = (con.B(phit) * g.H ** 2 + con.E(phit) * g.K
               + 0.5 * con.epsilon * gn2 + con.W(phit))
    return grid.integrate(density * g.J) - con.pressure * enclosed_volume(g)


def constraints(state, lam, con=None, grid=None):
    """Area and mean-phase constraint residuals (raw quadrature values)."""
    if grid is None:
        grid = build_grid(state.u.l_max)
    g = geometry_from_u(state.u, grid)
    phig = synthesize(state.phi, grid)
    c_area = grid.integrate(g.J) - 4.0 * np.pi
    c_phase = grid.integrate(phig.values * g.J)
    return c_area, c_phase


def lagrangian(state, lam, con, grid=None):
    """Constrained Lagrangian with multipliers reconstructed from
    (zeta, xi, lambda); stationary at equilibria."""
    if grid is None:
        grid = build_grid(state.u.l_max)
    gamma, mu = recover_multipliers(con, lam, state)
    c_area, c_phase = constraints(state, lam, con, grid)
    # mu multiplies the total-phase constraint int (lam + phi) J - 4 pi lam
    # = c_phase + lam * c_area; using the deviation constraint alone would
    # shift the u-gradient by mu * lam * grad(c_area) even where c_area = 0.
    return (energy(state, lam, con, grid)
            - gamma * c_area - mu * (c_phase + lam * c_area))
