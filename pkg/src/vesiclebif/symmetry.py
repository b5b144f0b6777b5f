"""O(3) symmetry machinery: group catalogs, representation matrices on
real harmonics, Reynolds projectors, fixed-point spaces, bifurcation
directions, and symmetry-reduced bases.

Representation matrices are computed numerically by sampling rotated
harmonics on the quadrature grid and projecting back — exact to
quadrature precision in whatever basis convention the transform module
uses, which keeps conventions consistent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .harmonics import (
    GridField,
    SpectralField,
    analyze,
    build_grid,
    sf_index,
    synthesize,
)
from .model import ModelState

__all__ = [
    "Subgroup",
    "FixedSpace",
    "rotation",
    "close_subgroup",
    "subgroup",
    "CATALOG",
    "rep_matrix",
    "act",
    "fixed_space",
    "bifurcation_direction",
    "reduce_basis",
]


def rotation(axis, angle):
    """Rotation matrix about a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    c, s = np.cos(angle), np.sin(angle)
    cross = np.array([[0.0, -a[2], a[1]],
                      [a[2], 0.0, -a[0]],
                      [-a[1], a[0], 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(a, a)


def _check_orthogonal(G):
    G = np.asarray(G, dtype=float)
    if G.shape != (3, 3) or np.max(np.abs(G.T @ G - np.eye(3))) > 1e-12:
        raise ValueError("group element must be a 3x3 orthogonal matrix")
    return G


def close_subgroup(generators, max_order=400, tol=1e-9):
    """Closure of a generating set under multiplication.

    De-duplicates by matrix distance; aborts above max_order elements
    (which usually means the generators span a continuous group).
    """
    elems = [np.eye(3)]
    frontier = [_check_orthogonal(g) for g in generators]
    for g in frontier:
        if all(np.max(np.abs(g - e)) > tol for e in elems):
            elems.append(g)
    changed = True
    while changed:
        changed = False
        for a in list(elems):
            for b in list(elems):
                c = a @ b
                if all(np.max(np.abs(c - e)) > tol for e in elems):
                    elems.append(c)
                    changed = True
                    if len(elems) > max_order:
                        raise RuntimeError(
                            "subgroup closure exceeded "
                            f"{max_order} elements; continuous group?")
    return elems


# generators of the oriented exceptional rotation groups
_GAMMA1_T = np.array([[0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0],
                      [1.0, 0.0, 0.0]])
_GAMMA2_T = np.diag([-1.0, -1.0, 1.0])
_C4Z = rotation([0, 0, 1], np.pi / 2.0)
_C5Z = rotation([0, 0, 1], 2.0 * np.pi / 5.0)
_C5B = rotation([-2.0 / np.sqrt(5.0), 0.0, 1.0 / np.sqrt(5.0)],
                2.0 * np.pi / 5.0)

_c3, _s3 = np.cos(2.0 * np.pi / 3.0), np.sin(2.0 * np.pi / 3.0)
_D6D_GENS = [np.array([[_c3, _s3, 0.0],
                       [-_s3, _c3, 0.0],
                       [0.0, 0.0, 1.0]]),
             np.diag([1.0, -1.0, -1.0]),
             np.diag([1.0, 1.0, -1.0])]


@dataclass
class Subgroup:
    """A catalogued subgroup of O(3).

    Finite groups carry their full element list; axial (circle-containing)
    groups are described structurally by an m-selection rule instead.
    """

    name: str
    generators: list
    elements: list = None            # None for axial groups
    axial_rule: str = None           # "all_l" | "even_l" for m = 0 modes

    @property
    def finite(self):
        return self.elements is not None

    def order(self):
        return len(self.elements) if self.finite else None


_ALIASES = {
    "O_minus": "O-", "O2_minus": "O2-", "Ominus": "O-",
    "OplusZ2c": "OxZ2c", "IplusZ2c": "IxZ2c", "O2plusZ2c": "O2xZ2c",
}

CATALOG = ("T", "O", "O-", "OxZ2c", "I", "IxZ2c", "D6d", "O2-", "O2xZ2c")


def _build_finite(name):
    if name == "T":
        return close_subgroup([_GAMMA1_T, _GAMMA2_T])
    if name == "O":
        return close_subgroup([_GAMMA1_T, _GAMMA2_T, _C4Z])
    if name == "O-":
        T = _build_finite("T")
        O = _build_finite("O")
        extra = [-g for g in O
                 if all(np.max(np.abs(g - t)) > 1e-9 for t in T)]
        return T + extra
    if name == "OxZ2c":
        O = _build_finite("O")
        return O + [-g for g in O]
    if name == "I":
        return close_subgroup([_C5Z, _C5B])
    if name == "IxZ2c":
        I = _build_finite("I")
        return I + [-g for g in I]
    if name == "D6d":
        return close_subgroup(_D6D_GENS)
    raise KeyError(name)


_SUBGROUP_CACHE = {}


def subgroup(name):
    """Look up a subgroup by catalog name (aliases accepted)."""
    name = _ALIASES.get(name, name)
    if name in _SUBGROUP_CACHE:
        return _SUBGROUP_CACHE[name]
    if name in ("SO2", "O2", "O2-", "O2xZ2c"):
        gens = [rotation([0, 0, 1], 1.0)]  # irrational angle: dense circle
        rule = "all_l"
        if name == "O2":
            gens.append(np.diag([1.0, -1.0, -1.0]))
            rule = "even_l"
        elif name == "O2-":
            gens.append(np.diag([-1.0, 1.0, 1.0]))
        elif name == "O2xZ2c":
            gens.append(np.diag([1.0, -1.0, -1.0]))
            gens.append(-np.eye(3))
            rule = "even_l"
        g = Subgroup(name=name, generators=gens, axial_rule=rule)
    else:
        elems = _build_finite(name)
        gens = {"T": [_GAMMA1_T, _GAMMA2_T],
                "O": [_GAMMA1_T, _GAMMA2_T, _C4Z],
                "O-": [_GAMMA1_T, -_C4Z],
                "OxZ2c": [_GAMMA1_T, _GAMMA2_T, _C4Z, -np.eye(3)],
                "I": [_C5Z, _C5B],
                "IxZ2c": [_C5Z, _C5B, -np.eye(3)],
                "D6d": _D6D_GENS}[name]
        g = Subgroup(name=name, generators=gens, elements=elems)
    _SUBGROUP_CACHE[name] = g
    return g


_REP_CACHE = {}


def rep_matrix(l, G, grid=None):
    """Matrix of the degree-l representation in the unnormalized real
    harmonic basis: rho_{l,j}(G^T x) = sum_m T_{mj} rho_{l,m}(x).

    Computed by sampling on the quadrature grid and projecting; rotation
    preserves degree, so the out-of-block projection residual doubles as
    an internal resolution check.
    """
    G = _check_orthogonal(G)
    key = (l, G.tobytes())
    if key in _REP_CACHE:
        return _REP_CACHE[key]
    if grid is None:
        grid = build_grid(max(l, 4))
    xyz = grid.nodes_xyz()
    xr = np.einsum("ji,j...->i...", G, xyz)  # G^T x at every node
    theta = np.arccos(np.clip(xr[2], -1.0, 1.0))
    psi_ang = np.arctan2(xr[1], xr[0])
    from .harmonics import _legendre_tables
    P, _ = _legendre_tables(l, np.cos(theta).ravel())
    shape = xr.shape[1:]
    T = np.empty((2 * l + 1, 2 * l + 1))
    base = sf_index(l, -l)
    for j in range(-l, l + 1):
        mm = abs(j)
        Pv = P[mm, l].reshape(shape)
        if j > 0:
            vals = Pv * np.cos(j * psi_ang)
        elif j < 0:
            vals = Pv * np.sin(mm * psi_ang)
        else:
            vals = Pv
        c = analyze(GridField(grid, vals), grid.l_cap)
        # leak check in norm-scaled units, where every mode is O(1)
        cn = c.coeffs * np.sqrt(grid.norms2[: c.coeffs.size])
        resid = np.abs(cn.copy())
        resid[base:base + 2 * l + 1] = 0.0
        scale = np.max(np.abs(cn[base:base + 2 * l + 1])) or 1.0
        if np.max(resid) > 1e-9 * scale:
            raise RuntimeError("rotation leaked outside degree block; "
                               "quadrature grid too coarse")
        T[:, j + l] = c.coeffs[base:base + 2 * l + 1]
    _REP_CACHE[key] = T
    return T


def act(G, state, grid=None):
    """Group action on a state or a single scalar field: fields composed
    with G^T, multipliers untouched."""
    out = state.copy()
    if not hasattr(state, "phi"):
        pairs = ((state, out),)
    else:
        pairs = ((state.phi, out.phi), (state.u, out.u))
    for f_in, f_out in pairs:
        for l in range(f_in.l_max + 1):
            sl = slice(sf_index(l, -l), sf_index(l, l) + 1)
            T = rep_matrix(l, G, grid)
            f_out.coeffs[sl] = T @ f_in.coeffs[sl]
    return out


@dataclass
class FixedSpace:
    l: int
    subgroup: str
    dimension: int
    basis_normalized: np.ndarray    # rows: coefficient vectors, unit norm
    basis_unnormalized: np.ndarray  # same vectors in the plain basis


def fixed_space(l, group, grid=None):
    """Invariant coefficient vectors of the degree-l representation.

    Finite groups: Reynolds projector averaged in the norm-scaled basis
    (where the representation is orthogonal, so the projector is
    symmetric); eigenvectors with eigenvalue 1. Axial groups: handled by
    the m = 0 selection rule.
    """
    if isinstance(group, str):
        group = subgroup(group)
    if grid is None:
        grid = build_grid(max(l, 4))
    base = sf_index(l, -l)
    norms = np.sqrt(grid.norms2[base:base + 2 * l + 1])
    if not group.finite:
        keep = (group.axial_rule == "all_l") or (l % 2 == 0)
        if keep:
            vec_n = np.zeros((1, 2 * l + 1))
            vec_n[0, l] = 1.0
            vec_u = vec_n / norms[None, :]
            return FixedSpace(l, group.name, 1, vec_n, vec_u)
        return FixedSpace(l, group.name, 0,
                          np.zeros((0, 2 * l + 1)), np.zeros((0, 2 * l + 1)))
    P = np.zeros((2 * l + 1, 2 * l + 1))
    for G in group.elements:
        T = rep_matrix(l, G, grid)
        P += (norms[:, None] / norms[None, :]) * T
    P /= len(group.elements)
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    mask = w > 1.0 - 1e-8
    vec_n = V[:, mask].T
    vec_u = vec_n / norms[None, :]
    return FixedSpace(l, group.name, int(np.sum(mask)), vec_n, vec_u)


def bifurcation_direction(l, group, mode, l_max=None, grid=None):
    """Null direction z = (rho_hat, tau_l rho_hat, 0, 0) for a subgroup
    with a one-dimensional degree-l fixed space."""
    fs = fixed_space(l, group, grid)
    if fs.dimension != 1:
        raise ValueError(
            f"fixed space of degree {l} for {fs.subgroup} has dimension "
            f"{fs.dimension}; a one-dimensional space is required")
    if l_max is None:
        l_max = max(l, 4)
    base = sf_index(l, -l)
    phi = SpectralField.zeros(l_max)
    phi.coeffs[base:base + 2 * l + 1] = fs.basis_unnormalized[0]
    u = SpectralField.zeros(l_max)
    u.coeffs[base:base + 2 * l + 1] = mode.tau * fs.basis_unnormalized[0]
    return ModelState(phi, u, 0.0, 0.0)


def reduce_basis(l_max, group, grid=None, pin_translation=True):
    """Symmetry-adapted basis of the (phi, u) state space.

    Per degree, each invariant harmonic is lifted twice: once as a
    phi-only state and once as a u-only state, both with unit L2 field
    norm. For O(2)^- the vertical-translation mode (u on rho_{1,0}) is
    dropped when pin_translation is set, which factors out the known
    null direction.
    """
    if isinstance(group, str):
        group = subgroup(group)
    if grid is None:
        grid = build_grid(l_max)
    basis = []
    for l in range(l_max + 1):
        fs = fixed_space(l, group, grid)
        base = sf_index(l, -l)
        for k in range(fs.dimension):
            coeffs = np.zeros((l_max + 1) ** 2)
            vec = fs.basis_unnormalized[k]
            nrm = np.linalg.norm(fs.basis_normalized[k])
            coeffs[base:base + 2 * l + 1] = vec / nrm
            phi_state = ModelState(
                SpectralField(l_max, coeffs.copy()),
                SpectralField.zeros(l_max))
            basis.append(phi_state)
            if l == 1 and group.name == "O2-" and pin_translation:
                continue
            u_state = ModelState(
                SpectralField.zeros(l_max),
                SpectralField(l_max, coeffs.copy()))
            basis.append(u_state)
    return basis
