"""Radial-graph differential geometry of Sigma = { exp(u(x)) x : x in S^2 }.

All tangential objects are carried in ambient Cartesian components, which
stay smooth across the poles; frame components (with respect to the
orthonormal pair {theta_hat, psi_hat} at each node) are formed pointwise.
Sign convention: the unit sphere has H = -1, K = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .harmonics import (
    GridField,
    QuadratureGrid,
    SpectralField,
    analyze,
    synthesize,
    synthesize_with_derivs,
)

__all__ = [
    "DegenerateSurfaceError",
    "TangentField3",
    "GeometryBundle",
    "surface_gradient",
    "geometry_from_u",
    "laplace_beltrami_sigma",
    "grad_sigma_norm2",
    "curvature_contract",
    "enclosed_volume",
    "surface_area",
    "export_obj",
    "export_node_csv",
]


class DegenerateSurfaceError(RuntimeError):
    """Raised when the deformed surface degenerates (overflow / J <= 0)."""


@dataclass
class TangentField3:
    """Vector field along S^2 in Cartesian components (3, n_theta, n_psi)."""

    grid: QuadratureGrid
    values: np.ndarray


def _frames(grid):
    """Orthonormal frame {e1, e2, x} = {theta_hat, psi_hat, radial} at each
    node; e1 x e2 = x. Shapes (3, n_theta, n_psi)."""
    st = grid.sin_theta[:, None]
    ct = grid.cos_theta[:, None]
    cp = np.cos(grid.psi)[None, :]
    sp = np.sin(grid.psi)[None, :]
    shape = (grid.n_theta, grid.n_psi)
    e1 = np.stack([ct * cp, ct * sp, np.broadcast_to(-st, shape).copy()])
    e2 = np.stack([np.broadcast_to(-sp, shape).copy(),
                   np.broadcast_to(cp, shape).copy(),
                   np.zeros(shape)])
    x = np.stack([st * cp, st * sp, np.broadcast_to(ct, shape).copy()])
    return e1, e2, x


def _gradient_from_coeffs(c, grid):
    """Cartesian surface gradient on S^2 of a band-limited field."""
    _, dth, dps = synthesize_with_derivs(c, grid)
    e1, e2, _ = _frames(grid)
    inv_sin = 1.0 / grid.sin_theta[:, None]
    return e1 * dth.values[None] + e2 * (dps.values * inv_sin)[None]


def surface_gradient(f, l_ana=None):
    """Surface gradient on S^2 of a grid field, in Cartesian components.

    The field is analyzed up to the grid's capacity (or l_ana) and
    differentiated spectrally; exact for band-limited input.
    """
    grid = f.grid
    c = analyze(f, l_ana if l_ana is not None else grid.l_cap)
    return TangentField3(grid, _gradient_from_coeffs(c, grid))


def _componentwise_gradient(grid, vec):
    """Matrix field M[i, k] = (surface gradient of vec_i)_k, shape
    (3, 3, n_theta, n_psi). vec is a Cartesian (3, ...) nodal field."""
    M = np.empty((3, 3) + vec.shape[1:])
    for i in range(3):
        M[i] = surface_gradient(GridField(grid, vec[i])).values
    return M


@dataclass
class GeometryBundle:
    """Per-node geometric data of the deformed surface."""

    grid: QuadratureGrid
    u: np.ndarray          # log-radius at nodes
    expu: np.ndarray
    gradu: np.ndarray      # Cartesian components (3, ...)
    g2: np.ndarray         # |grad u|^2
    J: np.ndarray          # area ratio
    H: np.ndarray
    K: np.ndarray
    n: np.ndarray          # outward unit normal of Sigma (3, ...)
    A: np.ndarray          # frame components of A(grad u), (2, 2, ...)
    Cinv: np.ndarray       # frame components of the inverse metric
    Lcomp: np.ndarray      # second-fundamental-form components L_{ab}
    uab: np.ndarray        # frame components of the second derivative D^2 u
    e1: np.ndarray
    e2: np.ndarray
    x: np.ndarray
    a_up: np.ndarray       # reciprocal basis vectors a^alpha, (2, 3, ...)


def geometry_from_u(u, grid=None):
    """Build the full geometry bundle of the radial graph over S^2."""
    if grid is None:
        from .harmonics import build_grid
        grid = build_grid(u.l_max)
    e1, e2, x = _frames(grid)
    ug, dth, dps = synthesize_with_derivs(u, grid)
    inv_sin = 1.0 / grid.sin_theta[:, None]
    u1 = dth.values
    u2 = dps.values * inv_sin
    gradu = e1 * u1[None] + e2 * u2[None]
    g2 = u1 * u1 + u2 * u2
    expu = np.exp(ug.values)
    if not np.all(np.isfinite(expu)):
        raise DegenerateSurfaceError("exp(u) overflow")
    one_p = 1.0 + g2
    J = expu * expu * np.sqrt(one_p)
    if not np.all(np.isfinite(J)) or np.any(J <= 0.0):
        raise DegenerateSurfaceError("area ratio J <= 0")

    # second tangential derivative, frame components u_{,ab}
    M = _componentwise_gradient(grid, gradu)
    e = (e1, e2)
    uab = np.empty((2, 2) + ug.values.shape)
    for a in range(2):
        for b in range(2):
            uab[a, b] = np.einsum("i...,ik...,k...->...", e[a], M, e[b])
    uab = 0.5 * (uab + uab.transpose(1, 0, 2, 3))

    u_comp = (u1, u2)
    A = np.empty_like(uab)
    for a in range(2):
        for b in range(2):
            A[a, b] = (one_p if a == b else 0.0) - u_comp[a] * u_comp[b]
    AdotD2 = np.einsum("ab...,ab...->...", A, uab)
    detD2 = uab[0, 0] * uab[1, 1] - uab[0, 1] * uab[1, 0]

    H = np.exp(-ug.values) * one_p ** -1.5 * (AdotD2 - 2.0 * one_p) / 2.0
    K = np.exp(-2.0 * ug.values) * one_p ** -2.0 * (
        detD2 - AdotD2 + g2 + 1.0)
    n = (x - gradu) / np.sqrt(one_p)[None]

    Lcomp = np.empty_like(uab)
    pref = expu / np.sqrt(one_p)
    for a in range(2):
        for b in range(2):
            Lcomp[a, b] = pref * (uab[a, b] - u_comp[a] * u_comp[b]
                                  - (1.0 if a == b else 0.0))
    Cinv = A * (np.exp(-2.0 * ug.values) / one_p)[None, None]

    # reciprocal basis a^alpha = Cinv_{ab} a_b, a_b = e^u (e_b + u_b x)
    a_dn = np.stack([expu[None] * (e1 + u1[None] * x),
                     expu[None] * (e2 + u2[None] * x)])
    a_up = np.einsum("ab...,bi...->ai...", Cinv, a_dn)

    return GeometryBundle(grid=grid, u=ug.values, expu=expu, gradu=gradu,
                          g2=g2, J=J, H=H, K=K, n=n, A=A, Cinv=Cinv,
                          Lcomp=Lcomp, uab=uab, e1=e1, e2=e2, x=x, a_up=a_up)


def _grad_and_frame_components(f, g):
    grad = surface_gradient(f).values
    f1 = np.einsum("i...,i...->...", g.e1, grad)
    f2 = np.einsum("i...,i...->...", g.e2, grad)
    return grad, f1, f2


def laplace_beltrami_sigma(f, g):
    """Laplace-Beltrami operator on Sigma: J^{-1} div_{S^2}(J C^{-1} Df).

    Reduces to the -l(l+1) eigenrelation at u = 0.
    """
    grad, _, _ = _grad_and_frame_components(f, g)
    gdotf = np.einsum("i...,i...->...", g.gradu, grad)
    one_p = 1.0 + g.g2
    # J * Cinv * grad = (1+|Du|^2)^{-1/2} A(Du) grad
    t = (one_p[None] * grad - gdotf[None] * g.gradu) / np.sqrt(one_p)[None]
    M = _componentwise_gradient(g.grid, t)
    div = M[0, 0] + M[1, 1] + M[2, 2]
    return GridField(g.grid, div / g.J)


def grad_sigma_norm2(f, g):
    """|D_Sigma f|^2 = e^{-2u} (1+|Du|^2)^{-1} Df . (A(Du) Df)."""
    grad, _, _ = _grad_and_frame_components(f, g)
    gdotf = np.einsum("i...,i...->...", g.gradu, grad)
    f2 = np.einsum("i...,i...->...", grad, grad)
    one_p = 1.0 + g.g2
    val = np.exp(-2.0 * g.u) / one_p * (one_p * f2 - gdotf * gdotf)
    return GridField(g.grid, val)


def curvature_contract(f, g):
    """Curvature contractions of a scalar field on Sigma.

    Returns (q1, q2) with q1 = D_Sigma f . L[D_Sigma f] and
    q2 = L . D^2_Sigma f, both as grid fields. On the unit sphere
    (L = -identity) these reduce to -|Df|^2 and -Laplacian(f).
    """
    grid = g.grid
    grad, f1, f2c = _grad_and_frame_components(f, g)
    f_comp = (f1, f2c)
    # q1 = L_{ab} a^{ac} a^{bd} f_c f_d  with a^{ab} = Cinv_{ab}
    Cf = [sum(g.Cinv[a, b] * f_comp[b] for b in range(2)) for a in range(2)]
    q1 = sum(g.Lcomp[a, b] * Cf[a] * Cf[b] for a in range(2) for b in range(2))

    # q2 = L_{ab} Cinv_{bg} a^a . ( [grad_{S^2}(D_Sigma f)] e_g )
    gdotf = np.einsum("i...,i...->...", g.gradu, grad)
    one_p = 1.0 + g.g2
    s = (np.exp(-g.u) / one_p)[None] * (
        one_p[None] * grad - gdotf[None] * g.gradu + gdotf[None] * g.x)
    N = _componentwise_gradient(grid, s)
    e = (g.e1, g.e2)
    Ne = [np.einsum("ik...,k...->i...", N, e[c]) for c in range(2)]
    q2 = np.zeros_like(q1)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                q2 += g.Lcomp[a, b] * g.Cinv[b, c] * np.einsum(
                    "i...,i...->...", g.a_up[a], Ne[c])
    return GridField(grid, q1), GridField(grid, q2)


def enclosed_volume(g):
    """Volume enclosed by the radial graph: (1/3) int exp(3u) ds."""
    return g.grid.integrate(np.exp(3.0 * g.u)) / 3.0


def surface_area(g):
    """Area of Sigma: int J ds over S^2."""
    return g.grid.integrate(g.J)


def export_obj(path, u, grid=None, vertex_scalar=None):
    """Write the deformed surface as an OBJ mesh with lat-long connectivity.

    vertex_scalar, when given, is a (n_theta, n_psi) nodal array emitted as
    a comment line per vertex (external viewers use it for coloring).
    """
    if grid is None:
        from .harmonics import build_grid
        grid = build_grid(u.l_max)
    ug = synthesize(u, grid)
    xyz = grid.nodes_xyz() * np.exp(ug.values)[None]
    nt, npsi = grid.n_theta, grid.n_psi
    with open(path, "w") as fh:
        for i in range(nt):
            for j in range(npsi):
                fh.write(f"v {xyz[0, i, j]:.9e} {xyz[1, i, j]:.9e} "
                         f"{xyz[2, i, j]:.9e}\n")
                if vertex_scalar is not None:
                    fh.write(f"# vs {vertex_scalar[i, j]:.9e}\n")
        def vid(i, j):
            return i * npsi + (j % npsi) + 1
        for i in range(nt - 1):
            for j in range(npsi):
                fh.write(f"f {vid(i, j)} {vid(i + 1, j)} {vid(i + 1, j + 1)}\n")
                fh.write(f"f {vid(i, j)} {vid(i + 1, j + 1)} {vid(i, j + 1)}\n")


def export_node_csv(path, u, grid=None):
    """CSV node table: theta, psi, u, H, K, J."""
    if grid is None:
        from .harmonics import build_grid
        grid = build_grid(u.l_max)
    g = geometry_from_u(u, grid)
    with open(path, "w") as fh:
        fh.write("theta,psi,u,H,K,J\n")
        for i in range(grid.n_theta):
            for j in range(grid.n_psi):
                fh.write(f"{grid.theta[i]!r},{grid.psi[j]!r},{g.u[i, j]!r},"
                         f"{g.H[i, j]!r},{g.K[i, j]!r},{g.J[i, j]!r}\n")
