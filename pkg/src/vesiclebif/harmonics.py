"""Real spherical harmonics, quadrature grids, and spectral transforms.

Basis convention: unnormalized surface harmonics built from Ferrers
associated Legendre functions WITHOUT the Condon-Shortley phase, so that
the degree-1 harmonics coincide with the Cartesian coordinates:

    rho_{l,0}  = P_l(cos theta)
    rho_{l,m}  = P_{l,m}(cos theta) cos(m psi),      m > 0
    rho_{l,-m} = -P_{l,m}(cos theta) sin(m psi),     m > 0

in the coordinates x = (sin th cos ps, sin th sin ps, cos th).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "assoc_legendre",
    "real_harmonic",
    "harmonic_block",
    "QuadratureGrid",
    "build_grid",
    "SpectralField",
    "GridField",
    "sf_index",
    "analyze",
    "synthesize",
    "synthesize_with_derivs",
    "laplace_beltrami_s2",
]


def sf_index(l, m):
    """Flat index of coefficient (l, m) in a degree-major layout."""
    return l * l + l + m


def _legendre_tables(l_max, x):
    """Ferrers functions P_{l,m}(x) (no Condon-Shortley phase) and their
    theta-derivatives at x = cos(theta), for all 0 <= m <= l <= l_max.

    Returns (P, dPdt), each of shape (l_max+1, l_max+1, len(x)) indexed
    [m, l]. Entries with l < m are zero.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - x * x))
    P = np.zeros((l_max + 1, l_max + 1, n))
    # diagonal: P_{m,m} = (2m-1)!! (1-x^2)^{m/2}
    pmm = np.ones(n)
    for m in range(l_max + 1):
        if m > 0:
            pmm = pmm * (2 * m - 1) * sin_t
        P[m, m] = pmm
        if m + 1 <= l_max:
            P[m, m + 1] = (2 * m + 1) * x * pmm
        for l in range(m + 2, l_max + 1):
            P[m, l] = ((2 * l - 1) * x * P[m, l - 1]
                       - (l - 1 + m) * P[m, l - 2]) / (l - m)
    # dP/dtheta = (l x P_{l,m} - (l+m) P_{l-1,m}) / sin(theta)
    dPdt = np.zeros_like(P)
    inv_sin = 1.0 / sin_t
    for m in range(l_max + 1):
        for l in range(m, l_max + 1):
            prev = P[m, l - 1] if l - 1 >= m else 0.0
            dPdt[m, l] = (l * x * P[m, l] - (l + m) * prev) * inv_sin
    return P, dPdt


def assoc_legendre(l, m, x):
    """P_{l,m}(x) = (1-x^2)^{m/2} d^m/dx^m P_l(x), no Condon-Shortley phase.

    P_{l,0} is the Legendre polynomial P_l. Raises ValueError outside the
    domain |x| <= 1 or for m > l.
    """
    if not (0 <= m <= l):
        raise ValueError(f"require 0 <= m <= l, got l={l}, m={m}")
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 1.0 + 1e-14):
        raise ValueError("argument outside [-1, 1]")
    scalar = xa.ndim == 0
    P, _ = _legendre_tables(l, np.atleast_1d(np.clip(xa, -1.0, 1.0)))
    out = P[m, l]
    return float(out[0]) if scalar else out


def real_harmonic(l, m, theta, psi):
    """Evaluate rho_{l,m} at colatitude theta, azimuth psi."""
    if abs(m) > l:
        raise ValueError(f"require |m| <= l, got l={l}, m={m}")
    ct = np.cos(theta)
    if m == 0:
        return assoc_legendre(l, 0, ct)
    if m > 0:
        return assoc_legendre(l, m, ct) * np.cos(m * np.asarray(psi))
    # note the negative m inside the sine: rho_{l,-1} = +P_{l,1} sin(psi)
    return -assoc_legendre(l, -m, ct) * np.sin(m * np.asarray(psi))


def harmonic_block(l, xyz):
    """All rho_{l,m}, m = -l..l, at unit vectors xyz of shape (3, n).

    Returns an array of shape (2l+1, n) ordered m = -l, ..., l.
    """
    x, y, z = np.asarray(xyz, dtype=float)
    r_xy = np.hypot(x, y)
    theta = np.arctan2(r_xy, z)
    psi = np.arctan2(y, x)
    ct = np.clip(np.cos(theta), -1.0, 1.0)
    P, _ = _legendre_tables(l, ct)
    out = np.empty((2 * l + 1, x.shape[0]))
    out[l] = P[0, l]
    for m in range(1, l + 1):
        out[l + m] = P[m, l] * np.cos(m * psi)
        out[l - m] = P[m, l] * np.sin(m * psi)
    return out


class QuadratureGrid:
    """Gauss-Legendre (colatitude) x equispaced (azimuth) quadrature on S^2.

    n_theta = 2 l_max and n_psi = 4 l_max oversample the nominal band
    limit, leaving headroom for the cubic and higher nonlinearities of the
    equilibrium residual. Analysis is exact for fields band-limited to
    l_cap = n_theta - 1.
    """

    def __init__(self, l_max):
        if l_max < 1:
            raise ValueError("l_max must be >= 1")
        self.l_max = l_max
        self.n_theta = 2 * l_max
        self.n_psi = 4 * l_max
        self.l_cap = self.n_theta - 1
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        # descending theta order is irrelevant; keep leggauss ordering
        self.cos_theta = x
        self.sin_theta = np.sqrt(1.0 - x * x)
        self.theta = np.arccos(x)
        self.psi = 2.0 * np.pi * np.arange(self.n_psi) / self.n_psi
        # colatitude weights scaled so that the constant 1 integrates to 4 pi
        self.w_theta = w * (2.0 * np.pi)
        self.w_psi = 1.0 / self.n_psi
        self.P, self.dPdt = _legendre_tables(self.l_cap, self.cos_theta)
        marr = np.arange(self.l_cap + 1)[:, None]
        self.cos_m = np.cos(marr * self.psi[None, :])
        self.sin_m = np.sin(marr * self.psi[None, :])
        self.norms2 = self._quadrature_norms()

    @property
    def weights(self):
        """Full (n_theta, n_psi) quadrature weights, summing to 4 pi."""
        return np.repeat(self.w_theta[:, None] * self.w_psi, self.n_psi, axis=1)

    def _quadrature_norms(self):
        """Squared norms of rho_{l,m} up to l_cap, by quadrature in
        colatitude and exact trigonometric sums in azimuth."""
        n2 = np.zeros((self.l_cap + 1) ** 2)
        for l in range(self.l_cap + 1):
            for m in range(l + 1):
                col = np.dot(self.w_theta, self.P[m, l] ** 2)
                az = 1.0 if m == 0 else 0.5
                n2[sf_index(l, m)] = col * az
                if m > 0:
                    n2[sf_index(l, -m)] = col * az
        return n2

    def integrate(self, values):
        """Quadrature of a nodal field over S^2."""
        return float(np.dot(self.w_theta, values.sum(axis=1)) * self.w_psi)

    def nodes_xyz(self):
        """Cartesian node coordinates, shape (3, n_theta, n_psi)."""
        st = self.sin_theta[:, None]
        return np.stack([
            st * np.cos(self.psi)[None, :],
            st * np.sin(self.psi)[None, :],
            np.broadcast_to(self.cos_theta[:, None],
                            (self.n_theta, self.n_psi)).copy(),
        ])


@lru_cache(maxsize=None)
def build_grid(l_max):
    """Shared, immutable quadrature grid for the given band limit."""
    return QuadratureGrid(l_max)


@dataclass
class SpectralField:
    """Real scalar field on S^2 by its coefficients in the rho_{l,m} basis."""

    l_max: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.l_max + 1) ** 2
        if self.coeffs.shape != (expected,):
            raise ValueError(
                f"expected {expected} coefficients, got {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite coefficient")

    @classmethod
    def zeros(cls, l_max):
        return cls(l_max, np.zeros((l_max + 1) ** 2))

    @classmethod
    def basis(cls, l_max, l, m, amplitude=1.0):
        f = cls.zeros(l_max)
        f.coeffs[sf_index(l, m)] = amplitude
        return f

    def get(self, l, m):
        return float(self.coeffs[sf_index(l, m)])

    def copy(self):
        return SpectralField(self.l_max, self.coeffs.copy())

    def truncated(self, l_max):
        out = SpectralField.zeros(l_max)
        n = min(len(out.coeffs), len(self.coeffs))
        out.coeffs[:n] = self.coeffs[:n]
        return out

    def to_json(self):
        coeffs = [[l, m, self.get(l, m)]
                  for l in range(self.l_max + 1)
                  for m in range(-l, l + 1)]
        return {"l_max": self.l_max, "coeffs": coeffs}

    @classmethod
    def from_json(cls, obj):
        f = cls.zeros(int(obj["l_max"]))
        for l, m, v in obj["coeffs"]:
            f.coeffs[sf_index(int(l), int(m))] = float(v)
        return f

    def dumps(self):
        return json.dumps(self.to_json())


@dataclass
class GridField:
    """Nodal values of a real scalar field on a quadrature grid."""

    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = (self.grid.n_theta, self.grid.n_psi)
        if self.values.shape != shape:
            raise ValueError(f"expected values of shape {shape}")

    def to_csv(self, path):
        grid = self.grid
        with open(path, "w") as fh:
            fh.write("theta,psi,value\n")
            for i in range(grid.n_theta):
                for j in range(grid.n_psi):
                    fh.write(f"{grid.theta[i]!r},{grid.psi[j]!r},"
                             f"{self.values[i, j]!r}\n")


@lru_cache(maxsize=None)
def _index_tables(l_max):
    """Flat coefficient indices arranged by (m, l), plus the l >= m mask.

    idx_cos[m, l] points at the cos(m psi) coefficient (m >= 0) and
    idx_sin[m, l] at the sin(m psi) coefficient (negative-m slot)."""
    size = l_max + 1
    idx_cos = np.zeros((size, size), dtype=int)
    idx_sin = np.zeros((size, size), dtype=int)
    mask = np.zeros((size, size))
    for m in range(size):
        for l in range(m, size):
            idx_cos[m, l] = sf_index(l, m)
            idx_sin[m, l] = sf_index(l, -m)
            mask[m, l] = 1.0
    idx_cos.setflags(write=False)
    idx_sin.setflags(write=False)
    mask.setflags(write=False)
    return idx_cos, idx_sin, mask


def _azimuthal_moments(grid, values, m_max):
    """Weighted azimuthal sums F_c[m,i] = sum_j f_ij cos(m psi_j) / n_psi
    and F_s with sin."""
    fc = values @ grid.cos_m[: m_max + 1].T * grid.w_psi
    fs = values @ grid.sin_m[: m_max + 1].T * grid.w_psi
    return fc.T, fs.T


def analyze(f, l_max=None):
    """Project a grid field onto the harmonic basis up to l_max.

    Uses quadrature inner products divided by the grid's quadrature norms.
    Exact for fields band-limited to the analysis degree.
    """
    grid = f.grid
    if l_max is None:
        l_max = grid.l_max
    if l_max > grid.l_cap:
        raise ValueError(f"l_max={l_max} exceeds grid capacity {grid.l_cap}")
    fc, fs = _azimuthal_moments(grid, f.values, l_max)
    out = SpectralField.zeros(l_max)
    M = l_max + 1
    idx_cos, idx_sin, mask = _index_tables(l_max)
    P_blk = grid.P[:M, :M]
    # colatitude projection: sum_i w_i F[m,i] P_{l,m}(x_i)
    proj_c = np.einsum("mlt,mt->ml", P_blk, fc * grid.w_theta)
    proj_s = np.einsum("mlt,mt->ml", P_blk, fs * grid.w_theta)
    keep = mask > 0
    keep_s = keep.copy()
    keep_s[0] = False
    out.coeffs[idx_cos[keep]] = (proj_c[keep]
                                 / grid.norms2[idx_cos[keep]])
    out.coeffs[idx_sin[keep_s]] = (proj_s[keep_s]
                                   / grid.norms2[idx_sin[keep_s]])
    return out


def _fourier_profiles(grid, c, P_tab):
    """Colatitude profiles A[m] (cosine) and B[m] (sine) of a spectral
    field against a Legendre-type table, each of shape (l_max+1, n_theta).
    The row B[0] multiplies sin(0 psi) = 0 and is never used."""
    M = c.l_max + 1
    idx_cos, idx_sin, mask = _index_tables(c.l_max)
    Cc = c.coeffs[idx_cos] * mask
    Cs = c.coeffs[idx_sin] * mask
    blk = P_tab[:M, :M]
    A = np.einsum("ml,mlt->mt", Cc, blk)
    B = np.einsum("ml,mlt->mt", Cs, blk)
    return A, B


def _accumulate(grid, c, P_tab):
    """Sum coefficients against a Legendre-type table; returns nodal values."""
    M = c.l_max + 1
    A, B = _fourier_profiles(grid, c, P_tab)
    vals = np.tensordot(A, grid.cos_m[:M], axes=(0, 0))
    if M > 1:
        vals += np.tensordot(B[1:], grid.sin_m[1:M], axes=(0, 0))
    return vals


def synthesize(c, grid):
    """Evaluate a spectral field at the grid nodes."""
    if c.l_max > grid.l_cap:
        raise ValueError(f"field l_max={c.l_max} exceeds grid capacity")
    return GridField(grid, _accumulate(grid, c, grid.P))


def synthesize_with_derivs(c, grid):
    """Nodal values together with d/dtheta and d/dpsi, all spectral."""
    if c.l_max > grid.l_cap:
        raise ValueError(f"field l_max={c.l_max} exceeds grid capacity")
    M = c.l_max + 1
    A, B = _fourier_profiles(grid, c, grid.P)
    vals = np.tensordot(A, grid.cos_m[:M], axes=(0, 0))
    dps = np.zeros_like(vals)
    if M > 1:
        vals += np.tensordot(B[1:], grid.sin_m[1:M], axes=(0, 0))
        marr = np.arange(1, M)[:, None]
        dps -= np.tensordot(marr * A[1:], grid.sin_m[1:M], axes=(0, 0))
        dps += np.tensordot(marr * B[1:], grid.cos_m[1:M], axes=(0, 0))
    dth = _accumulate(grid, c, grid.dPdt)
    return (GridField(grid, vals), GridField(grid, dth), GridField(grid, dps))


def laplace_beltrami_s2(c):
    """Laplace-Beltrami operator on the unit sphere: c_{l,m} -> -l(l+1) c."""
    out = c.copy()
    for l in range(c.l_max + 1):
        out.coeffs[l * l:(l + 1) ** 2] *= -l * (l + 1)
    return out
