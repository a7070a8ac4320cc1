"""Spectral engine for scalar fields on the unit sphere.

Fields are stored as values on a Gauss-Legendre x uniform-azimuth grid and
moved to and from a complex spherical-harmonic coefficient space by dense
matrices.  The rotational gradient R = m x grad_m acts degree-by-degree in
coefficient space (built from angular-momentum ladder operators), so the
identities R.R = Laplace-Beltrami and integration by parts hold to round-off
for band-limited fields.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

__all__ = [
    "SphereGrid", "build_grid", "integrate", "rot_grad", "div_rot",
    "laplace_beltrami", "second_moment", "fourth_moment", "project",
    "multiply_dealiased",
]


def _coef_index(lmax):
    """(l, m) pairs in l-major order; smaller-lmax tables are a prefix."""
    ls, ms = [], []
    for l in range(lmax + 1):
        for m in range(-l, l + 1):
            ls.append(l)
            ms.append(m)
    return np.array(ls), np.array(ms)


def _ladder_matrices(lmax):
    """Sparse-in-structure dense matrices for L+, L-, L3 in coefficient space."""
    ls, ms = _coef_index(lmax)
    n = ls.size
    lp = np.zeros((n, n))
    lm = np.zeros((n, n))
    pos = {(l, m): k for k, (l, m) in enumerate(zip(ls, ms))}
    for k, (l, m) in enumerate(zip(ls, ms)):
        if m + 1 <= l:
            lp[pos[(l, m + 1)], k] = np.sqrt(l * (l + 1) - m * (m + 1))
        if m - 1 >= -l:
            lm[pos[(l, m - 1)], k] = np.sqrt(l * (l + 1) - m * (m - 1))
    l3 = np.diag(ms.astype(float))
    return lp, lm, l3


@dataclass
class SphereGrid:
    """Quadrature grid plus cached spectral operator tables.

    theta nodes are Gauss-Legendre in cos(theta) (lmax+1 of them), phi nodes
    uniform (2*lmax+2), so products of band-limited fields up to combined
    degree 2*lmax+1 integrate exactly.
    """

    lmax: int
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray          # (nnodes,) quadrature weights, sum 4*pi
    m: np.ndarray                # (nnodes, 3) unit vectors
    Y: np.ndarray = field(repr=False)        # (nnodes, ncoef) synthesis matrix
    rot: np.ndarray = field(repr=False)      # (3, ncoef, ncoef) R_i in coef space
    ell: np.ndarray = field(repr=False)      # (ncoef,) degree of each coefficient

    @property
    def nnodes(self):
        return self.m.shape[0]

    @property
    def ncoef(self):
        return (self.lmax + 1) ** 2

    def analyze(self, values):
        """Coefficients of the band-limited part; exact if deg <= lmax."""
        return self.Y.conj().T @ (self.weights * values)

    def synthesize(self, coeffs, real=True):
        vals = self.Y @ coeffs
        return vals.real if real else vals

    def analyze_batch(self, values):
        """values (..., nnodes) -> coefficients (..., ncoef)."""
        return (values * self.weights) @ self.Y.conj()

    def synthesize_batch(self, coeffs, real=True):
        vals = coeffs @ self.Y.T
        return vals.real if real else vals


@lru_cache(maxsize=32)
def build_grid(lmax):
    """Build (and cache) the grid and operator tables for a given band limit."""
    if lmax < 2:
        raise ValueError("band limit must be at least 2")
    x, wx = np.polynomial.legendre.leggauss(lmax + 1)
    theta_1d = np.arccos(x)
    nphi = 2 * lmax + 2
    phi_1d = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = 2.0 * np.pi / nphi

    theta = np.repeat(theta_1d, nphi)
    phi = np.tile(phi_1d, lmax + 1)
    weights = np.repeat(wx, nphi) * wphi

    st, ct = np.sin(theta), np.cos(theta)
    m = np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=1)

    ls, ms = _coef_index(lmax)
    Y = np.empty((theta.size, ls.size), dtype=complex)
    for k, (l, mm) in enumerate(zip(ls, ms)):
        Y[:, k] = sph_harm_y(l, mm, theta, phi)

    lp, lm, l3 = _ladder_matrices(lmax)
    # R_i = i L_i with L1 = (L+ + L-)/2, L2 = (L+ - L-)/(2i)
    rot = np.stack([
        0.5j * (lp + lm),
        0.5 * (lp - lm),
        1j * l3,
    ])
    return SphereGrid(lmax=lmax, theta=theta, phi=phi, weights=weights,
                      m=m, Y=Y, rot=rot, ell=ls.astype(float))


def integrate(grid, values):
    """Quadrature integral over the sphere; exact for degree <= 2*lmax+1."""
    return np.sum(grid.weights * values, axis=-1)


def project(grid, values):
    """L2 projection onto the band limit (analyze then synthesize)."""
    return grid.synthesize(grid.analyze(values))


def rot_grad(grid, values):
    """Rotational gradient R f = m x grad f, returned as (3, nnodes)."""
    c = grid.analyze(values)
    return np.stack([grid.synthesize(grid.rot[i] @ c) for i in range(3)])


def div_rot(grid, vec):
    """R . v for a tangent-or-not vector field given as (3, nnodes) values.

    Each component is band-limited first, so the l=0 mode of the output is
    exactly zero (R_i preserves degree and kills constants).
    """
    c = np.zeros(grid.ncoef, dtype=complex)
    for i in range(3):
        c += grid.rot[i] @ grid.analyze(vec[i])
    return grid.synthesize(c)


def laplace_beltrami(grid, values):
    """Spherical Laplacian via the -l(l+1) multiplier."""
    c = grid.analyze(values)
    return grid.synthesize(-grid.ell * (grid.ell + 1.0) * c)


def second_moment(grid, values):
    """Traceless second moment Q[f] = int (m m - I/3) f dm, shape (..., 3, 3)."""
    mm = grid.m[:, :, None] * grid.m[:, None, :] - np.eye(3) / 3.0
    return np.einsum("...n,n,nij->...ij", values, grid.weights, mm)


def fourth_moment(grid, values):
    """Full fourth moment int m^4 f dm, shape (..., 3, 3, 3, 3)."""
    m4 = np.einsum("ni,nj,nk,nl->nijkl", grid.m, grid.m, grid.m, grid.m)
    return np.einsum("...n,n,nijkl->...ijkl", values, grid.weights, m4)


def _embed(coeffs, lmax_from, lmax_to):
    """Zero-pad coefficients to a larger band limit (prefix ordering)."""
    out = np.zeros(coeffs.shape[:-1] + ((lmax_to + 1) ** 2,), dtype=complex)
    out[..., : (lmax_from + 1) ** 2] = coeffs
    return out


def multiply_dealiased(grid, f, g, deg_g=2):
    """Band-limited projection of the pointwise product f*g.

    Both factors are resampled on a padded grid whose quadrature is exact for
    the full product, so the returned coefficients carry no aliasing.  deg_g
    is the band limit of g (the default covers quadratic potentials).
    """
    pad = build_grid(grid.lmax + deg_g)
    cf = _embed(grid.analyze(f), grid.lmax, pad.lmax)
    cg = _embed(grid.analyze(g), grid.lmax, pad.lmax)
    prod = pad.synthesize(cf) * pad.synthesize(cg)
    return grid.synthesize(pad.analyze(prod)[: grid.ncoef])
