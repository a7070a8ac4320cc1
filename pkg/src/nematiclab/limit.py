"""Macroscopic limit: mobility constant, limit coefficient, and director flow.

Contains the axisymmetric potential profile, the polar ODE whose solution
gives the mobility constant gamma, the assembled limit coefficient Lambda,
a projection scheme for the unit-sphere-valued heat flow, its weak-form
residual, and spectral checks of the linearized operators around the uniaxial
equilibrium.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import kernel, maier_saupe, sphere

__all__ = [
    "LimitCoefficients", "u0_profile", "solve_g0", "gamma_constant",
    "gamma_matrix_oracle", "lambda_coefficient", "hmhf_step",
    "dirichlet_energy", "weak_residual", "assemble_linearized",
    "SingularityError",
]


class SingularityError(RuntimeError):
    """Director update collapsed to the zero vector (antipodal pinch)."""


@dataclass(frozen=True)
class LimitCoefficients:
    gamma: float
    mu: float
    S2: float
    eta: float
    Lambda: float


def u0_profile(params):
    """Closed-form axisymmetric potential: (u0(theta), du0/dtheta)."""
    a, s = params.alpha, params.S2

    def u0(theta):
        return a * (2.0 / 3.0 + s / 3.0 - s * np.cos(theta) ** 2)

    def du0(theta):
        return 2.0 * a * s * np.cos(theta) * np.sin(theta)

    return u0, du0


def _cheb(n):
    """Chebyshev-Lobatto nodes on [-1,1] and differentiation matrix."""
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[n] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def solve_g0(params, n=256):
    """Polar profile g0 on [0, pi] from the mobility ODE.

    (1/sin) d/dtheta(sin g0') - g0/sin^2 - u0' g0' = -u0', with Dirichlet
    zero at both poles (the 1/sin^2 term forces boundedness only then).
    Chebyshev collocation; returns (g0, dg0) callables built on the
    collocation interpolant.
    """
    _, du0 = u0_profile(params)
    x, D = _cheb(n)
    theta = (x + 1.0) * (np.pi / 2.0)      # decreasing from pi to 0
    Dth = D * (2.0 / np.pi)
    st, ct = np.sin(theta), np.cos(theta)
    interior = slice(1, n)
    L = Dth @ Dth + np.diag(ct / np.where(st == 0, 1.0, st)) @ Dth \
        - np.diag(du0(theta)) @ Dth
    L = L - np.diag(1.0 / np.where(st == 0, 1.0, st) ** 2)
    rhs = -du0(theta)
    A = np.eye(n + 1)
    A[interior] = L[interior]
    b = np.zeros(n + 1)
    b[interior] = rhs[interior]
    try:
        g = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("collocation solve failed") from exc
    gp = Dth @ g
    gpp = Dth @ gp

    def make_interp(vals):
        coef = np.polynomial.chebyshev.chebfit(x, vals, n)

        def f(th):
            return np.polynomial.chebyshev.chebval(
                2.0 * np.asarray(th) / np.pi - 1.0, coef)
        return f

    g0 = make_interp(g)
    dg0 = make_interp(gp)
    d2g0 = make_interp(gpp)

    def residual(th):
        th = np.asarray(th, dtype=float)
        s, c = np.sin(th), np.cos(th)
        return (d2g0(th) + (c / s) * dg0(th) - g0(th) / s ** 2
                - du0(th) * dg0(th) + du0(th))

    return g0, dg0, residual


def gamma_constant(params, g0=None):
    """Mobility constant: pi * int (d f0/dtheta) g0 sin(theta) dtheta.

    f0 is the uniaxial equilibrium profile; positivity is a consistency
    requirement of the limit theory.
    """
    if g0 is None:
        g0, _, _ = solve_g0(params)
    eta, Z = params.eta, params.Z

    def integrand(th):
        f0 = np.exp(eta * np.cos(th) ** 2) / Z
        df0 = -2.0 * eta * np.cos(th) * np.sin(th) * f0
        return df0 * g0(th) * np.sin(th)

    # sign convention: with the ODE normalized to rhs -u0', the quadrature
    # returns the negative of the positive-definite bilinear form; flip it
    val = -np.pi * quad(integrand, 0.0, np.pi, epsabs=1e-13, epsrel=1e-11,
                        limit=200)[0]
    if val <= 0.0:
        raise RuntimeError(f"mobility constant came out nonpositive: {val}")
    return val


def gamma_matrix_oracle(params, u=(1.0, 0.0, 0.0), v=(1.0, 0.0, 0.0),
                        L=20, quad_lmax=32):
    """Bilinear form int (u.Rf0) Af0^{-1} (v.Rf0) dm by Galerkin inversion.

    Independent route to gamma: for the equilibrium axis e3 the form equals
    gamma (u.v - u3 v3).  Assembles Af0 phi = -R.(f0 R phi) in the harmonic
    basis up to degree L on a fine quadrature grid and inverts on the
    zero-mean subspace.
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    gq = sphere.build_grid(quad_lmax)
    f0 = np.exp(params.eta * gq.m[:, 2] ** 2) / params.Z
    ncoef = (L + 1) ** 2
    # values of R Y_j on the quadrature grid, basis degrees 1..L (skip l=0)
    ry = np.empty((3, gq.nnodes, ncoef), dtype=complex)
    for i in range(3):
        ry[i] = gq.Y @ gq.rot[i][:, :ncoef]
    sel = slice(1, ncoef)
    wf = gq.weights * f0
    A = np.einsum("n,inj,ink->jk", wf, ry[:, :, sel].conj(), ry[:, :, sel])
    rf0 = 2.0 * params.eta * (f0 * gq.m[:, 2])[:, None] \
        * np.cross(gq.m, [0.0, 0.0, 1.0])
    bvals = rf0 @ v
    b = (gq.Y[:, sel].conj().T) @ (gq.weights * bvals)
    psi = np.linalg.solve(A, b)
    uvals = rf0 @ u
    return float(np.real(np.sum(gq.weights * uvals * (gq.Y[:, sel] @ psi))))


def lambda_coefficient(params, kspec, g0=None):
    """Assemble the limit coefficient Lambda = 2 alpha mu S2^2 / (gamma d)."""
    gamma = gamma_constant(params, g0)
    lam = 2.0 * params.alpha * kspec.mu * params.S2 ** 2 / (gamma * kspec.d)
    if lam <= 0.0:
        raise RuntimeError("limit coefficient must be positive")
    return LimitCoefficients(gamma=gamma, mu=kspec.mu, S2=params.S2,
                             eta=params.eta, Lambda=lam)


def _laplacian(n, h, d):
    out = np.zeros_like(n)
    for ax in range(d):
        out += (np.roll(n, 1, axis=ax) + np.roll(n, -1, axis=ax) - 2.0 * n)
    return out / h ** 2


def hmhf_step(n, dt, Lambda, torus):
    """Projection step of the unit-target heat flow: explicit update, then
    pointwise renormalization (which supplies the |grad n|^2 n term)."""
    nsp = np.reshape(n, (torus.n,) * torus.d + (3,))
    star = nsp + dt * Lambda * _laplacian(nsp, torus.h, torus.d)
    norm = np.linalg.norm(star, axis=-1)
    if np.min(norm) < 1e-8:
        raise SingularityError("director update collapsed to zero")
    return np.reshape(star / norm[..., None], n.shape)


def dirichlet_energy(n, torus):
    """(1/2) sum over axes of |forward difference|^2, discrete L2."""
    nsp = np.reshape(n, (torus.n,) * torus.d + (3,))
    e = 0.0
    for ax in range(torus.d):
        diff = (np.roll(nsp, -1, axis=ax) - nsp) / torus.h
        e += 0.5 * np.sum(diff ** 2) * torus.cell_volume
    return e


def weak_residual(traj, dt, Theta, phi, Lambda, torus):
    """Absolute defect of the rotated weak form over a stored trajectory.

    traj has shape (nt+1, sites..., 3) at uniform spacing dt; Theta is a
    test 3-vector field on the torus, phi a test profile sampled at the
    frame times.  Left side tests d/dt n wedge n; right side tests the
    elastic flux; both by left-endpoint quadrature in time.
    """
    traj = np.asarray(traj)
    nt = traj.shape[0] - 1
    shape = (torus.n,) * torus.d + (3,)
    th = np.reshape(Theta, shape)
    # forward differences on both factors: summation by parts then matches
    # the roll-stencil Laplacian exactly, so the defect is purely temporal
    dth = [(np.roll(th, -1, axis=ax) - th) / torus.h for ax in range(torus.d)]
    left = 0.0
    right = 0.0
    for k in range(nt):
        nk = np.reshape(traj[k], shape)
        nk1 = np.reshape(traj[k + 1], shape)
        pk = phi(k * dt)
        dn = (nk1 - nk) / dt
        left += pk * np.sum(np.cross(dn, nk) * th) * torus.cell_volume * dt
        flux = 0.0
        for ax in range(torus.d):
            dnk = (np.roll(nk, -1, axis=ax) - nk) / torus.h
            flux += np.sum(dth[ax] * np.cross(nk, dnk))
        right += Lambda * pk * flux * torus.cell_volume * dt
    return abs(left - right)


@dataclass(frozen=True)
class LinearizedOperators:
    """Galerkin matrices of the two linearized operators at a uniaxial state.

    A is assembled in the plain harmonic basis (degrees 1 through L) and
    represents phi -> -R.(f0 R phi).  H represents g -> g/f0 + U0[g] in the
    f0-weighted harmonic basis restricted to the zero-mean subspace, where
    the exact kernel span {m1 m3 f0, m2 m3 f0} is degree 2 and therefore
    representable at any truncation.  nullmap carries reduced coordinates
    back to weighted-basis coordinates; targets holds the two kernel
    functions in reduced coordinates.
    """
    L: int
    A: np.ndarray
    H: np.ndarray
    nullmap: np.ndarray
    targets: np.ndarray
    quad_lmax: int


def _weighted_basis(params, L, quad_lmax):
    gq = sphere.build_grid(quad_lmax)
    f0 = np.exp(params.eta * gq.m[:, 2] ** 2) / params.Z
    ncoef = (L + 1) ** 2
    phi = gq.Y[:, 1:ncoef] * f0[:, None]      # basis Y_k f0, degrees 1..L
    return gq, f0, phi


def assemble_linearized(params, L=12, quad_lmax=None):
    """Build the Galerkin matrices; see LinearizedOperators for conventions."""
    if quad_lmax is None:
        quad_lmax = max(2 * L + 8, 32)
    gq, f0, phi = _weighted_basis(params, L, quad_lmax)
    ncoef = (L + 1) ** 2
    sel = slice(1, ncoef)
    ry = np.empty((3, gq.nnodes, ncoef - 1), dtype=complex)
    for i in range(3):
        ry[i] = gq.Y @ gq.rot[i][:, sel]
    wf = gq.weights * f0
    A = np.einsum("n,inj,ink->jk", wf, ry.conj(), ry)
    # H in the weighted basis: <phi_j, phi_k/f0> - alpha <phi_j, mm:Q[phi_k]>
    H = (phi.conj().T * gq.weights) @ gq.Y[:, sel]
    mm = gq.m[:, :, None] * gq.m[:, None, :] - np.eye(3) / 3.0
    qk = np.einsum("n,nij,nk->kij", gq.weights, mm, phi)
    uvals = -params.alpha * np.einsum("nij,kij->nk", mm, qk)
    H += (phi.conj().T * gq.weights) @ uvals
    H = 0.5 * (H + H.conj().T)
    # restrict to the zero-mean subspace of the weighted span
    s = gq.Y[:, sel].conj().T @ (gq.weights * f0)     # means of phi_k
    s = s.conj()
    proj = np.eye(s.size) - np.outer(s, s.conj()) / np.vdot(s, s).real
    w, V = np.linalg.eigh(proj)
    nullmap = V[:, w > 0.5]
    Hr = nullmap.conj().T @ H @ nullmap
    t1 = np.zeros(ncoef - 1, dtype=complex)
    t2 = np.zeros(ncoef - 1, dtype=complex)
    c1 = gq.analyze(gq.m[:, 0] * gq.m[:, 2])[1:ncoef]
    c2 = gq.analyze(gq.m[:, 1] * gq.m[:, 2])[1:ncoef]
    t1[: c1.size] = c1
    t2[: c2.size] = c2
    targets = np.stack([nullmap.conj().T @ t1, nullmap.conj().T @ t2])
    return LinearizedOperators(L=L, A=A, H=0.5 * (Hr + Hr.conj().T),
                               nullmap=nullmap, targets=targets,
                               quad_lmax=quad_lmax)


def kernel_vectors(ops, threshold=1e-8):
    """Eigenvectors of H below threshold times the largest eigenvalue."""
    w, V = np.linalg.eigh(ops.H)
    return w, V[:, np.abs(w) < threshold * np.max(np.abs(w))]


def apply_G(params, coeffs, ops):
    """Grid values of G v = -A(H v) for v in reduced weighted coordinates.

    Used to verify that kernel vectors of H are killed by the composed
    operator; returns (values of v, values of G v) on the assembly grid.
    """
    gq, f0, phi = _weighted_basis(params, ops.L, ops.quad_lmax)
    full = ops.nullmap @ coeffs
    v = (phi @ full)
    hv = v / f0
    q = sphere.second_moment(gq, v.real) + 1j * sphere.second_moment(gq, v.imag)
    mmq = np.einsum("ni,ij,nj->n", gq.m, q, gq.m) \
        - np.trace(q, axis1=-2, axis2=-1) / 3.0
    hv = hv - params.alpha * mmq
    # A hv = -R.(f0 R hv), assembled spectrally on the fine grid
    ch = gq.analyze(hv.real) + 1j * gq.analyze(hv.imag)
    out = np.zeros(gq.ncoef, dtype=complex)
    for i in range(3):
        rvals = gq.synthesize(gq.rot[i] @ ch, real=False)
        out += gq.rot[i] @ (gq.analyze((f0 * rvals).real)
                            + 1j * gq.analyze((f0 * rvals).imag))
    gv = -gq.synthesize(out, real=False)
    return v, gv
