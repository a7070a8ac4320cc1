"""Homogeneous nematic equilibrium theory for the quadratic mean-field potential.

Covers the scalar order parameter s2, the self-consistency bifurcation in the
interaction strength alpha, axially symmetric equilibrium densities, the bulk
free energy, and the moment-matching exponential (Bingham) map.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from . import sphere

__all__ = [
    "EquilibriumParams", "s2", "solve_eta", "alpha_star", "partition_function",
    "equilibrium_params", "equilibrium_density", "bulk_energy", "u0_potential",
    "bingham_map", "InfeasibleMomentError", "ClosureConvergenceError",
]

# full_output=1 keeps quad from warning when an integrand is exactly odd/zero
_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=200, full_output=1)


class InfeasibleMomentError(ValueError):
    """Second-moment tensor has eigenvalues outside the open feasible set."""


class ClosureConvergenceError(RuntimeError):
    """Newton iteration for the exponential-family map did not converge."""


def _z1d(eta):
    """int_{-1}^{1} e^{eta x^2} dx."""
    return quad(lambda x: np.exp(eta * x * x), -1.0, 1.0, **_QUAD_OPTS)[0]


def s2(eta):
    """Scalar order parameter, in (-1/2, 1), same sign as eta, s2(0) = 0."""
    num = quad(lambda x: (3.0 * x * x - 1.0) * np.exp(eta * x * x),
               -1.0, 1.0, **_QUAD_OPTS)[0]
    return num / (2.0 * _z1d(eta))


def _s2_prime(eta):
    # d/deta of the moment ratio; both numerator integrals are smooth.
    z = _z1d(eta)
    m2 = quad(lambda x: x * x * np.exp(eta * x * x), -1.0, 1.0, **_QUAD_OPTS)[0]
    m4 = quad(lambda x: x ** 4 * np.exp(eta * x * x), -1.0, 1.0, **_QUAD_OPTS)[0]
    # s2 = (3 m2/z - 1)/2, so s2' = (3/2)(m4/z - (m2/z)^2)
    return 1.5 * (m4 / z - (m2 / z) ** 2)


def solve_eta(alpha, lo=-20.0, hi=40.0, step=0.05):
    """All roots of eta = alpha*s2(eta), sorted ascending.

    Scan-and-bisect over [lo, hi]; a tangency (double root at the fold) is
    recovered from critical points of the defect where the scan sees no sign
    change.  Residual of every returned root is below 1e-10.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    F = lambda e: alpha * s2(e) - e
    etas = np.arange(lo, hi + step / 2, step)
    vals = np.array([F(e) for e in etas])
    roots = [0.0]
    for i in range(len(etas) - 1):
        if vals[i] == 0.0 and abs(etas[i]) > 1e-12:
            roots.append(etas[i])
        if vals[i] * vals[i + 1] < 0.0:
            r = brentq(F, etas[i], etas[i + 1], xtol=1e-13, rtol=8.9e-16)
            roots.append(r)
    # Fold point: F has a critical point touching zero without a sign change.
    dF = lambda e: alpha * _s2_prime(e) - 1.0
    dvals = np.array([dF(e) for e in etas])
    for i in range(len(etas) - 1):
        if dvals[i] * dvals[i + 1] < 0.0:
            c = brentq(dF, etas[i], etas[i + 1], xtol=1e-12)
            if abs(F(c)) < 1e-5 and all(abs(c - r) > 1e-4 for r in roots):
                roots.append(c)
    out = []
    for r in sorted(roots):
        if not out or abs(r - out[-1]) > 1e-6:
            out.append(0.0 if abs(r) < 1e-12 else r)
    return out


def alpha_star():
    """Critical interaction strength: min over eta of Z / int x^2(1-x^2)e^{eta x^2}."""
    def ratio(eta):
        den = quad(lambda x: x * x * (1.0 - x * x) * np.exp(eta * x * x),
                   -1.0, 1.0, **_QUAD_OPTS)[0]
        return _z1d(eta) / den
    res = minimize_scalar(ratio, bounds=(0.0, 20.0), method="bounded",
                          options={"xatol": 1e-10})
    return res.fun


def partition_function(eta):
    """Z = int_{S^2} e^{eta (m.nu)^2} dm; independent of the axis nu."""
    return 2.0 * np.pi * _z1d(eta)


@dataclass(frozen=True)
class EquilibriumParams:
    """Stable nematic branch at a given interaction strength."""
    alpha: float
    eta: float     # largest root of eta = alpha*s2(eta)
    S2: float
    Z: float
    E0: float      # minimum bulk energy


def equilibrium_params(alpha):
    eta1 = solve_eta(alpha)[-1]
    S2 = s2(eta1)
    Z = partition_function(eta1)
    # E0[h] = int h log h + alpha/3 - alpha/2 |Q[h]|^2 with log h = eta(m.nu)^2 - log Z
    m2 = quad(lambda x: x * x * np.exp(eta1 * x * x), -1.0, 1.0, **_QUAD_OPTS)[0]
    mean_m3sq = 2.0 * np.pi * m2 / Z
    e0 = eta1 * mean_m3sq - np.log(Z) + alpha / 3.0 - alpha / 2.0 * (2.0 / 3.0) * S2 ** 2
    return EquilibriumParams(alpha=alpha, eta=eta1, S2=S2, Z=Z, E0=e0)


def equilibrium_density(nu, eta, grid):
    """Axially symmetric density exp(eta (m.nu)^2)/Z as grid values."""
    nu = np.asarray(nu, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > 1e-10:
        raise ValueError("director must be a unit vector")
    z = partition_function(eta)
    return np.exp(eta * (grid.m @ nu) ** 2) / z


def bulk_energy(values, alpha, grid):
    """Entropy plus quadratic interaction energy of a probability density."""
    if np.min(values) <= 0.0:
        raise ValueError("density must be positive for the entropy term")
    ent = sphere.integrate(grid, values * np.log(values))
    q = sphere.second_moment(grid, values)
    return ent + alpha / 3.0 - alpha / 2.0 * np.sum(q * q)


def u0_potential(values, alpha, grid):
    """Local mean-field potential alpha(2/3 - (m x m):Q[f]) as grid values."""
    q = sphere.second_moment(grid, values)
    return alpha * (2.0 / 3.0 - np.einsum("ni,ij,nj->n", grid.m, q, grid.m))


# Orthonormal-ish basis of symmetric traceless 3x3 matrices for the Newton solve.
_TL_BASIS = np.array([
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[1, 0, 0], [0, 1, 0], [0, 0, -2]],
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
    [[0, 0, 1], [0, 0, 0], [1, 0, 0]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 0]],
], dtype=float)


def _coords_to_sym(c):
    return np.einsum("k,kij->ij", c, _TL_BASIS)


def _bingham_moments(B, grid):
    """Normalized density for exp(B:mm), its Q and full fourth moment."""
    e = np.einsum("ni,ij,nj->n", grid.m, B, grid.m)
    e -= e.max()                      # overflow guard; normalization absorbs it
    vals = np.exp(e)
    vals /= sphere.integrate(grid, vals)
    return vals, sphere.second_moment(grid, vals), sphere.fourth_moment(grid, vals)


def bingham_map(Q, grid=None, tol=1e-11, maxit=50):
    """Traceless symmetric B with second_moment(exp(B:mm)/Z) = Q.

    Damped Newton on the 5-dimensional traceless coordinates, starting from
    B = 0, with the analytic covariance Jacobian.  Quadrature runs on a high
    band-limit grid so the moments of the sharply peaked exponentials stay
    accurate.
    """
    Q = np.asarray(Q, dtype=float)
    if abs(np.trace(Q)) > 1e-10 or np.max(np.abs(Q - Q.T)) > 1e-10:
        raise ValueError("second-moment tensor must be symmetric traceless")
    ev = np.linalg.eigvalsh(Q)
    if ev[0] <= -1.0 / 3.0 + 1e-12 or ev[-1] >= 2.0 / 3.0 - 1e-12:
        raise InfeasibleMomentError(
            f"eigenvalues {ev} outside the feasible interval (-1/3, 2/3)")
    if grid is None:
        grid = sphere.build_grid(32)

    b = np.zeros(5)
    _, qcur, m4 = _bingham_moments(np.zeros((3, 3)), grid)
    rnorm = np.max(np.abs(qcur - Q))
    for _ in range(maxit):
        if rnorm < tol:
            return _coords_to_sym(b)
        # residual and Jacobian both in the dual pairing with the basis
        res = np.einsum("pij,ij->p", _TL_BASIS, qcur - Q)
        # J_{pq} = d <E_p : mm> / d b_q = Cov(E_p:mm, E_q:mm) under f_B
        mom2 = qcur + np.eye(3) / 3.0
        J = np.einsum("pij,ijkl,qkl->pq", _TL_BASIS, m4, _TL_BASIS) \
            - np.einsum("pij,ij,qkl,kl->pq", _TL_BASIS, mom2, _TL_BASIS, mom2)
        try:
            db = np.linalg.solve(J, res)
        except np.linalg.LinAlgError as exc:
            raise ClosureConvergenceError("singular covariance Jacobian") from exc
        step = 1.0
        for _ in range(30):
            bn = b - step * db
            _, qn, m4n = _bingham_moments(_coords_to_sym(bn), grid)
            rn = np.max(np.abs(qn - Q))
            if rn < rnorm or rnorm < 10 * tol:
                b, qcur, m4, rnorm = bn, qn, m4n, rn
                break
            step *= 0.5
        else:
            raise ClosureConvergenceError("damped Newton stalled")
    if rnorm < tol:
        return _coords_to_sym(b)
    raise ClosureConvergenceError(
        f"no convergence in {maxit} Newton steps (residual {rnorm:.3e})")
