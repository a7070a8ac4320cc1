"""Gaussian interaction kernel and its nonlocal Fourier-multiplier operators.

The spatial domain is a periodic torus [0, X)^d; convolution with the rescaled
kernel, the nonlocal operator L_eps = (I - k_eps*)/eps, and its vector square
root T_eps all act mode-by-mode on the frequency lattice (Z/X)^d.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelSpec", "TorusGrid", "make_torus", "khat", "h_multiplier",
    "convolve_keps", "apply_L_eps", "apply_T_eps", "doubled_energy_form",
    "doubled_energy_direct", "certify_c0", "tail_mass",
]


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel k(x) = (a/pi)^{d/2} exp(-a|x|^2), 0 < a < pi."""
    a: float
    d: int
    mu: float = field(init=False)   # second moment int |x|^2 k dx
    c0: float = field(init=False)   # certified constant in the multiplier bound

    def __post_init__(self):
        if not 0.0 < self.a < np.pi:
            raise ValueError("kernel width parameter must lie in (0, pi)")
        if self.d not in (1, 2):
            raise ValueError("spatial dimension must be 1 or 2")
        object.__setattr__(self, "mu", self.d / (2.0 * self.a))
        object.__setattr__(self, "c0", np.pi ** 2 / self.a * 0.99)


def khat(spec, xi):
    """Fourier transform exp(-pi^2 |xi|^2 / a); value in (0, 1]."""
    xi = np.asarray(xi, dtype=float)
    return np.exp(-np.pi ** 2 * np.sum(xi * xi, axis=-1) / spec.a)


def h_multiplier(spec, xi):
    """xi * sqrt((1 - khat)/|xi|^2), continuous at 0; the square root of L."""
    xi = np.asarray(xi, dtype=float)
    r2 = np.sum(xi * xi, axis=-1)
    kh = np.exp(-np.pi ** 2 * r2 / spec.a)
    with np.errstate(invalid="ignore", divide="ignore"):
        amp = np.sqrt((1.0 - kh) / r2)
    amp = np.where(r2 > 0, amp, 0.0)
    return xi * amp[..., None]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid with its frequency lattice."""
    d: int
    X: float
    n: int
    xi: np.ndarray = field(repr=False)      # (n, ..., n, d) frequency vectors
    x: np.ndarray = field(repr=False)       # (n, ..., n, d) node coordinates

    @property
    def h(self):
        return self.X / self.n

    @property
    def cell_volume(self):
        return (self.X / self.n) ** self.d

    @property
    def nsites(self):
        return self.n ** self.d

    def l2_norm(self, u):
        """Discrete L^2 norm: sum over sites of |u|^2 * cell volume."""
        return np.sqrt(np.sum(np.abs(u) ** 2) * self.cell_volume)


def make_torus(d, X, n):
    if n & (n - 1) != 0 or n < 2:
        raise ValueError("nodes per axis must be a power of two")
    freq1 = np.fft.fftfreq(n, d=X / n)
    x1 = np.arange(n) * (X / n)
    grids = np.meshgrid(*([freq1] * d), indexing="ij")
    xi = np.stack(grids, axis=-1)
    xg = np.stack(np.meshgrid(*([x1] * d), indexing="ij"), axis=-1)
    return TorusGrid(d=d, X=X, n=n, xi=xi, x=xg)


def _apply_multiplier(grid, u, mult):
    """Multiply the spatial spectrum of u (spatial axes first) by mult."""
    u = np.asarray(u)
    axes = tuple(range(grid.d))
    uh = np.fft.fftn(u, axes=axes)
    shape = mult.shape + (1,) * (u.ndim - grid.d)
    return np.fft.ifftn(uh * mult.reshape(shape), axes=axes)


def convolve_keps(grid, spec, u, eps):
    """Convolution with the eps-rescaled kernel: multiplier khat(sqrt(eps) xi)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    mult = khat(spec, np.sqrt(eps) * grid.xi)
    return _apply_multiplier(grid, u, mult).real


def apply_L_eps(grid, spec, u, eps):
    """(u - u*k_eps)/eps via the nonnegative multiplier (1 - khat)/eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    mult = (1.0 - khat(spec, np.sqrt(eps) * grid.xi)) / eps
    return _apply_multiplier(grid, u, mult).real


def apply_T_eps(grid, spec, u, eps):
    """Vector square root of L_eps; returns d complex components, axis 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    hv = h_multiplier(spec, np.sqrt(eps) * grid.xi) / np.sqrt(eps)
    return np.stack([_apply_multiplier(grid, u, hv[..., k])
                     for k in range(grid.d)])


def doubled_energy_form(grid, spec, Q, eps, alpha):
    """Pair-interaction energy of a tensor field, as (alpha*eps/2) <Q, L_eps Q>."""
    lq = apply_L_eps(grid, spec, Q, eps)
    return 0.5 * alpha * eps * np.sum(Q * lq) * grid.cell_volume


def doubled_energy_direct(grid, spec, Q, eps, alpha):
    """Same energy by the literal double sum with the periodized kernel.

    O(nsites^2) reference route; kept for cross-validation only.
    """
    kh = khat(spec, np.sqrt(eps) * grid.xi)
    kper = np.fft.ifftn(kh).real / grid.cell_volume   # periodized k_eps at nodes
    Qf = Q.reshape(grid.nsites, -1)
    kf = kper.reshape(grid.nsites)
    idx = np.arange(grid.n)
    # displacement index table site -> site, per axis, wrapped
    coords = np.stack(np.meshgrid(*([idx] * grid.d), indexing="ij"),
                      axis=-1).reshape(grid.nsites, grid.d)
    diff = (coords[:, None, :] - coords[None, :, :]) % grid.n
    flat = np.zeros(diff.shape[:2], dtype=int)
    for ax in range(grid.d):
        flat = flat * grid.n + diff[..., ax]
    kmat = kf[flat]
    d2 = np.sum(Qf ** 2, axis=1)[:, None] + np.sum(Qf ** 2, axis=1)[None, :] \
        - 2.0 * Qf @ Qf.T
    return 0.25 * alpha * np.sum(kmat * d2) * grid.cell_volume ** 2


def certify_c0(grid, spec, eps_list=(1.0,)):
    """Lattice minimum of (1 - khat)/(|xi|^2 khat^2) over the given rescalings.

    Must come out at or above spec.c0; returns the minimum found.
    """
    best = np.inf
    for eps in eps_list:
        xi = np.sqrt(eps) * grid.xi
        r2 = np.sum(xi * xi, axis=-1).ravel()
        kh = np.exp(-np.pi ** 2 * r2 / spec.a)
        mask = r2 > 0
        best = min(best, np.min((1.0 - kh[mask]) / (r2[mask] * kh[mask] ** 2)))
    return best


def tail_mass(spec, eps, delta):
    """(1/eps) * mass of k outside |x| >= delta/sqrt(eps), closed form."""
    from scipy.special import erfc
    r = delta / np.sqrt(eps)
    if spec.d == 1:
        return erfc(np.sqrt(spec.a) * r) / eps
    # d = 2: radial integral of (a/pi) e^{-a r^2} * 2 pi r dr
    return np.exp(-spec.a * r * r) / eps
