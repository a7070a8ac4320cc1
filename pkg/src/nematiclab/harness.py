"""Experiment orchestration: configs, well-prepared data, and epsilon sweeps.

The sweep integrates the kinetic equation for a decreasing list of eps values
from director-aligned initial data and measures, at matched macroscopic times,
the distance of the second-moment field from the sharp uniaxial tensor built
on the limiting director flow.
"""

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from . import kernel, kinetic, limit, maier_saupe, sphere

__all__ = [
    "ConfigError", "ExperimentConfig", "parse_config", "build_model",
    "default_director", "well_prepared_init", "limit_trajectory",
    "SweepRow", "ConvergenceReport", "epsilon_sweep",
]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    d: int = 1
    X: float = 2.0 * np.pi
    n: int = 64
    lmax: int = 8
    alpha: float = 8.0
    a: float = 1.0
    epsilons: tuple = (0.1, 0.05, 0.025)
    cfl: float = 0.1
    t_final: float = 0.2
    snapshot_stride: int = 0
    out_dir: str = "."

    def validate(self, for_limit=False):
        if self.d not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
        if self.n < 2 or self.n & (self.n - 1):
            raise ConfigError("spatial nodes must be a power of two")
        if self.lmax < 4:
            raise ConfigError("band limit must be at least 4")
        if not 0.0 < self.a < np.pi:
            raise ConfigError("kernel parameter must lie in (0, pi)")
        eps = self.epsilons
        if not eps or any(e <= 0 for e in eps) \
                or any(eps[i] <= eps[i + 1] for i in range(len(eps) - 1)):
            raise ConfigError("epsilons must be positive, strictly decreasing")
        if self.t_final <= 0 or self.X <= 0:
            raise ConfigError("domain length and final time must be positive")
        if for_limit and self.alpha <= 7.5:
            raise ConfigError(
                "limit experiments need alpha > 7.5 (ordered branch)")
        return self


_FLOAT_KEYS = {"X", "alpha", "a", "cfl", "t_final"}
_INT_KEYS = {"d", "n", "lmax", "snapshot_stride"}


def parse_config(text):
    """Flat `key = value` lines, UTF-8, # comments, comma-separated lists."""
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        try:
            if key in _FLOAT_KEYS:
                fields[key] = float(val)
            elif key in _INT_KEYS:
                fields[key] = int(val)
            elif key == "epsilons":
                fields[key] = tuple(float(v) for v in val.split(","))
            elif key == "out_dir":
                fields[key] = val
            else:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return ExperimentConfig(**fields)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_model(config, eps=None, cfl=None):
    torus = kernel.make_torus(config.d, config.X, config.n)
    grid = sphere.build_grid(config.lmax)
    kspec = kernel.KernelSpec(a=config.a, d=config.d)
    return kinetic.KineticModel(torus=torus, sphere=grid, kspec=kspec,
                                alpha=config.alpha,
                                cfl=config.cfl if cfl is None else cfl)


def default_director(config):
    """Smooth reference director: rotate e3 about e1 by 0.5 sin(2 pi x / X)."""
    torus = kernel.make_torus(config.d, config.X, config.n)
    x = torus.x[..., 0].reshape(-1)
    ang = 0.5 * np.sin(2.0 * np.pi * x / config.X)
    return np.stack([np.zeros_like(ang), -np.sin(ang), np.cos(ang)], axis=-1)


def well_prepared_init(model, n_in, eps):
    """Per-site discrete uniaxial equilibrium aligned with the director field.

    Uses the relaxed axisymmetric profile of the truncation, evaluated along
    m . n(x), so every site is an exact homogeneous steady state and the
    modulated energy of the result is pure director-variation, O(eps).
    """
    n_in = np.reshape(np.asarray(n_in, dtype=float), (-1, 3))
    if n_in.shape[0] != model.torus.nsites:
        raise ValueError("director field does not match the torus")
    if np.max(np.abs(np.linalg.norm(n_in, axis=-1) - 1.0)) > 1e-10:
        raise ValueError("director must be unit length per site")
    g = model.sphere
    c = kinetic.relaxed_profile(g.lmax, model.alpha)
    tt = n_in @ g.m.T                      # (nsites, nnodes) values of m . n
    vals = np.zeros_like(tt)
    for l in range(0, g.lmax + 1):
        al = c[l * l + l].real
        if al == 0.0:
            continue
        cl = np.zeros(l + 1)
        cl[l] = 1.0
        vals += al * np.sqrt((2 * l + 1) / (4.0 * np.pi)) \
            * np.polynomial.legendre.legval(tt, cl)
    f = kinetic.DensityField(values=vals, t=0.0, eps=eps)
    f.check(g)
    return f


def limit_trajectory(config, n_in, sample_times, coeffs=None):
    """March the director heat flow, storing the field at the sample times."""
    config.validate(for_limit=True)
    torus = kernel.make_torus(config.d, config.X, config.n)
    if coeffs is None:
        params = maier_saupe.equilibrium_params(config.alpha)
        kspec = kernel.KernelSpec(a=config.a, d=config.d)
        coeffs = limit.lambda_coefficient(params, kspec)
    lam = coeffs.Lambda
    dt_stab = 0.2 * torus.h ** 2 / (lam * config.d)
    out = []
    n = np.reshape(np.asarray(n_in, float), (-1, 3))
    t = 0.0
    for ts in sample_times:
        while t < ts - 1e-13:
            h = min(dt_stab, ts - t)
            n = limit.hmhf_step(n, h, lam, torus)
            t += h
        out.append(n.copy())
    return np.array(out), coeffs


@dataclass(frozen=True)
class SweepRow:
    eps: float
    sup_error: float
    final_error: float
    max_modulated: float
    initial_modulated: float
    total_dissipation: float
    status: str


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple
    sample_times: tuple

    def monotone(self):
        ok_rows = [r for r in self.rows if r.status == "ok"]
        return len(ok_rows) == len(self.rows) and all(
            ok_rows[i].sup_error > ok_rows[i + 1].sup_error
            for i in range(len(ok_rows) - 1))


def _q_error(model, f, n_dir, S2):
    q = kinetic.second_moment_field(model, f)
    nn = n_dir[:, :, None] * n_dir[:, None, :] - np.eye(3) / 3.0
    diff = q - S2 * nn
    return np.sqrt(np.sum(diff ** 2) * model.torus.cell_volume)


def _run_one_eps(config, eps, n_in, limit_dirs, sample_times, S2):
    model = build_model(config)
    try:
        f = well_prepared_init(model, n_in, eps)
        rep0 = kinetic.energy_report(model, f)
        errors = [_q_error(model, f, limit_dirs[0], S2)]
        max_mod = rep0.modulated_total
        cum = 0.0
        last_dis = rep0.dissipation
        for k in range(1, len(sample_times)):
            ts = sample_times[k]
            while f.t < ts - 1e-13:
                h = min(kinetic.default_dt(model, f), ts - f.t)
                f = kinetic.kinetic_step(model, f, h)
            rep = kinetic.energy_report(model, f)
            cum += 0.5 * (last_dis + rep.dissipation) \
                * (sample_times[k] - sample_times[k - 1])
            last_dis = rep.dissipation
            max_mod = max(max_mod, rep.modulated_total)
            errors.append(_q_error(model, f, limit_dirs[k], S2))
        return SweepRow(eps=eps, sup_error=float(np.max(errors)),
                        final_error=float(errors[-1]),
                        max_modulated=float(max_mod),
                        initial_modulated=float(rep0.modulated_total),
                        total_dissipation=float(cum), status="ok")
    except (kinetic.StabilityError, FloatingPointError) as exc:
        return SweepRow(eps=eps, sup_error=np.inf, final_error=np.inf,
                        max_modulated=np.inf, initial_modulated=np.inf,
                        total_dissipation=np.inf, status=f"failed: {exc}")


def epsilon_sweep(config, n_in=None, n_samples=11, threads=1):
    """Convergence study over the configured eps list; see ConvergenceReport."""
    config.validate(for_limit=True)
    if n_in is None:
        n_in = default_director(config)
    sample_times = tuple(np.linspace(0.0, config.t_final, n_samples))
    limit_dirs, _ = limit_trajectory(config, n_in, sample_times)
    # reference order parameter of the truncation itself, so the constant
    # director case is an exact fixed point with zero error
    g = sphere.build_grid(config.lmax)
    prof = kinetic.relaxed_profile(config.lmax, config.alpha)
    s2_disc = 1.5 * sphere.second_moment(g, g.synthesize(prof))[2, 2]
    kinetic.reference_bulk_energy(config.lmax, config.alpha)
    args = [(config, e, n_in, limit_dirs, sample_times, s2_disc)
            for e in config.epsilons]
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda a: _run_one_eps(*a), args))
    else:
        rows = [_run_one_eps(*a) for a in args]
    return ConvergenceReport(rows=tuple(rows), sample_times=sample_times)
