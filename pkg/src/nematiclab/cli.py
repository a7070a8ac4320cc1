"""Command-line entry point.

Subcommands: bifurcation, equilibrate, kinetic, closure, hmhf, sweep,
coefficients, selftest.  Exit codes: 0 success, 1 configuration or usage
error, 2 numerical failure.
"""

import argparse
import os
import sys

import numpy as np

from . import harness, kernel, kinetic, limit, maier_saupe, snapshots, sphere

__all__ = ["main", "run_cli"]


def _parser():
    p = argparse.ArgumentParser(
        prog="nemlab",
        description="numerical laboratory for orientational kinetic dynamics")
    p.add_argument("command", choices=[
        "bifurcation", "equilibrate", "kinetic", "closure", "hmhf",
        "sweep", "coefficients", "selftest"])
    p.add_argument("--config", default=None, help="experiment config file")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    return p


def _load(args):
    if args.config is not None:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.ExperimentConfig()
    updates = {}
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.out is not None:
        updates["out_dir"] = args.out
    if updates:
        from dataclasses import replace
        cfg = replace(cfg, **updates)
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg


def _branch_energy(alpha, eta):
    s = maier_saupe.s2(eta)
    z = maier_saupe.partition_function(eta)
    mean = (2.0 * s + 1.0) / 3.0          # <(m.nu)^2> = (2 s2 + 1)/3
    return eta * mean - np.log(z) + alpha / 3.0 \
        - alpha / 2.0 * (2.0 / 3.0) * s ** 2


def _cmd_bifurcation(cfg, args):
    if args.alpha is not None:
        alphas = [args.alpha]
    else:
        alphas = [5.0 + 0.5 * k for k in range(11)]
    rows = []
    for a in alphas:
        for eta in maier_saupe.solve_eta(a):
            rows.append([a, eta, maier_saupe.s2(eta), _branch_energy(a, eta)])
    snapshots.write_csv(os.path.join(cfg.out_dir, "bifurcation.csv"),
                        ["alpha", "eta", "s2", "E0"], rows)
    return 0


def _cmd_coefficients(cfg, args):
    params = maier_saupe.equilibrium_params(cfg.alpha)
    kspec = kernel.KernelSpec(a=cfg.a, d=cfg.d)
    co = limit.lambda_coefficient(params, kspec)
    snapshots.write_csv(
        os.path.join(cfg.out_dir, "coefficients.csv"),
        ["alpha", "eta", "S2", "Z", "E0", "gamma", "mu", "Lambda"],
        [[params.alpha, params.eta, params.S2, params.Z, params.E0,
          co.gamma, co.mu, co.Lambda]])
    return 0


def _cmd_equilibrate(cfg, args):
    c = kinetic.relaxed_profile(cfg.lmax, cfg.alpha)
    g = sphere.build_grid(cfg.lmax)
    q = sphere.second_moment(g, g.synthesize(c))
    s2_disc = 1.5 * q[2, 2]
    eref = kinetic.reference_bulk_energy(cfg.lmax, cfg.alpha)
    params = maier_saupe.equilibrium_params(cfg.alpha)
    snapshots.write_csv(
        os.path.join(cfg.out_dir, "equilibrate.csv"),
        ["alpha", "lmax", "S2_discrete", "S2_analytic", "E0_discrete",
         "E0_analytic"],
        [[cfg.alpha, cfg.lmax, float(s2_disc), params.S2, float(eref),
          params.E0]])
    return 0


def _write_energy_csv(path, reports):
    snapshots.write_csv(
        path,
        ["t", "bulk_excess", "doubled_term", "modulated_total",
         "dissipation", "cumulative_dissipation"],
        [[r.t, r.bulk_excess, r.doubled_term, r.modulated_total,
          r.dissipation, r.cumulative_dissipation] for r in reports])


def _cmd_kinetic(cfg, args):
    cfg.validate(for_limit=True)
    n_in = harness.default_director(cfg)
    for eps in cfg.epsilons:
        model = harness.build_model(cfg)
        f = harness.well_prepared_init(model, n_in, eps)
        reports = [kinetic.energy_report(model, f)]
        cum = 0.0
        step = 0
        stride = cfg.snapshot_stride
        if stride > 0:
            snapshots.write_density(
                os.path.join(cfg.out_dir, f"snap_{eps:g}_{step}.doqs"),
                f, cfg.d, cfg.n, cfg.lmax, 2 * cfg.lmax + 2)
        while f.t < cfg.t_final - 1e-13:
            h = min(kinetic.default_dt(model, f), cfg.t_final - f.t)
            f = kinetic.kinetic_step(model, f, h)
            step += 1
            rep = kinetic.energy_report(model, f)
            cum += 0.5 * (reports[-1].dissipation + rep.dissipation) \
                * (rep.t - reports[-1].t)
            from dataclasses import replace
            rep = replace(rep, cumulative_dissipation=cum)
            reports.append(rep)
            if stride > 0 and step % stride == 0:
                snapshots.write_density(
                    os.path.join(cfg.out_dir, f"snap_{eps:g}_{step}.doqs"),
                    f, cfg.d, cfg.n, cfg.lmax, 2 * cfg.lmax + 2)
        _write_energy_csv(
            os.path.join(cfg.out_dir, f"energy_{eps:g}.csv"), reports)
    return 0


def _cmd_closure(cfg, args):
    cfg.validate(for_limit=True)
    model = harness.build_model(cfg)
    params = maier_saupe.equilibrium_params(cfg.alpha)
    n_in = harness.default_director(cfg)
    nn = n_in[:, :, None] * n_in[:, None, :] - np.eye(3) / 3.0
    Q = params.S2 * nn
    eps = cfg.epsilons[0]
    dt = 0.1 * eps / (1.0 + 2.0 * cfg.alpha)
    rows = []
    nsteps = 10
    for k in range(nsteps):
        Qn = kinetic.q_closure_step(model, Q, dt, eps)
        rows.append([k * dt, float(np.max(np.abs(Qn - Q)) / dt)])
        Q = Qn
    snapshots.write_csv(os.path.join(cfg.out_dir, "closure.csv"),
                        ["t", "update_rate"], rows)
    return 0


def _cmd_hmhf(cfg, args):
    cfg.validate(for_limit=True)
    params = maier_saupe.equilibrium_params(cfg.alpha)
    kspec = kernel.KernelSpec(a=cfg.a, d=cfg.d)
    co = limit.lambda_coefficient(params, kspec)
    torus = kernel.make_torus(cfg.d, cfg.X, cfg.n)
    n = harness.default_director(cfg)
    dt = 0.2 * torus.h ** 2 / (co.Lambda * cfg.d)
    rows = [[0.0, limit.dirichlet_energy(n, torus)]]
    t = 0.0
    step = 0
    stride = cfg.snapshot_stride
    if stride > 0:
        snapshots.write_director(
            os.path.join(cfg.out_dir, f"snap_hmhf_{step}.doqs"),
            n, t, cfg.d, cfg.n)
    while t < cfg.t_final - 1e-13:
        h = min(dt, cfg.t_final - t)
        n = limit.hmhf_step(n, h, co.Lambda, torus)
        t += h
        step += 1
        rows.append([t, limit.dirichlet_energy(n, torus)])
        if stride > 0 and step % stride == 0:
            snapshots.write_director(
                os.path.join(cfg.out_dir, f"snap_hmhf_{step}.doqs"),
                n, t, cfg.d, cfg.n)
    snapshots.write_csv(os.path.join(cfg.out_dir, "hmhf.csv"),
                        ["t", "dirichlet_energy"], rows)
    return 0


def _cmd_sweep(cfg, args):
    report = harness.epsilon_sweep(cfg, threads=max(1, args.threads))
    rows = [[r.eps, r.sup_error, r.final_error, r.max_modulated,
             r.initial_modulated, r.total_dissipation, r.status]
            for r in report.rows]
    snapshots.write_csv(
        os.path.join(cfg.out_dir, "sweep.csv"),
        ["eps", "sup_error", "final_error", "max_modulated",
         "initial_modulated", "total_dissipation", "status"], rows)
    if any(r.status != "ok" for r in report.rows):
        return 2
    return 0


def _cmd_selftest(cfg, args):
    rng = np.random.default_rng(args.seed)
    g = sphere.build_grid(8)
    failures = []

    def check(name, value, tol):
        ok = value < tol
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (tol {tol:g})")
        if not ok:
            failures.append(name)

    f = sphere.project(g, np.exp(rng.standard_normal(g.nnodes) * 0.3))
    rr = sphere.div_rot(g, sphere.rot_grad(g, f))
    check("rot-composition", np.max(np.abs(rr - sphere.laplace_beltrami(g, f))),
          1e-10)
    h = sphere.project(g, rng.standard_normal(g.nnodes))
    ibp = sphere.integrate(g, f * sphere.laplace_beltrami(g, h)
                           - h * sphere.laplace_beltrami(g, f))
    check("integration-by-parts", abs(ibp), 1e-10)
    params = maier_saupe.equilibrium_params(cfg.alpha)
    check("self-consistency", abs(params.eta - cfg.alpha * params.S2), 1e-9)
    torus = kernel.make_torus(1, cfg.X, 32)
    kspec = kernel.KernelSpec(a=cfg.a, d=1)
    u = np.sin(2 * np.pi * torus.x[..., 0] / cfg.X)
    tv = kernel.apply_T_eps(torus, kspec, u, 0.05)
    lv = kernel.apply_L_eps(torus, kspec, u, 0.05)
    tt = sum(kernel.apply_T_eps(torus, kspec, tv[k].real, 0.05)[k]
             + 1j * kernel.apply_T_eps(torus, kspec, tv[k].imag, 0.05)[k]
             for k in range(1))
    check("multiplier-square-root", float(np.max(np.abs(tt.real - lv))), 1e-10)
    co = limit.lambda_coefficient(params, kspec)
    check("limit-coefficient-positive", -min(co.gamma, co.Lambda), 0.0 + 1e-12)
    return 1 if failures else 0


_COMMANDS = {
    "bifurcation": _cmd_bifurcation,
    "equilibrate": _cmd_equilibrate,
    "kinetic": _cmd_kinetic,
    "closure": _cmd_closure,
    "hmhf": _cmd_hmhf,
    "sweep": _cmd_sweep,
    "coefficients": _cmd_coefficients,
    "selftest": _cmd_selftest,
}


def run_cli(argv):
    """Execute one subcommand; returns the process exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        cfg = _load(args)
    except (harness.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](cfg, args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (kinetic.StabilityError, limit.SingularityError,
            maier_saupe.ClosureConvergenceError,
            maier_saupe.InfeasibleMomentError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
