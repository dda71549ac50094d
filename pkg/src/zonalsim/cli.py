"""Command line entry point: ``zonalsim <suite> --config <path> [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import dataclasses
import glob
import os
import sys

import numpy as np

from . import io as zio
from .averaging import (
    assemble_operator, integrate_limit_equation, transformed_variable, zonal_time_average, LimitConfig,
)
from .blowup import (
    BlowupConfig, example1_oracle, example2_oracle, fit_exponent, oracle_agreement,
    run_example1, run_example2,
)
from .config import SUITES, RunConfig, parse_config
from .dynamics import IntegratorConfig, LinearPropagator, integrate, stable_dt
from .errors import BlowupDetected, ConfigError, ZonalSimError
from .fields import Grid, Params, State, hk_norm, l2_norm, random_state
from .geometry import parse_profile, validate_surface
from .kernel import (
    build_kernel_state, kernel_distance_report, project_kernel, random_zonal_profile,
)
from .operators import (
    apply_L, commutator_defect, commutator_remainder, coriolis_perturbed, parse_coriolis,
    verify_operators,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class Context:
    def __init__(self, cfg: RunConfig, out: str):
        self.cfg = cfg
        self.out = out
        self.hash = cfg.hash()
        self._grid = None

    @property
    def grid(self) -> Grid:
        if self._grid is None:
            self._grid = Grid(parse_profile(self.cfg.surface, self.cfg.k + 1), self.cfg.N1, self.cfg.N2)
        return self._grid

    @property
    def params(self) -> Params:
        return Params(self.cfg.eps, self.cfg.delta)

    def path(self, *parts) -> str:
        p = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        return p

    def csv(self, name, columns, rows, units=None):
        zio.write_csv(self.path(name), columns, rows, units, self.hash)

    def text(self, name, lines):
        zio.atomic_write(self.path(name), ("\n".join(lines) + "\n").encode())


def initial_state(cfg: RunConfig, grid: Grid, params: Params, cor) -> State:
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "zero":
        return State.zeros(grid, params)
    if cfg.init == "kernel":
        Phi = random_zonal_profile(grid, rng, min(cfg.degree, grid.N2 // 3)) * cfg.amplitude
        return build_kernel_state(Phi, params, cor)
    return random_state(grid, params, rng, cfg.degree, cfg.amplitude)


# ---------------------------------------------------------------------------
# suites


def suite_verify_operators(ctx: Context) -> int:
    cfg, grid = ctx.cfg, ctx.grid
    report = validate_surface(grid.profile, cfg.k)
    ctx.text("surface.txt", [report.to_text()])
    cor = parse_coriolis(cfg.coriolis, grid)
    rows = verify_operators(grid, cor, ctx.params, seed=cfg.seed, n_fields=cfg.n_fields)
    ctx.csv("identities.csv", ["identity", "measured", "tolerance", "passed"],
            [(r.name, r.measured, r.tolerance, r.passed) for r in rows],
            {"measured": "relative", "tolerance": "relative"})

    scan = []
    rng = np.random.default_rng(cfg.seed)
    base = random_state(grid, Params(1.0, 1.0), rng, max(4, grid.N2 // 4))
    p0 = Params(cfg.perturb_eps, cfg.perturb_eps)
    for e in cfg.eps_scan:
        s = base.with_params(Params(e, e))
        pert = coriolis_perturbed(grid, e)
        scan.append({
            "eps": e,
            "defect": commutator_defect(s, cor, k=cfg.k),
            "remainder": commutator_remainder(s.u, cor, k=cfg.k),
            "perturbed_defect": commutator_defect(base.with_params(p0), pert, k=cfg.k),
            "perturbed_remainder": commutator_remainder(s.u, pert, k=cfg.k),
            "defect_field_norm": pert.defect_norm(cfg.k),
        })
    cols = list(scan[0])
    ctx.csv("commutator.csv", cols, scan, {c: ("1" if c == "eps" else "relative") for c in cols})
    if len(scan) >= 2:
        le = np.log([r["eps"] for r in scan])
        slope = np.polyfit(le, np.log([r["perturbed_defect"] for r in scan]), 1)[0]
        slope_r = np.polyfit(le, np.log([r["perturbed_remainder"] for r in scan]), 1)[0]
        ctx.csv("commutator_slopes.csv", ["quantity", "slope"],
                [("perturbed_defect", slope), ("perturbed_remainder", slope_r)], {"slope": "1"})
    failed = [r for r in rows if not r.passed]
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name:<24s} {r.measured:.3e} (tol {r.tolerance:.0e})" for r in rows]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return EXIT_FAIL if failed else EXIT_OK


def suite_verify_kernel(ctx: Context) -> int:
    cfg, grid, params = ctx.cfg, ctx.grid, ctx.params
    cor = parse_coriolis(cfg.coriolis, grid)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    worst_idem = worst_range = 0.0
    for i in range(cfg.n_states):
        s = random_state(grid, params, rng, cfg.degree)
        P = project_kernel(s, cor)
        idem = l2_norm(project_kernel(P, cor) - P) / max(l2_norm(P), 1e-300)
        rng_def = l2_norm(apply_L(P, cor)) / max(hk_norm(P, 1), 1e-300)
        rep = kernel_distance_report(s, cor, k=max(1, cfg.k - 2))
        worst_idem, worst_range = max(worst_idem, idem), max(worst_range, rng_def)
        rows.append({"draw": i, "idempotence": idem, "range_defect": rng_def,
                     "ratio": rep.ratio, "inc_ratio": rep.inc_ratio, "inconsistent": rep.inconsistent})
    ctx.csv("kernel.csv", list(rows[0]), rows, {"draw": "1"})
    ok = worst_idem <= 1e-9 and worst_range <= 1e-7 and not any(r["inconsistent"] for r in rows)
    lines = [f"idempotence max {worst_idem:.3e}", f"range defect max {worst_range:.3e}",
             f"max distance ratio {max(r['ratio'] for r in rows):.4g}", "PASS" if ok else "FAIL"]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _integrator(cfg: RunConfig, grid, cor, params) -> IntegratorConfig:
    dt = cfg.dt
    if dt is None:
        dt = stable_dt(grid, cor, params, 0.5 * cfg.safety) if cfg.scheme == "RK4" else 2e-3
    return IntegratorConfig(dt=dt, t_end=cfg.t_end, scheme=cfg.scheme, stride=cfg.stride,
                            safety=cfg.safety, ceiling=cfg.ceiling, norm_orders=(0, cfg.k))


def _simulate(ctx: Context):
    cfg, grid, params = ctx.cfg, ctx.grid, ctx.params
    cor = parse_coriolis(cfg.coriolis, grid)
    s0 = initial_state(cfg, grid, params, cor)
    icfg = _integrator(cfg, grid, cor, params)
    try:
        traj = integrate(s0, cor, icfg)
        status = EXIT_OK
    except BlowupDetected as exc:
        traj = exc.trajectory
        status = EXIT_BLOWUP
    return traj, status, cor


def _write_trajectory(ctx: Context, traj) -> None:
    cols = ["t", "h_mean", "energy"] + [f"H{k}" for k in sorted(traj.norms)]
    ctx.csv("diagnostics.csv", cols, traj.diagnostics_table().tolist(),
            {"t": "time", "h_mean": "length", "energy": "L2^2", **{c: "norm" for c in cols[3:]}})
    meta = {"surface": ctx.cfg.surface, "coriolis": ctx.cfg.coriolis}
    for i, (t, s) in enumerate(zip(traj.times, traj.states)):
        zio.write_snapshot(ctx.path("snapshots", f"snap_{i:05d}.bin"), s, t, meta)
    if traj.states:
        zio.write_zonal_means(ctx.path("zonal_means.csv"), traj.states[-1], ctx.hash)


def suite_simulate(ctx: Context) -> int:
    traj, status, _ = _simulate(ctx)
    _write_trajectory(ctx, traj)
    k = ctx.cfg.k
    lines = [f"status {traj.status}", f"steps recorded {len(traj.diag_t)}",
             f"max H{k} {traj.max_norm(k):.6g}",
             f"h-mean drift {abs(traj.h_mean[-1] - traj.h_mean[0]):.3e}"]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return status


def _load_trajectory(ctx: Context):
    files = sorted(glob.glob(os.path.join(ctx.cfg.trajectory_dir, "*.bin")))
    grid = None
    times, states = [], []
    for f in files:
        s, t, meta = zio.read_snapshot(f, grid)
        grid = s.grid
        times.append(t)
        states.append(s)
    return times, states


def suite_average(ctx: Context) -> int:
    cfg = ctx.cfg
    if cfg.trajectory_dir:
        times, states = _load_trajectory(ctx)
        cor = parse_coriolis(cfg.coriolis, states[0].grid) if states else None
        status = EXIT_OK
    else:
        traj, status, cor = _simulate(ctx)
        times, states = traj.times, traj.states
    rep = zonal_time_average(times, states, cor, cfg.average_T, cfg.k)
    d = rep.as_dict()
    ctx.csv("time_average.csv", list(d), [d], {"T": "time", "eps": "1"})
    lines = [f"{k} {v:.6g}" for k, v in d.items()]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return status


def limit_scan(cfg: RunConfig, seed: int):
    """Distance between ``exp(tL) s(t)`` and the limit solution over ``delta_scan``."""
    grid = Grid(parse_profile(cfg.surface, cfg.k + 1), cfg.coarse_N1, cfg.coarse_N2)
    cor = parse_coriolis(cfg.coriolis, grid)
    mu = cfg.mu_value
    ref = Params(1.0 / mu, 1.0)
    M = assemble_operator("L", grid, ref, cor)
    rng = np.random.default_rng(seed)
    s0 = random_state(grid, ref, rng, min(cfg.degree, grid.N2 // 2), cfg.amplitude)
    lim = integrate_limit_equation(s0, M, LimitConfig(cfg.limit_dt, cfg.limit_t, cfg.ell, cfg.n_samples))
    Vbar = lim.states[-1]
    kp = max(cfg.k - 1, 1)
    rows = []
    for d in cfg.delta_scan:
        params = Params(d / mu, d)
        s = s0.with_params(params)
        dt = min(cfg.limit_dt, 0.25 * d) / 2
        n = max(1, int(np.ceil(cfg.limit_t / dt)))
        icfg = IntegratorConfig(dt=cfg.limit_t / n, t_end=cfg.limit_t, scheme="IMEX", stride=n,
                                norm_orders=(0,))
        traj = integrate(s, cor, icfg, LinearPropagator(grid, cor, params))
        V = transformed_variable(traj.states[-1], cfg.limit_t, M)
        diff = V - Vbar.with_params(params)
        rows.append({"seed": seed, "delta": d, "eps": d / mu, "mu": mu, "t": cfg.limit_t,
                     "dist_L2": l2_norm(diff), f"dist_H{kp}": hk_norm(diff, kp),
                     "limit_norm": l2_norm(Vbar), "mean_correction_max": max(lim.mean_corrections, default=0.0),
                     "window_residual_max": max(lim.residuals, default=0.0)})
    return rows


def suite_limit(ctx: Context) -> int:
    rows = limit_scan(ctx.cfg, ctx.cfg.seed)
    ctx.csv("limit.csv", list(rows[0]), rows, {"t": "time", "delta": "1", "eps": "1", "mu": "1"})
    lines = [f"delta={r['delta']:g} dist_L2={r['dist_L2']:.4e}" for r in rows]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return EXIT_OK


def suite_blowup(ctx: Context) -> int:
    cfg = ctx.cfg
    rows, fits = [], []
    for ex, oracle in ((1, example1_oracle), (2, example2_oracle)):
        ts = []
        for e in cfg.blowup_eps:
            o = oracle(e)
            ts.append(o.t_blow)
            rows.append({"example": ex, "eps": e, "t_blow": o.t_blow, "method": "oracle",
                         "unresolved": int(not o.crossed), "l2_drift": 0.0, "agreement": 0.0})
            if cfg.blowup_pde and (ex == 2 or e >= 1e-2):
                if ex == 1:
                    rec = run_example1(e, cfg=BlowupConfig(N=cfg.blowup_N, dt=cfg.blowup_dt, tail_tol=1e-4))
                else:
                    rec = run_example2(e, BlowupConfig(N=8192, dt=min(cfg.blowup_dt, e / 2), tail_tol=1e-8))
                rows.append({"example": ex, "eps": e, "t_blow": rec.t_blow, "method": "pde",
                             "unresolved": int(rec.unresolved),
                             "l2_drift": rec.drift_before(0.8 * o.t_blow),
                             "agreement": oracle_agreement(rec, o)})
        f = fit_exponent(cfg.blowup_eps, ts)
        fits.append({"example": ex, "p": f.p, "ci_low": f.ci_low, "ci_high": f.ci_high, "prefactor": f.prefactor})
    ctx.csv("blowup.csv", list(rows[0]), rows, {"eps": "1", "t_blow": "time", "l2_drift": "relative",
                                                "agreement": "relative"})
    ctx.csv("exponent.csv", list(fits[0]), fits, {"p": "1", "prefactor": "time"})
    lines = [f"example {f['example']}: p = {f['p']:.4f} [{f['ci_low']:.4f}, {f['ci_high']:.4f}]" for f in fits]
    ctx.text("report.txt", lines)
    print("\n".join(lines))
    return EXIT_OK


def suite_project(ctx: Context) -> int:
    cfg = ctx.cfg
    if not cfg.snapshot:
        raise ConfigError(["'snapshot' is required for the project suite"])
    s, t, meta = zio.read_snapshot(cfg.snapshot)
    cor = parse_coriolis(meta.get("coriolis", cfg.coriolis), s.grid)
    P = project_kernel(s, cor)
    zio.write_snapshot(ctx.path("projected.bin"), P, t, meta)
    d = kernel_distance_report(s, cor, k=max(1, cfg.k - 2)).as_dict()
    ctx.csv("distance.csv", list(d), [d], {"k": "1"})
    print("\n".join(f"{k} {v}" for k, v in d.items()))
    return EXIT_OK


SUITE_FUNCS = {
    "verify-operators": suite_verify_operators,
    "verify-kernel": suite_verify_kernel,
    "simulate": suite_simulate,
    "average": suite_average,
    "limit": suite_limit,
    "blowup": suite_blowup,
    "project": suite_project,
}


def run_suite(name: str, cfg: RunConfig, out: str | None = None) -> int:
    if name not in SUITES:
        raise ConfigError([f"unknown suite '{name}'"])
    out = out or cfg.output_dir
    if name == "all":
        status = EXIT_OK
        for sub, fn in SUITE_FUNCS.items():
            if sub == "project" and not cfg.snapshot:
                continue
            print(f"== {sub}")
            rc = fn(Context(cfg, os.path.join(out, sub)))
            status = max(status, rc)
        return status
    return SUITE_FUNCS[name](Context(cfg, out))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="zonalsim", description=__doc__)
    ap.add_argument("suite", choices=SUITES)
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    args = ap.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.suite)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        return run_suite(args.suite, cfg, args.out)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except ZonalSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
