"""fde-lab command line: simulate, verify-theorem-a, find-periodic, convergence.

Exit codes: 0 success, 2 solver failure, 3 property failure, 4 orbit search
did not converge, 5 convergence order below the floor, 64 usage/config error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels, contraction_lab, csv_io
from .config import ConfigError, load_config
from .errors import FdeLabError, PropertyFailure, SolverError, UsageError
from .mild_solver import convergence_study, solve
from .periodic_rd import (distinct_orbits, find_periodic_many, perturbed_starts, periodic_residual,
                          verify_periodicity)
from .state_space import renorm, segment_sup_norm

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_PROPERTY = 3
EXIT_NONCONVERGED = 4
EXIT_ORDER = 5
EXIT_USAGE = 64


class Reporter:
    def __init__(self, quiet):
        self.quiet = quiet
        self.lines = []

    def __call__(self, msg):
        self.lines.append(msg)
        if not self.quiet:
            print(msg)


def _prepare_out(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(cfg, out, say):
    p = cfg.build_problem()
    t0 = time.perf_counter()
    traj = solve(p, cfg.solver, cfg.experiment.t_end)
    elapsed = time.perf_counter() - t0
    out = _prepare_out(out)
    csv_io.write_trajectory(out / "trajectory.csv", traj)
    final = traj.segment(traj.t_end)
    say(f"simulate: {p.name}, tau={p.tau}, h={cfg.solver.h}, T_end={traj.t_end}")
    say(f"  final segment sup norm   {segment_sup_norm(final):.6g}")
    say(f"  final segment renorm r=1 {renorm(final, 1.0):.6g}")
    say(f"  trajectory sup           {traj.max_norm():.6g}")
    say(f"  runtime                  {elapsed:.3f} s")
    (out / "summary.txt").write_text("\n".join(say.lines) + "\n")
    return EXIT_OK


def _verify(cfg, say):
    """Run every sweep; returns list of (name, header, rows) tables.  Raises PropertyFailure."""
    exp = cfg.experiment
    p = cfg.build_problem()
    S = p.semigroup
    tau = p.tau
    k = cfg.solver.steps_per_delay(tau)
    rng = np.random.default_rng(exp.seed)
    t_grid = [f * tau for f in exp.t_factors]
    tables = []

    rows = []
    for r in exp.r_values:
        rep = contraction_lab.verify_norm_equivalence(
            r, exp.norm_samples, tau=tau, n_intervals=k, field_shape=S.field_shape,
            nodes=S.nodes, seed=exp.seed)
        rows.append((r, rep.worst_lower_margin, rep.worst_upper_margin, rep.spike_gap, rep.passed))
        say(f"norm equivalence r={r:g}: lower margin {rep.worst_lower_margin:.3g}, "
            f"upper margin {rep.worst_upper_margin:.3g}, spike gap {rep.spike_gap:.3g}")
    tables.append(("norm_equivalence.csv", ["r", "lower_margin", "upper_margin", "spike_gap", "passed"], rows))

    rows, set_rows, mnc_rows = [], [], []
    for r in exp.r_values:
        samples = contraction_lab.sample_segments(exp.samples, tau, k, S.field_shape, S.nodes, rng, r=r)
        for rep in contraction_lab.verify_L_contraction(S, r, t_grid, tau=tau, samples=samples):
            rows.append((rep.t, rep.r, rep.max_L_ratio, rep.bound, rep.margin))
            say(f"L-contraction t={rep.t:g} r={r:g}: worst ratio {rep.max_L_ratio:.6f} <= {rep.bound:.6f}")
        subset = samples[: exp.set_size]
        for t in t_grid:
            fs = contraction_lab.finite_set_contraction(subset, t, r, S)
            set_rows.append((t, r, fs.diam_before, fs.diam_after, fs.factor, fs.ratio))
            before = contraction_lab.mnc_surrogate(subset, exp.mnc_resolution, r)
            after = contraction_lab.mnc_surrogate(
                [contraction_lab.L_op(t, phi, r, S) for phi in subset], exp.mnc_resolution, r)
            mnc_rows.append((t, r, before.lower, before.upper, after.lower, after.upper, after.balls))
    tables.append(("l_contraction.csv", ["t", "r", "max_ratio", "bound", "margin"], rows))
    tables.append(("finite_sets.csv", ["t", "r", "diam_before", "diam_after", "bound_factor", "ratio"], set_rows))
    tables.append(("mnc_surrogate.csv",
                   ["t", "r", "lower_before", "upper_before", "lower_after", "upper_after", "balls"], mnc_rows))

    rows, eq_rows = [], []
    for r in exp.r_values:
        scfg = replace(cfg.solver, r=r)
        samples = contraction_lab.sample_segments(exp.decomp_samples, tau, k, S.field_shape, S.nodes, rng, r=r)
        for t in t_grid:
            rep = contraction_lab.decomposition_consistency(t, p, scfg, samples)
            limit = 2.0 * scfg.quadrature_tol
            rows.append((t, r, rep.max_L_ratio, rep.bound, rep.margin, rep.consistency_residual, limit))
            say(f"decomposition t={t:g} r={r:g}: residual {rep.consistency_residual:.3g} (limit {limit:.3g})")
            if rep.consistency_residual > limit or not rep.passed:
                raise PropertyFailure(
                    f"decomposition identity failed at t={t}, r={r}: residual "
                    f"{rep.consistency_residual:.3g} > {limit:.3g}", witness=samples[0])
        eq_samples = samples[: exp.equi_samples]
        if len(eq_samples) < exp.equi_samples:
            eq_samples = samples + contraction_lab.sample_segments(
                exp.equi_samples - len(samples), tau, k, S.field_shape, S.nodes, rng, r=r)
        for t in t_grid:
            if not exp.epsilon < t:
                continue
            eq = contraction_lab.equicontinuity_report(t, p, scfg, eq_samples, exp.epsilon)
            eq_rows.append((t, r, eq.eps, eq.delta, eq.lags_within_delta, eq.K, eq.measured_modulus,
                            eq.modulus_bound, eq.passed))
            say(f"equicontinuity t={t:g} r={r:g}: modulus {eq.measured_modulus:.3g} <= bound "
                f"{eq.modulus_bound:.3g} (K={eq.K:.3g}, delta={eq.delta:.3g})")
            if not eq.passed:
                raise PropertyFailure(
                    f"equicontinuity failed at t={t}, r={r}: modulus {eq.measured_modulus:.3g} > "
                    f"{eq.modulus_bound:.3g} or tail check failed", witness=eq_samples[0])
    tables.append(("decomposition.csv",
                   ["t", "r", "max_ratio", "bound", "margin", "consistency_residual", "limit"], rows))
    tables.append(("equicontinuity.csv",
                   ["t", "r", "epsilon", "delta", "lags", "K", "measured_modulus", "modulus_bound", "passed"], eq_rows))
    return tables


def cmd_verify_theorem_a(cfg, out, say):
    try:
        tables = _verify(cfg, say)
    except PropertyFailure as exc:
        out = _prepare_out(out)
        say(f"PROPERTY FAILURE: {exc}")
        witness = exc.witness[0] if isinstance(exc.witness, tuple) else exc.witness
        if witness is not None:
            csv_io.write_segment(out / "witness.csv", witness)
        (out / "summary.txt").write_text("\n".join(say.lines) + "\n")
        return EXIT_PROPERTY
    out = _prepare_out(out)
    for name, header, rows in tables:
        csv_io.write_rows(out / name, header, rows)
    say("verify-theorem-a: all checks passed")
    (out / "summary.txt").write_text("\n".join(say.lines) + "\n")
    return EXIT_OK


def cmd_find_periodic(cfg, out, say):
    p = cfg.build_problem()
    if p.period_omega is None:
        raise UsageError("find-periodic needs model.omega")
    exp = cfg.experiment
    starts = perturbed_starts(p.initial, exp.orbit_starts, np.random.default_rng(exp.seed))
    results = find_periodic_many(p, cfg.solver, starts, max_iters=exp.max_iters, tol=exp.tol, r=exp.orbit_r)
    res = min(results, key=lambda x: x.residual)
    check = verify_periodicity(p, cfg.solver, res.phi, exp.periodicity_tol)
    recomputed = periodic_residual(p, cfg.solver, res.phi, res.r)
    out = _prepare_out(out)
    csv_io.write_segment(out / "orbit.csv", res.phi)
    csv_io.write_rows(out / "orbit_meta.csv", ["residual", "iterations"], [(res.residual, res.iterations)])
    csv_io.write_history(out / "history.csv", res.history)
    say(f"find-periodic: method={res.method}, iterations={res.iterations}, residual={res.residual:.3g} "
        f"(recomputed {recomputed:.3g}), converged={res.converged}")
    say(f"  periodicity defect {check.defect:.3g}, passed={check.passed}")
    if len(results) > 1:
        distinct = distinct_orbits(results, tol=max(10 * exp.tol, 1e-6))
        say(f"  {len(results)} starts, {sum(x.converged for x in results)} converged, "
            f"{len(distinct)} distinct orbit(s)")
        rows = [(i, x.residual, x.iterations, x.converged) for i, x in enumerate(results)]
        csv_io.write_rows(out / "starts.csv", ["start", "residual", "iterations", "converged"], rows)
    (out / "summary.txt").write_text("\n".join(say.lines) + "\n")
    return EXIT_OK if res.converged and check.passed else EXIT_NONCONVERGED


def cmd_convergence(cfg, out, say):
    exp = cfg.experiment
    if len(exp.steps) < 3:
        raise UsageError(f"convergence needs at least 3 steps, got {len(exp.steps)}")
    p = cfg.build_problem(h=exp.steps[0])
    table = convergence_study(p, exp.steps, exp.t_end, cfg.solver)
    out = _prepare_out(out)
    csv_io.write_convergence(out / "convergence.csv", table)
    for row in table.rows:
        say(f"h={row.h:<10.6g} error={row.error:.3e} order={row.observed_order:.3f}")
    say(f"observed order {table.min_order:.3f} (floor {exp.order_floor})")
    (out / "summary.txt").write_text("\n".join(say.lines) + "\n")
    return EXIT_OK if table.min_order >= exp.order_floor else EXIT_ORDER


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-theorem-a": cmd_verify_theorem_a,
    "find-periodic": cmd_find_periodic,
    "convergence": cmd_convergence,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fde-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None, help="INI config file")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    say = Reporter(args.quiet)
    try:
        overrides = {("experiment", "seed"): args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = args.out if args.out is not None else cfg.output_dir
    say(f"[fde-lab {args.command}] kernels={_kernels.BACKEND}")
    try:
        return COMMANDS[args.command](cfg, out, say)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except PropertyFailure as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except FdeLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
