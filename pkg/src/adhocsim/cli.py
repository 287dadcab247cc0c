"""Command-line interface.

Exit codes: 0 on success, 1 when a verified invariant failed, 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment, verification
from .engine import throughput_summary
from .errors import ConfigurationError, GeometryError, RoutingError
from .routing import write_routes
from .scheduling import save_schedule
from .tessellation import deploy, min_cell_occupancy, save_tessellation

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


def _spec_from_args(args) -> experiment.ExperimentSpec:
    spec = experiment.load_spec(args.config, args.set)
    if args.out is not None:
        spec = replace(spec, out_dir=args.out)
    if args.workers is not None:
        spec = replace(spec, workers=args.workers)
    return spec


def cmd_deploy(args) -> int:
    dep = deploy(args.n, args.seed)
    out = Path(args.out or "deployment.txt")
    with open(out, "w") as fh:
        fh.write("# adhocsim deployment v1\n")
        fh.write(f"n {dep.n}\nseed {dep.seed}\n")
        for i, v in enumerate(dep.nodes):
            fh.write(f"p {i} {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
    print(f"wrote {dep.n} nodes to {out}")
    return EXIT_OK


def cmd_tessellate(args) -> int:
    spec = _spec_from_args(args)
    dep, tess = experiment.prepare_instance(
        args.n, args.seed, spec.area_constant, spec.on_empty_cell, spec.max_redeploys
    )
    out = Path(args.out or "tessellation.txt")
    save_tessellation(tess, out)
    sched = experiment.make_schedule(spec, tess, args.n, args.seed)
    save_schedule(sched, out.with_suffix(".schedule.txt"))
    print(
        f"n={args.n} rho_n={tess.rho_n:.6f} cells={tess.num_cells} K={sched.num_colors} "
        f"min_occupancy={min_cell_occupancy(tess, dep)} -> {out}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    res = experiment.run_point(spec, args.n, args.seed)
    summary = throughput_summary(res.metrics)
    print(
        f"n={args.n} seed={args.seed} rho_n={res.rho_n:.6f} cells={res.num_cells} "
        f"K={res.schedule_length}"
    )
    print(
        f"lambda_n={res.metrics.lambda_realized:.6g} Lambda_n={res.metrics.throughput:.6g} "
        f"delivered={int(res.metrics.delivered.sum())}/{int(res.metrics.injected.sum())}"
    )
    print(f"injection ceiling 1/(Q*K)={summary.injection_ceiling:.6g}")
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    experiment.write_resolved_config(spec, out / "config.resolved.ini")
    single = replace(spec, n_values=(args.n,), seeds=(args.seed,))
    ok = experiment.run_sweep(single)
    if spec.engine.trace and res.metrics.trace:
        with open(out / "trace.csv", "w") as fh:
            fh.write("# schema=trace_v1\nslot,cell,tx_node,rx_node,sinr,outcome\n")
            for row in res.metrics.trace:
                fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]},{row[4]!r},{row[5]}\n")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    experiment.write_resolved_config(spec, out / "config.resolved.ini")
    ok = experiment.run_sweep(spec)
    print(f"sweep outputs in {out} ({'ok' if ok else 'INVARIANT FAILURE'})")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    res = experiment.run_point(spec, args.n, args.seed)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res.report.write_csv(out / "verification.csv")
    res.report.write_text(out / "verification.txt")
    write_routes(res.routes, out / "routes.txt")
    for check_id in sorted({r.check_id for r in res.report.records}):
        rate = res.report.pass_rate(check_id)
        print(f"{check_id}: pass rate {rate:.3f}")
    if res.metrics.hop_samples:
        gammas = [s.gamma for ss in res.metrics.hop_samples.values() for s in ss]
        print(
            f"realized per-hop SINR: min={min(gammas):.4g} "
            f"median={sorted(gammas)[len(gammas) // 2]:.4g}"
        )
    ok = res.hard_invariants_ok
    print("hard invariants:", "ok" if ok else "FAILED")
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_bounds(args) -> int:
    bounds = verification.compute_bounds(
        eps1=args.eps1, eps2=args.eps2, alpha=args.alpha, c1=args.c1,
        phi_of_beta0=args.phi_beta0,
    )
    print(f"t0={bounds.t0!r}")
    print(f"m0={bounds.m0!r} (straight-line), m0_arbitrary={bounds.m0_arbitrary!r}")
    print(f"beta0={bounds.beta0!r} beta1={bounds.beta1!r}")
    if bounds.c0 is not None:
        print(f"c0={bounds.c0!r}")
    if args.phi_beta0 is not None and args.rho_n is not None:
        report = verification.throughput_ceilings(
            args.rho_n, int(args.c1) + 1, args.injection_rate, args.phi_beta0, n=args.n
        )
        print(f"lambda_bound={report.lambda_bound!r}")
        if report.occupancy_ceiling is not None:
            print(f"occupancy_ceiling={report.occupancy_ceiling!r}")
            print(f"conservative_ceiling={report.conservative_ceiling!r}")
    return EXIT_OK


def cmd_appendix(args) -> int:
    report = experiment.verify_appendix(seed=args.seed, pairs=args.pairs)
    for rec in report.records:
        status = "PASS" if rec.passed else "FAIL"
        print(f"{status} {rec.check_id}: lhs={rec.lhs!r} rhs={rec.rhs!r} {rec.detail}")
    return EXIT_OK if report.passed else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adhocsim",
        description="Packet-level simulator of multi-hop ad hoc networks on the "
        "unit sphere, with claim-verification tooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_n=True):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--set", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="config override")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=None)
        if needs_n:
            p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("deploy", help="write a uniform node deployment")
    common(p)
    p.set_defaults(func=cmd_deploy)

    p = sub.add_parser("tessellate", help="build and export a certified tessellation")
    common(p)
    p.set_defaults(func=cmd_tessellate)

    p = sub.add_parser("simulate", help="run one simulation point")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run the configured n/seed grid")
    common(p, needs_n=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the claim checkers on one point")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bounds", help="closed-form bound calculator")
    p.add_argument("--eps1", type=float, default=verification.DEFAULT_EPS)
    p.add_argument("--eps2", type=float, default=verification.DEFAULT_EPS)
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--c1", type=float, required=True, help="measured K - 1")
    p.add_argument("--phi-beta0", type=float, default=None)
    p.add_argument("--rho-n", type=float, default=None)
    p.add_argument("--injection-rate", type=float, default=1.0)
    p.add_argument("--n", type=int, default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("appendix", help="closed-form Monte Carlo checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=int, default=1_000_000)
    p.set_defaults(func=cmd_appendix)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, GeometryError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RoutingError as exc:
        print(f"routing failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
