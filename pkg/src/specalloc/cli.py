"""Command-line harness.

Subcommands: ``generate`` (draw a scenario file), ``solve`` (one scheme at one
load), ``sweep`` (delay-vs-load curves to CSV), ``max-throughput`` (largest
supported load scale), ``validate-queue`` (M/M/1 check of the delay model),
and ``compare`` (exact vs sparse utility gap on one instance).  All
randomness flows from the --seed flag on each subcommand.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, convex_core, global_solver, harness, queue_sim, sparse_solver
from .harness import SchemeParams, SchemeRunner
from .scenarios_io import (
    GeneratorConfig,
    generate,
    load_scenario,
    save_scenario,
    write_results,
)


def _add_scheme_args(p: argparse.ArgumentParser, with_scheme=True):
    if with_scheme:
        p.add_argument("--scheme", required=True, choices=harness.SCHEMES)
    p.add_argument("--segments", type=int, default=None,
                   help="spectrum segments for the sparse scheme (default k+1)")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="reweighting smoothing coefficient")
    p.add_argument("--tmax", type=int, default=20, help="max reweighting rounds")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    p.add_argument("--conv-tol", type=float, default=1e-5,
                   help="reweighting convergence threshold on y changes")
    p.add_argument("--neighbors", type=int, default=4,
                   help="strongest APs kept per UE when building the link set")
    p.add_argument("--solver-tol", type=float, default=1e-7)
    p.add_argument("--load-scale", type=float, default=1.0,
                   help="common multiplier on all arrival rates")
    p.add_argument("--timing", action="store_true",
                   help="record solve times in the CSV (non-reproducible column)")


def _params(args) -> SchemeParams:
    return SchemeParams(segments=args.segments, alpha=args.alpha, t_max=args.tmax,
                        seed=args.seed, conv_tol=args.conv_tol,
                        neighbors=args.neighbors, tol=args.solver_tol)


def _parse_loads(spec: str) -> list[float]:
    """Comma list ('0.1,0.2') or range 'start:stop:count' (inclusive ends)."""
    if ":" in spec:
        start, stop, count = spec.split(":")
        return [float(x) for x in np.linspace(float(start), float(stop), int(count))]
    return [float(tok) for tok in spec.split(",") if tok]


def cmd_generate(args) -> int:
    cfg = GeneratorConfig(
        n=args.n, k=args.k, seed=args.seed, area_m=args.area,
        pathloss_exp=args.pathloss_exp, shadow_sigma_db=args.shadow_sigma_db,
        macro_psd=args.macro_psd, pico_psd=args.pico_psd, noise_psd=args.noise_psd,
        bandwidth_hz=args.bandwidth_hz, packet_len_bits=args.packet_len_bits,
        arrival_rate_max=args.arrival_rate_max, edge_snr_db=args.edge_snr_db)
    s = generate(cfg)
    save_scenario(args.out, s)
    print(f"wrote scenario n={s.n} k={s.k} seed={args.seed} to {args.out}")
    return 0


def cmd_solve(args) -> int:
    s = load_scenario(args.scenario)
    runner = SchemeRunner(s, _params(args))
    run = runner.run(args.scheme, args.load_scale)
    total = float(s.arrival_rates.sum()) * args.load_scale
    delay = -run.utility / total if np.isfinite(run.utility) and total > 0 else float("inf")
    print(f"scheme={run.scheme} load_scale={run.load_scale:g} status={run.status}")
    print(f"utility={run.utility:.10g} avg_delay_s={delay:.10g} "
          f"active_patterns={run.active_patterns}")
    if args.out:
        row = {
            "scheme": run.scheme, "seed": args.seed, "n": s.n, "k": s.k,
            "segments": runner.params.segments_for(s) if args.scheme == "sparse" else "",
            "load_scale": run.load_scale, "total_arrival_pps": total,
            "utility": run.utility, "avg_delay_s": delay, "max_supported": "",
            "active_patterns": run.active_patterns,
            "solve_ms": round(run.solve_seconds * 1000.0, 3) if args.timing else "",
        }
        write_results(args.out, [row], append=args.append)
        print(f"appended results to {args.out}" if args.append else f"wrote {args.out}")
    if args.report_patterns and isinstance(run.allocation, sparse_solver.FinalAllocation):
        rep = harness.report_patterns(run.allocation)
        print(f"distinct active patterns: {rep.distinct_active}")
        for row in rep.segment_rows:
            print(f"  segment {row['segment']}: width={row['width']:.6f} "
                  f"pattern={row['pattern']}")
    return 0 if run.feasible else 3


def cmd_sweep(args) -> int:
    s = load_scenario(args.scenario)
    runner = SchemeRunner(s, _params(args))
    schemes = [tok for tok in args.schemes.split(",") if tok]
    for scheme in schemes:
        if scheme not in harness.SCHEMES:
            raise SystemExit(f"unknown scheme '{scheme}'")
    rows = harness.sweep(runner, schemes, _parse_loads(args.loads),
                         seed=args.seed, timing=args.timing, workers=args.workers)
    write_results(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_max_throughput(args) -> int:
    s = load_scenario(args.scenario)
    runner = SchemeRunner(s, _params(args))
    sigma = harness.max_throughput(runner, args.scheme, tol=args.tol)
    total = sigma * float(s.arrival_rates.sum())
    print(f"scheme={args.scheme} max_load_scale={sigma:.6g} "
          f"total_arrival_pps={total:.6g}")
    if args.out:
        row = {
            "scheme": args.scheme, "seed": args.seed, "n": s.n, "k": s.k,
            "segments": runner.params.segments_for(s) if args.scheme == "sparse" else "",
            "load_scale": sigma, "total_arrival_pps": total, "utility": "",
            "avg_delay_s": "", "max_supported": sigma, "active_patterns": "",
            "solve_ms": "",
        }
        write_results(args.out, [row], append=args.append)
    return 0


def cmd_validate_queue(args) -> int:
    result = queue_sim.simulate_mm1(args.arrival_rate, args.service_rate,
                                    args.packets, seed=args.seed)
    closed_form = 1.0 / (args.service_rate - args.arrival_rate)
    rel = abs(result.mean_sojourn_s - closed_form) / closed_form
    print(f"simulated mean sojourn: {result.mean_sojourn_s:.6g} s "
          f"(95% half-width {result.ci_half_width_s:.3g})")
    print(f"M/M/1 closed form 1/(r-lambda): {closed_form:.6g} s "
          f"(relative error {rel:.3%})")
    return 0


def cmd_compare(args) -> int:
    s = load_scenario(args.scenario)
    runner = SchemeRunner(s, _params(args))
    exact = runner.run("p0", args.load_scale)
    sparse = runner.run("sparse", args.load_scale)
    print(f"p0:     status={exact.status} utility={exact.utility:.10g}")
    print(f"sparse: status={sparse.status} utility={sparse.utility:.10g} "
          f"active_patterns={sparse.active_patterns}")
    if np.isfinite(exact.utility) and np.isfinite(sparse.utility) and exact.utility != 0:
        gap = (exact.utility - sparse.utility) / abs(exact.utility)
        print(f"relative utility gap (p0 - sparse)/|p0|: {gap:.4%}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specalloc",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"specalloc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a random scenario and save it")
    g.add_argument("--n", type=int, required=True, help="number of APs")
    g.add_argument("--k", type=int, required=True, help="number of UEs")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--area", type=float, default=500.0, help="square side, meters")
    g.add_argument("--pathloss-exp", type=float, default=3.0)
    g.add_argument("--shadow-sigma-db", type=float, default=3.0)
    g.add_argument("--macro-psd", type=float, default=5.0)
    g.add_argument("--pico-psd", type=float, default=1.0)
    g.add_argument("--noise-psd", type=float, default=1e-7)
    g.add_argument("--bandwidth-hz", type=float, default=20e6)
    g.add_argument("--packet-len-bits", type=float, default=1e6)
    g.add_argument("--arrival-rate-max", type=float, default=100.0)
    g.add_argument("--edge-snr-db", type=float, default=20.0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    so = sub.add_parser("solve", help="run one scheme at one load scale")
    so.add_argument("--scenario", required=True)
    _add_scheme_args(so)
    so.add_argument("--out", default=None, help="optional results CSV")
    so.add_argument("--append", action="store_true")
    so.add_argument("--report-patterns", action="store_true",
                    help="print per-segment pattern usage")
    so.set_defaults(fn=cmd_solve)

    sw = sub.add_parser("sweep", help="delay-vs-load curves for several schemes")
    sw.add_argument("--scenario", required=True)
    sw.add_argument("--schemes", required=True,
                    help="comma list, e.g. sparse,maxrsrp,orthogonal")
    sw.add_argument("--loads", required=True,
                    help="comma list or start:stop:count range of load scales")
    sw.add_argument("--workers", type=int, default=1)
    _add_scheme_args(sw, with_scheme=False)
    sw.add_argument("--out", required=True)
    sw.set_defaults(fn=cmd_sweep)

    mt = sub.add_parser("max-throughput", help="largest supported load scale")
    mt.add_argument("--scenario", required=True)
    _add_scheme_args(mt)
    mt.add_argument("--tol", type=float, default=1e-3,
                    help="bisection bracket width on the load scale")
    mt.add_argument("--out", default=None)
    mt.add_argument("--append", action="store_true")
    mt.set_defaults(fn=cmd_max_throughput)

    vq = sub.add_parser("validate-queue", help="simulate an M/M/1 queue and "
                        "compare against the closed-form delay")
    vq.add_argument("--arrival-rate", type=float, default=0.5)
    vq.add_argument("--service-rate", type=float, default=1.0)
    vq.add_argument("--packets", type=int, default=1_000_000)
    vq.add_argument("--seed", type=int, default=0)
    vq.set_defaults(fn=cmd_validate_queue)

    cp = sub.add_parser("compare", help="exact vs sparse utility gap")
    cp.add_argument("--scenario", required=True)
    _add_scheme_args(cp, with_scheme=False)
    cp.set_defaults(fn=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (convex_core.SolverError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
