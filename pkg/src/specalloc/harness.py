"""Experiment orchestration: run schemes at scaled loads, trace delay curves,
search for maximum supported throughput, and summarize pattern usage.

Load sweeps scale every UE's arrival rate by a common factor sigma; a
scheme's supported throughput is the largest sigma at which it still serves
all traffic (finite delay), found by bisection on feasibility.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, convex_core, global_solver, sparse_solver
from .model import NEG_INF, Scenario
from .neighborhoods import DEFAULT_NEIGHBORHOOD_CAP, Neighborhoods, build_neighborhoods
from .scenarios_io import RESULTS_HEADER

SCHEMES = ("p0", "sparse", "maxrsrp", "full-opt", "orthogonal")


@dataclass
class SchemeParams:
    """Tunables shared by the CLI and the experiment helpers."""

    segments: int | None = None      # sparse scheme; defaults to k+1
    alpha: float = 0.05
    t_max: int = 20
    seed: int = 0
    conv_tol: float = 1e-5
    neighbors: int = 4
    cap: int = DEFAULT_NEIGHBORHOOD_CAP
    tol: float = 1e-7

    def segments_for(self, s: Scenario) -> int:
        return self.segments if self.segments is not None else s.k + 1


@dataclass
class SchemeRun:
    scheme: str
    load_scale: float
    status: str
    utility: float
    rates: np.ndarray
    active_patterns: int
    allocation: object = None
    solve_seconds: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.status != convex_core.INFEASIBLE and np.isfinite(self.utility)


class SchemeRunner:
    """Evaluates schemes on one scenario, reusing constraint structure across
    load scales (only the arrival-rate vector changes)."""

    def __init__(self, scenario: Scenario, params: SchemeParams | None = None):
        self.base = scenario
        self.params = params or SchemeParams()
        self.nb = build_neighborhoods(scenario, self.params.neighbors)
        self._exact_problem = None
        self._segment_problem = None

    def _scaled(self, load_scale: float) -> Scenario:
        return self.base.with_arrival_rates(self.base.arrival_rates * load_scale)

    def _exact(self, s: Scenario):
        if self._exact_problem is None:
            self._exact_problem = global_solver.build_exact_problem(
                s, self.nb, self.params.cap)
        return sparse_solver.swap_arrival_rates(self._exact_problem, s.arrival_rates)

    def _segmented(self, s: Scenario):
        if self._segment_problem is None:
            self._segment_problem = sparse_solver.build_segment_problem(
                s, self.nb, self.params.segments_for(s), self.params.cap)
        return sparse_solver.swap_arrival_rates(self._segment_problem, s.arrival_rates)

    def run(self, scheme: str, load_scale: float = 1.0, *,
            phase1_only: bool = False) -> SchemeRun:
        """Solve one scheme at one load.  phase1_only answers feasibility only."""
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme '{scheme}' (choose from {SCHEMES})")
        s = self._scaled(load_scale)
        p = self.params
        started = time.perf_counter()
        active = 0
        alloc: object = None

        if scheme == "p0":
            problem = self._exact(s)
            res = convex_core.solve(problem, tol=p.tol, phase1_only=phase1_only)
            alloc = global_solver._allocation_from_result(s, problem, res)
            status, utility, rates = res.status, alloc.utility, alloc.rates
            if not phase1_only and status == convex_core.OPTIMAL:
                alloc = global_solver.sparsify(s, self.nb, alloc)
                active = len(alloc.support())
        elif scheme == "sparse":
            if phase1_only:
                # the segmented relaxation bounds the pipeline's feasible loads
                res = convex_core.solve(self._segmented(s), tol=p.tol, phase1_only=True)
                if res.status == convex_core.INFEASIBLE:
                    return SchemeRun(scheme, load_scale, res.status, NEG_INF,
                                     np.zeros(s.k), 0,
                                     solve_seconds=time.perf_counter() - started)
            final, seg, _ = sparse_solver.sparse_pipeline(
                s, self.nb, p.segments_for(s), alpha=p.alpha, t_max=p.t_max,
                seed=p.seed, conv_tol=p.conv_tol, cap=p.cap, tol=p.tol,
                problem=self._segmented(s))
            alloc = final
            status, utility, rates = final.status, final.utility, final.rates
            active = final.active_pattern_count()
        else:
            fn = {"maxrsrp": baselines.full_reuse_maxrsrp,
                  "full-opt": baselines.full_reuse_optimized,
                  "orthogonal": baselines.orthogonal_optimal}[scheme]
            final = fn(s, self.nb, tol=p.tol, phase1_only=phase1_only)
            alloc = final
            status, utility, rates = final.status, final.utility, final.rates
            active = final.active_pattern_count()
        return SchemeRun(scheme=scheme, load_scale=load_scale, status=status,
                         utility=utility, rates=rates, active_patterns=active,
                         allocation=alloc,
                         solve_seconds=time.perf_counter() - started)

    def feasible(self, scheme: str, load_scale: float) -> bool:
        """Can the scheme carry the scaled load?  The sparse pipeline must
        actually produce a feasible re-optimized allocation; polytope schemes
        only need a positive phase-I slack."""
        if scheme == "sparse":
            return self.run(scheme, load_scale).feasible
        return self.run(scheme, load_scale, phase1_only=True).feasible


def max_throughput(runner: SchemeRunner, scheme: str, tol: float = 1e-3,
                   sigma_floor: float = 1e-6) -> float:
    """Largest supported load scale, by bisection on feasibility.

    Brackets by doubling/halving from 1.0, then bisects until the bracket is
    narrower than ``tol``; returns the certified-feasible end."""
    if not runner.feasible(scheme, sigma_floor):
        raise convex_core.SolverError(
            f"scheme {scheme} cannot carry even a vanishing load")
    lo = 0.0
    hi = None
    sigma = 1.0
    for _ in range(60):
        if runner.feasible(scheme, sigma):
            lo = sigma
            sigma *= 2.0
        else:
            hi = sigma
            break
    if hi is None:
        raise convex_core.SolverError("load bracket did not close; traffic looks unbounded")
    while lo == 0.0:
        sigma /= 2.0
        if sigma < sigma_floor:
            lo = sigma_floor
            break
        if runner.feasible(scheme, sigma):
            lo = sigma
        else:
            hi = sigma
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if runner.feasible(scheme, mid):
            lo = mid
        else:
            hi = mid
    return lo


def sweep(runner: SchemeRunner, schemes: list[str], load_scales: list[float], *,
          seed: int = 0, timing: bool = False, workers: int = 1) -> list[dict]:
    """Evaluate schemes across load scales; one CSV-ready row per point.

    Failed points are recorded (utility 'nan') and the sweep continues.  The
    per-scheme ``max_supported`` column carries the largest feasible scale
    seen in this sweep (the end of the delay curve)."""
    points = [(scheme, sigma) for scheme in schemes for sigma in load_scales]
    if workers > 1:
        import multiprocessing as mp

        with mp.Pool(workers) as pool:
            results = pool.starmap(_sweep_point, [(runner, s, g) for s, g in points])
    else:
        results = [_sweep_point(runner, scheme, sigma) for scheme, sigma in points]

    best: dict[str, float] = {}
    for run in results:
        if run is not None and run.feasible:
            best[run.scheme] = max(best.get(run.scheme, 0.0), run.load_scale)

    total_lam = float(runner.base.arrival_rates.sum())
    rows = []
    for (scheme, sigma), run in zip(points, results):
        row = {
            "scheme": scheme,
            "seed": seed,
            "n": runner.base.n,
            "k": runner.base.k,
            "segments": runner.params.segments_for(runner.base) if scheme == "sparse" else "",
            "load_scale": sigma,
            "total_arrival_pps": sigma * total_lam,
            "max_supported": best.get(scheme, ""),
            "solve_ms": "",
        }
        if run is None:
            row.update({"utility": "nan", "avg_delay_s": "nan", "active_patterns": ""})
        else:
            scaled_total = sigma * total_lam
            delay = (-run.utility / scaled_total
                     if np.isfinite(run.utility) and scaled_total > 0 else float("inf"))
            row.update({
                "utility": run.utility,
                "avg_delay_s": delay,
                "active_patterns": run.active_patterns,
            })
            if timing:
                row["solve_ms"] = round(run.solve_seconds * 1000.0, 3)
        rows.append(row)
    rows.sort(key=lambda r: (r["scheme"], r["load_scale"]))
    return rows


def _sweep_point(runner: SchemeRunner, scheme: str, sigma: float):
    try:
        return runner.run(scheme, sigma)
    except Exception:
        return None


@dataclass
class PatternReport:
    """Pattern usage summary of a final allocation."""

    distinct_active: int
    segment_rows: list[dict] = field(default_factory=list)
    ue_rows: list[dict] = field(default_factory=list)


def report_patterns(final: sparse_solver.FinalAllocation,
                    width_threshold: float = 1e-9) -> PatternReport:
    """Count distinct nonempty patterns over carrying segments and lay out the
    per-UE spectrum grid (who serves whom on which slice, with how much)."""
    segment_rows = []
    for l, (pat, width) in enumerate(zip(final.patterns, final.h)):
        segment_rows.append({
            "segment": l,
            "width": float(width),
            "pattern": "+".join(str(i) for i in pat) if pat else "idle",
        })
    ue_rows = []
    for (i, j, l), x in sorted(final.xbar.items(), key=lambda kv: (kv[0][1], kv[0][2], kv[0][0])):
        if x > width_threshold:
            ue_rows.append({"ue": j, "segment": l, "ap": i, "bandwidth": float(x)})
    return PatternReport(
        distinct_active=final.active_pattern_count(width_threshold),
        segment_rows=segment_rows,
        ue_rows=ue_rows,
    )
