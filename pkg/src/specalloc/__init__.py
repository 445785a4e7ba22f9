"""Joint spectrum allocation and user association via sparse optimization.

A numpy/scipy library for slow-timescale spectrum planning in dense cellular
networks: an exact convex program over all activation patterns (small
networks), a segmented local-neighborhood reformulation with an iterative
reweighted-l1 sparsification loop (large networks), the standard benchmark
schemes, deterministic scenario generation, and an M/M/1 validator for the
delay model.  ``specalloc.cli`` exposes the command-line harness.
"""

from .model import (
    NEG_INF,
    Pattern,
    RateVector,
    Scenario,
    rate_global,
    spectral_efficiency,
    utility_delay,
    utility_gradient,
)
from .neighborhoods import (
    ConsistencyTriple,
    NeighborhoodTooLargeError,
    Neighborhoods,
    build_neighborhoods,
    consistency_triples,
    local_patterns,
    masked_scenario,
)
from .convex_core import (
    ConvexProblem,
    DualValues,
    SolveResult,
    SolverError,
    kkt_residual,
    solve,
)
from .global_solver import GlobalAllocation, solve_exact, sparsify
from .sparse_solver import (
    FinalAllocation,
    SegmentedAllocation,
    WeightState,
    build_segment_problem,
    extract_patterns,
    reoptimize_with_patterns,
    reweighted_l1,
    solve_with_weights,
    sparse_pipeline,
)
from .baselines import full_reuse_maxrsrp, full_reuse_optimized, orthogonal_optimal
from .scenarios_io import GeneratorConfig, generate, load_scenario, save_scenario
from .queue_sim import MM1Result, simulate_mm1
from .harness import SchemeParams, SchemeRunner, max_throughput, report_patterns, sweep

__version__ = "0.1.0"
