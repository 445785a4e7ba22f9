"""Benchmark allocation schemes: full reuse (strongest-signal or optimized
association) and the best orthogonal (one AP per slice) split."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import convex_core
from .convex_core import ConvexProblem
from .model import NEG_INF, Pattern, Scenario
from .neighborhoods import Neighborhoods, spectral_efficiency_table
from .sparse_solver import FinalAllocation, reoptimize_with_patterns


def full_reuse_maxrsrp(s: Scenario, nb: Neighborhoods, *, tol: float = 1e-7,
                       max_newton_iters: int = 200,
                       phase1_only: bool = False) -> FinalAllocation:
    """Every serving AP transmits on the whole band; each UE is served by its
    strongest-gain AP (ties toward the lower index).  Each AP's bandwidth is
    split across its UEs by a delay-optimal convex solve, which is separable
    per AP but solved jointly here for uniform bookkeeping."""
    assoc = []
    for j in range(s.k):
        col = s.gain[:, j]
        if not np.any(col > 0):
            raise ValueError(f"UE {j} has no positive-gain AP")
        assoc.append(int(np.argmax(col)))
    active = Pattern.from_indices(sorted(set(assoc)))
    table = spectral_efficiency_table(s, nb)

    se = np.empty(s.k)
    for j, i in enumerate(assoc):
        se[j] = table[(i, j)][(active & nb.ue_nbhd[j]).mask]
    rate_map = sp.csr_matrix((se, (np.arange(s.k), np.arange(s.k))), shape=(s.k, s.k))

    groups: dict[int, list[int]] = {}
    for j, i in enumerate(assoc):
        groups.setdefault(i, []).append(j)
    g_rows, g_cols = [], []
    for row, i in enumerate(sorted(groups)):
        for j in groups[i]:
            g_rows.append(row)
            g_cols.append(j)
    ineq = sp.csr_matrix((np.ones(len(g_cols)), (g_rows, g_cols)),
                         shape=(len(groups), s.k))

    start = np.array([1.0 / (2.0 * len(groups[assoc[j]])) for j in range(s.k)])
    problem = ConvexProblem(
        num_vars=s.k, rate_map=rate_map, arrival_rates=s.arrival_rates,
        eq_mat=sp.csr_matrix((0, s.k)), eq_rhs=np.zeros(0),
        ineq_mat=ineq, ineq_rhs=np.ones(len(groups)),
        nonneg=np.ones(s.k, dtype=bool), start=start)
    res = convex_core.solve(problem, tol=tol, max_newton_iters=max_newton_iters,
                            phase1_only=phase1_only)
    if res.status == convex_core.INFEASIBLE:
        return FinalAllocation(patterns=[active], h=np.zeros(1), xbar={},
                               rates=np.zeros(s.k), utility=NEG_INF,
                               status=res.status, solve_info=res)
    xbar = {(assoc[j], j, 0): float(res.v[j]) for j in range(s.k)}
    return FinalAllocation(patterns=[active], h=np.ones(1), xbar=xbar,
                           rates=rate_map @ res.v, utility=res.utility,
                           status=res.status, solve_info=res)


def full_reuse_optimized(s: Scenario, nb: Neighborhoods, *, tol: float = 1e-7,
                         max_newton_iters: int = 200,
                         phase1_only: bool = False) -> FinalAllocation:
    """Every serving AP transmits on the whole band; associations and splits
    are optimized jointly (a UE may draw from several APs)."""
    active = Pattern.from_indices(i for i in range(s.n) if nb.ap_ues[i])
    return reoptimize_with_patterns(s, nb, [active], tol=tol,
                                    max_newton_iters=max_newton_iters,
                                    phase1_only=phase1_only)


def orthogonal_optimal(s: Scenario, nb: Neighborhoods, *, tol: float = 1e-7,
                       max_newton_iters: int = 200,
                       phase1_only: bool = False) -> FinalAllocation:
    """Each AP exclusively owns one spectrum slice; widths and associations
    are optimized jointly."""
    patterns = [Pattern.from_indices([i]) for i in range(s.n)]
    return reoptimize_with_patterns(s, nb, patterns, tol=tol,
                                    max_newton_iters=max_newton_iters,
                                    phase1_only=phase1_only)
