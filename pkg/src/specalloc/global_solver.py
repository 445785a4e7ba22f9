"""Exact spectrum allocation over all global activation patterns.

Enumerates every activation pattern over the APs that can serve somebody
(patterns that differ only on irrelevant APs are merged, since they yield
identical rates), optimizes bandwidth and association jointly, and can
post-process any feasible allocation into an equivalent one supported on at
most k+1 patterns.  Only viable up to a dozen APs; the segmented solver in
:mod:`specalloc.sparse_solver` is the scalable path.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import convex_core
from .convex_core import ConvexProblem, SolveResult, SolverError
from .model import NEG_INF, Pattern, Scenario, utility_delay
from .neighborhoods import Neighborhoods, spectral_efficiency_table, subset_patterns_ascending

log = logging.getLogger(__name__)

DEFAULT_PATTERN_CAP = 12


@dataclass
class GlobalAllocation:
    """Pattern-keyed allocation: y maps each pattern to its bandwidth share,
    x maps (pattern, ap, ue) to the bandwidth the AP spends on that UE."""

    y: dict[Pattern, float]
    x: dict[tuple[Pattern, int, int], float]
    rates: np.ndarray
    utility: float
    status: str
    solve_info: SolveResult | None = None

    def support(self, threshold: float = 1e-9) -> list[Pattern]:
        return [a for a, val in self.y.items() if val > threshold]


@dataclass
class _ExactLayout:
    patterns: list[Pattern]
    x_keys: list[tuple[int, int, int]]  # (pattern_idx, ap, ue)
    num_y: int


def build_exact_problem(s: Scenario, nb: Neighborhoods,
                        cap: int = DEFAULT_PATTERN_CAP) -> ConvexProblem:
    """Assemble the full-enumeration convex program.

    Variables are the pattern bandwidths y_A followed by the per-link
    assignments x_A^{i->j}; every pattern is a subset of the APs that appear
    in some UE neighborhood.
    """
    if s.n > cap:
        raise SolverError(
            f"{s.n} APs exceeds the exact-enumeration cap ({cap}); "
            "use the segmented sparse solver instead")
    relevant = tuple(i for i in range(s.n) if nb.ap_ues[i])
    patterns = subset_patterns_ascending(relevant)
    table = spectral_efficiency_table(s, nb)

    x_keys: list[tuple[int, int, int]] = []
    for a, pat in enumerate(patterns):
        for i in pat:
            for j in nb.ap_ues[i]:
                x_keys.append((a, i, j))
    num_y = len(patterns)
    num_vars = num_y + len(x_keys)

    r_rows, r_cols, r_data = [], [], []
    g_rows, g_cols, g_data = [], [], []
    cap_row = 0
    cap_of: dict[tuple[int, int], int] = {}
    for a, pat in enumerate(patterns):
        for i in pat:
            cap_of[(a, i)] = cap_row
            g_rows.append(cap_row)
            g_cols.append(a)
            g_data.append(-1.0)
            cap_row += 1
    for idx, (a, i, j) in enumerate(x_keys):
        col = num_y + idx
        se = table[(i, j)][(patterns[a] & nb.ue_nbhd[j]).mask]
        if se > 0.0:
            r_rows.append(j)
            r_cols.append(col)
            r_data.append(se)
        row = cap_of[(a, i)]
        g_rows.append(row)
        g_cols.append(col)
        g_data.append(1.0)

    rate_map = sp.coo_matrix((r_data, (r_rows, r_cols)), shape=(s.k, num_vars)).tocsr()
    ineq = sp.coo_matrix((g_data, (g_rows, g_cols)), shape=(cap_row, num_vars)).tocsr()
    eq = sp.csr_matrix((np.ones(num_y), (np.zeros(num_y, dtype=int), np.arange(num_y))),
                       shape=(1, num_vars))

    start = np.empty(num_vars)
    y0 = 1.0 / num_y
    start[:num_y] = y0
    for idx, (a, i, j) in enumerate(x_keys):
        start[num_y + idx] = y0 / (2.0 * len(nb.ap_ues[i]))

    return ConvexProblem(
        num_vars=num_vars,
        rate_map=rate_map,
        arrival_rates=s.arrival_rates,
        eq_mat=eq,
        eq_rhs=np.array([1.0]),
        ineq_mat=ineq,
        ineq_rhs=np.zeros(cap_row),
        nonneg=np.ones(num_vars, dtype=bool),
        start=start,
        meta=_ExactLayout(patterns=patterns, x_keys=x_keys, num_y=num_y),
    )


def solve_exact(s: Scenario, nb: Neighborhoods, *, cap: int = DEFAULT_PATTERN_CAP,
                tol: float = 1e-7, max_newton_iters: int = 200) -> GlobalAllocation:
    """Solve the full-enumeration program to optimality."""
    problem = build_exact_problem(s, nb, cap)
    res = convex_core.solve(problem, tol=tol, max_newton_iters=max_newton_iters)
    return _allocation_from_result(s, problem, res)


def _allocation_from_result(s: Scenario, problem: ConvexProblem,
                            res: SolveResult) -> GlobalAllocation:
    layout: _ExactLayout = problem.meta
    if res.status == convex_core.INFEASIBLE:
        return GlobalAllocation(y={}, x={}, rates=np.zeros(s.k), utility=NEG_INF,
                                status=res.status, solve_info=res)
    v = res.v
    y = {pat: float(v[a]) for a, pat in enumerate(layout.patterns)}
    x = {}
    for idx, (a, i, j) in enumerate(layout.x_keys):
        x[(layout.patterns[a], i, j)] = float(v[layout.num_y + idx])
    rates = problem.rate_map @ v
    return GlobalAllocation(y=y, x=x, rates=rates, utility=res.utility,
                            status=res.status, solve_info=res)


def sparsify(s: Scenario, nb: Neighborhoods, alloc: GlobalAllocation,
             support_threshold: float = 1e-12) -> GlobalAllocation:
    """Rewrite an allocation onto at most k+1 patterns with the same rates.

    Each supported pattern contributes a fixed per-unit-bandwidth rate vector
    (its x kept proportional to y), so feasible bandwidth mixes form a
    polytope {M y = b, y >= 0} with k+1 rows.  Null-space moves drive pattern
    weights to zero, preserving rates exactly, until the weights form a basic
    feasible solution.  Ties in the leaving pattern break toward the lowest
    bitmask for determinism.
    """
    if not alloc.y:
        raise SolverError("cannot sparsify an infeasible or empty allocation")
    k = s.k
    support = [pat for pat, val in sorted(alloc.y.items(), key=lambda kv: kv[0].mask)
               if val > support_threshold]
    if len(support) <= k + 1:
        return alloc

    columns = np.zeros((k + 1, len(support)))
    table = spectral_efficiency_table(s, nb)
    for c, pat in enumerate(support):
        y_val = alloc.y[pat]
        for i in pat:
            for j in nb.ap_ues[i]:
                x_val = alloc.x.get((pat, i, j), 0.0)
                if x_val:
                    se = table[(i, j)][(pat & nb.ue_nbhd[j]).mask]
                    columns[j, c] += se * x_val / y_val
        columns[k, c] = 1.0

    y_vec = np.array([alloc.y[pat] for pat in support])
    target = columns @ y_vec

    for attempt in range(2):
        y_new = _reduce_to_vertex(columns, y_vec.copy(), support)
        resid = np.abs(columns @ y_new - target)
        if float(resid.max()) <= 1e-8 * (1.0 + float(np.abs(target).max())):
            break
        # numerical drift: re-anchor the targets and retry once
        target = columns @ y_new
        y_vec = y_new
    else:
        raise SolverError("sparsification failed to preserve the rate targets")

    active = y_new > 0
    if int(active.sum()) > k + 1:
        raise SolverError("sparsification did not reach a basic solution")
    if int(active.sum()) > k:
        log.info("sparsify: support %d exceeds k=%d (within the k+1 bound)",
                 int(active.sum()), k)

    y_out: dict[Pattern, float] = {}
    x_out: dict[tuple[Pattern, int, int], float] = {}
    for c, pat in enumerate(support):
        if not active[c]:
            continue
        scale = y_new[c] / alloc.y[pat]
        y_out[pat] = float(y_new[c])
        for i in pat:
            for j in nb.ap_ues[i]:
                x_out[(pat, i, j)] = alloc.x.get((pat, i, j), 0.0) * scale
    rates = columns[:k] @ y_new
    return GlobalAllocation(y=y_out, x=x_out, rates=rates,
                            utility=utility_delay(s.arrival_rates, rates),
                            status=alloc.status, solve_info=alloc.solve_info)


def _reduce_to_vertex(columns: np.ndarray, y: np.ndarray,
                      support: list[Pattern]) -> np.ndarray:
    """Null-space pivoting until the active columns are linearly independent."""
    active = list(np.flatnonzero(y > 0))
    for _ in range(len(support) + 5):
        mat = columns[:, active]
        kernel = scipy.linalg.null_space(mat)
        if kernel.shape[1] == 0:
            break
        d = kernel[:, 0]
        if d[np.argmax(np.abs(d))] < 0:
            d = -d
        cand = []
        y_active = y[np.asarray(active)]
        for direction in (d, -d):
            dec = direction < 0
            if not np.any(dec):
                continue
            ratios = np.full(len(active), np.inf)
            ratios[dec] = y_active[dec] / -direction[dec]
            theta = float(ratios.min())
            leave_pos = min(
                (p for p in range(len(active)) if ratios[p] <= theta * (1 + 1e-12)),
                key=lambda p: support[active[p]].mask,
            )
            cand.append((support[active[leave_pos]].mask, theta, direction))
        # all moves preserve M y exactly; break ties toward the lowest leaving bitmask
        _, theta, direction = min(cand, key=lambda c: c[0])
        for pos, a in enumerate(active):
            y[a] = max(y[a] + theta * direction[pos], 0.0)
            if y[a] < 1e-14:
                y[a] = 0.0
        active = [a for a in active if y[a] > 0.0]
    return y
