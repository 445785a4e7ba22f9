"""Segmented local-pattern reformulation and the reweighted-l1 sparsification loop.

The spectrum is cut into ``num_segments`` slices.  Within each slice every AP
books bandwidth against local activation patterns of its interference
neighborhood (z per link and local pattern, y per neighborhood pattern), with
cross-neighborhood consistency equalities tying the books together.  Without
extra constraints the segmented program is equivalent to the exact global
one; a one-pattern-per-segment solution is forced approximately by repeatedly
solving the program under per-(AP, segment) weighted-l1 caps whose weights
are inversely proportional to the previous bandwidth shares.  Dominant local
patterns are then stitched into one global pattern per segment and the
bandwidths re-optimized with those patterns fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import convex_core
from .convex_core import ConvexProblem, SolveResult, SolverError
from .model import NEG_INF, Pattern, Scenario, utility_delay
from .neighborhoods import (
    DEFAULT_NEIGHBORHOOD_CAP,
    Neighborhoods,
    consistency_triples,
    local_patterns,
    spectral_efficiency_table,
)


@dataclass
class SegmentLayout:
    """Variable indexing for the segmented program.

    Per segment, each serving AP gets one y entry per local pattern followed
    by one z block per servable UE; the segment blocks are followed by the
    h (segment width) variables.  y entries are also tracked as one flat
    array ordered (segment, ap, pattern) for the weight machinery.
    """

    nb: Neighborhoods
    num_segments: int
    ap_list: tuple[int, ...]
    patterns: dict[int, list[Pattern]]
    pattern_pos: dict[int, dict[int, int]]
    se_rows: dict[tuple[int, int], np.ndarray]
    y_off: dict[int, int]
    z_off: dict[tuple[int, int], int]
    seg_size: int
    num_vars: int
    y_per_seg: int
    y_flat_off: dict[int, int]       # AP -> offset of its y block within a segment's y-flat slice
    y_seg_index: np.ndarray          # segment id of each y-flat entry
    consistency_rows: tuple[int, int] = (0, 0)  # row span of the consistency block in eq_mat

    @property
    def h_off(self) -> int:
        return self.num_segments * self.seg_size

    def y_index(self, i: int, b: int, l: int) -> int:
        return l * self.seg_size + self.y_off[i] + b

    def z_index(self, i: int, j: int, b: int, l: int) -> int:
        return l * self.seg_size + self.z_off[(i, j)] + b

    def h_index(self, l: int) -> int:
        return self.h_off + l

    def y_flat_index(self, i: int, b: int, l: int) -> int:
        return l * self.y_per_seg + self.y_flat_off[i] + b

    def y_var_indices(self) -> np.ndarray:
        """Variable indices of every y entry, in y-flat order."""
        idx = np.empty(self.num_segments * self.y_per_seg, dtype=np.int64)
        pos = 0
        for l in range(self.num_segments):
            for i in self.ap_list:
                p = len(self.patterns[i])
                base = self.y_index(i, 0, l)
                idx[pos:pos + p] = base + np.arange(p)
                pos += p
        return idx


def build_layout(s: Scenario, nb: Neighborhoods, num_segments: int,
                 cap: int = DEFAULT_NEIGHBORHOOD_CAP) -> SegmentLayout:
    ap_list = tuple(i for i in range(s.n) if nb.ap_ues[i])
    patterns: dict[int, list[Pattern]] = {}
    pattern_pos: dict[int, dict[int, int]] = {}
    for i in ap_list:
        pats = local_patterns(nb, i, cap)
        patterns[i] = pats
        pattern_pos[i] = {p.mask: b for b, p in enumerate(pats)}

    table = spectral_efficiency_table(s, nb)
    se_rows: dict[tuple[int, int], np.ndarray] = {}
    for i in ap_list:
        for j in nb.ap_ues[i]:
            entry = table[(i, j)]
            ue_mask = nb.ue_nbhd[j].mask
            row = np.zeros(len(patterns[i]))
            for b, pat in enumerate(patterns[i]):
                if i in pat:
                    row[b] = entry[pat.mask & ue_mask]
            se_rows[(i, j)] = row

    y_off: dict[int, int] = {}
    z_off: dict[tuple[int, int], int] = {}
    y_flat_off: dict[int, int] = {}
    pos = 0
    ypos = 0
    for i in ap_list:
        p = len(patterns[i])
        y_off[i] = pos
        y_flat_off[i] = ypos
        pos += p
        ypos += p
        for j in nb.ap_ues[i]:
            z_off[(i, j)] = pos
            pos += p
    seg_size = pos
    y_per_seg = ypos
    num_vars = num_segments * seg_size + num_segments
    y_seg_index = np.repeat(np.arange(num_segments), y_per_seg)
    return SegmentLayout(
        nb=nb, num_segments=num_segments, ap_list=ap_list, patterns=patterns,
        pattern_pos=pattern_pos, se_rows=se_rows, y_off=y_off, z_off=z_off,
        seg_size=seg_size, num_vars=num_vars, y_per_seg=y_per_seg,
        y_flat_off=y_flat_off, y_seg_index=y_seg_index,
    )


def build_segment_problem(s: Scenario, nb: Neighborhoods, num_segments: int,
                          cap: int = DEFAULT_NEIGHBORHOOD_CAP) -> ConvexProblem:
    """Assemble the segmented program (no sparsity constraint yet).

    Equalities: per-(AP, pattern, segment) coupling of y to its z sum, the
    consistency equalities for every overlap triple and segment, and the unit
    total of segment widths.  Inequalities: per-(AP, segment) capacity.
    """
    layout = build_layout(s, nb, num_segments, cap)
    L = num_segments
    nv = layout.num_vars

    eq_rows, eq_cols, eq_data = [], [], []
    row = 0
    # y = sum_j z, one row per y entry, ordered like the flat y array
    for l in range(L):
        for i in layout.ap_list:
            p = len(layout.patterns[i])
            rows = np.arange(row, row + p)
            eq_rows.append(rows)
            eq_cols.append(layout.y_index(i, 0, l) + np.arange(p))
            eq_data.append(np.ones(p))
            for j in layout.nb.ap_ues[i]:
                eq_rows.append(rows)
                eq_cols.append(layout.z_index(i, j, 0, l) + np.arange(p))
                eq_data.append(-np.ones(p))
            row += p

    triples = consistency_triples(nb)
    triple_sides = []
    for tr in triples:
        side_i = [b for b, pat in enumerate(layout.patterns[tr.i])
                  if pat.mask & nb.ap_nbhd[tr.m].mask == tr.overlap.mask]
        side_m = [b for b, pat in enumerate(layout.patterns[tr.m])
                  if pat.mask & nb.ap_nbhd[tr.i].mask == tr.overlap.mask]
        triple_sides.append((np.array(side_i, dtype=int), np.array(side_m, dtype=int)))
    consistency_row0 = row
    for l in range(L):
        for tr, (side_i, side_m) in zip(triples, triple_sides):
            eq_rows.append(np.full(side_i.size, row))
            eq_cols.append(layout.y_index(tr.i, 0, l) + side_i)
            eq_data.append(np.ones(side_i.size))
            eq_rows.append(np.full(side_m.size, row))
            eq_cols.append(layout.y_index(tr.m, 0, l) + side_m)
            eq_data.append(-np.ones(side_m.size))
            row += 1

    eq_rows.append(np.full(L, row))
    eq_cols.append(layout.h_off + np.arange(L))
    eq_data.append(np.ones(L))
    row += 1

    eq = sp.coo_matrix(
        (np.concatenate(eq_data), (np.concatenate(eq_rows), np.concatenate(eq_cols))),
        shape=(row, nv)).tocsr()
    eq_rhs = np.zeros(row)
    eq_rhs[-1] = 1.0

    gi_rows, gi_cols, gi_data = [], [], []
    grow = 0
    for l in range(L):
        for i in layout.ap_list:
            p = len(layout.patterns[i])
            gi_rows.append(np.full(p, grow))
            gi_cols.append(layout.y_index(i, 0, l) + np.arange(p))
            gi_data.append(np.ones(p))
            gi_rows.append(np.array([grow]))
            gi_cols.append(np.array([layout.h_index(l)]))
            gi_data.append(np.array([-1.0]))
            grow += 1
    ineq = sp.coo_matrix(
        (np.concatenate(gi_data), (np.concatenate(gi_rows), np.concatenate(gi_cols))),
        shape=(grow, nv)).tocsr()

    r_rows, r_cols, r_data = [], [], []
    for l in range(L):
        for i in layout.ap_list:
            for j in layout.nb.ap_ues[i]:
                se = layout.se_rows[(i, j)]
                nz = np.flatnonzero(se)
                r_rows.append(np.full(nz.size, j))
                r_cols.append(layout.z_index(i, j, 0, l) + nz)
                r_data.append(se[nz])
    rate_map = sp.coo_matrix(
        (np.concatenate(r_data), (np.concatenate(r_rows), np.concatenate(r_cols))),
        shape=(s.k, nv)).tocsr()

    nonneg = np.zeros(nv, dtype=bool)
    start = np.zeros(nv)
    h0 = 1.0 / L
    for l in range(L):
        for i in layout.ap_list:
            p = len(layout.patterns[i])
            nserved = len(layout.nb.ap_ues[i])
            z0 = h0 / (2.0 * nserved * p)
            y_base = layout.y_index(i, 0, l)
            start[y_base:y_base + p] = h0 / (2.0 * p)
            for j in layout.nb.ap_ues[i]:
                z_base = layout.z_index(i, j, 0, l)
                start[z_base:z_base + p] = z0
                nonneg[z_base:z_base + p] = True
    start[layout.h_off:] = h0
    nonneg[layout.h_off:] = True

    layout.consistency_rows = (consistency_row0, consistency_row0 + L * len(triples))
    return ConvexProblem(
        num_vars=nv, rate_map=rate_map, arrival_rates=s.arrival_rates,
        eq_mat=eq, eq_rhs=eq_rhs, ineq_mat=ineq, ineq_rhs=np.zeros(grow),
        nonneg=nonneg, start=start, meta=layout)


@dataclass
class WeightState:
    """Per-(AP, local pattern, segment) weights of the l1 surrogate."""

    w_flat: np.ndarray
    alpha: float
    rng_seed: int
    iteration: int = 0
    layout: SegmentLayout | None = None

    def value(self, i: int, pattern: Pattern, l: int) -> float:
        b = self.layout.pattern_pos[i][pattern.mask]
        return float(self.w_flat[self.layout.y_flat_index(i, b, l)])

    def as_map(self) -> dict[tuple[int, Pattern, int], float]:
        out = {}
        lay = self.layout
        for l in range(lay.num_segments):
            for i in lay.ap_list:
                for b, pat in enumerate(lay.patterns[i]):
                    out[(i, pat, l)] = float(self.w_flat[lay.y_flat_index(i, b, l)])
        return out


@dataclass
class SegmentedAllocation:
    """Solution of the segmented program.

    y and z live in flat arrays aligned with the layout; use ``y_value`` /
    ``z_value`` or the ``*_map`` builders for keyed access.
    """

    layout: SegmentLayout
    v: np.ndarray
    h: np.ndarray
    rates: np.ndarray
    utility: float
    status: str
    consistency_residual: float
    solve_info: SolveResult | None = None

    @property
    def num_segments(self) -> int:
        return self.layout.num_segments

    def y_flat(self) -> np.ndarray:
        return self.v[self.layout.y_var_indices()]

    def y_value(self, i: int, pattern: Pattern, l: int) -> float:
        b = self.layout.pattern_pos[i][pattern.mask]
        return float(self.v[self.layout.y_index(i, b, l)])

    def z_value(self, i: int, j: int, pattern: Pattern, l: int) -> float:
        b = self.layout.pattern_pos[i][pattern.mask]
        return float(self.v[self.layout.z_index(i, j, b, l)])

    def y_map(self) -> dict[tuple[int, Pattern, int], float]:
        lay = self.layout
        return {
            (i, pat, l): float(self.v[lay.y_index(i, b, l)])
            for l in range(lay.num_segments)
            for i in lay.ap_list
            for b, pat in enumerate(lay.patterns[i])
        }

    def z_map(self) -> dict[tuple[int, int, Pattern, int], float]:
        lay = self.layout
        return {
            (i, j, pat, l): float(self.v[lay.z_index(i, j, b, l)])
            for l in range(lay.num_segments)
            for i in lay.ap_list
            for j in lay.nb.ap_ues[i]
            for b, pat in enumerate(lay.patterns[i])
        }


def initial_weights(problem: ConvexProblem, alpha: float, seed: int) -> WeightState:
    """Uniformly random weights in (0, 1), reproducible from the seed (PCG64)."""
    layout: SegmentLayout = problem.meta
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.0, 1.0, layout.num_segments * layout.y_per_seg)
    w = np.maximum(w, 1e-12)
    return WeightState(w_flat=w, alpha=alpha, rng_seed=seed, layout=layout)


def solve_with_weights(problem: ConvexProblem, weights: WeightState, *,
                       tol: float = 1e-7, max_newton_iters: int = 200,
                       warm_start_v: np.ndarray | None = None,
                       initial_barrier_weight: float = 1.0) -> SegmentedAllocation:
    """Solve the segmented program with one weighted-l1 cap per (AP, segment):
    sum_B w_B y_B <= 1."""
    layout: SegmentLayout = problem.meta
    L = layout.num_segments
    napl = len(layout.ap_list)
    y_idx = layout.y_var_indices()

    g_rows, g_cols, g_data = [], [], []
    row = 0
    pos = 0
    for l in range(L):
        for i in layout.ap_list:
            p = len(layout.patterns[i])
            g_rows.append(np.full(p, row))
            g_cols.append(y_idx[pos:pos + p])
            g_data.append(weights.w_flat[pos:pos + p])
            pos += p
            row += 1
    wmat = sp.coo_matrix(
        (np.concatenate(g_data), (np.concatenate(g_rows), np.concatenate(g_cols))),
        shape=(row, problem.num_vars)).tocsr()

    ineq = sp.vstack([problem.ineq_mat, wmat], format="csr")
    ineq_rhs = np.concatenate([problem.ineq_rhs, np.ones(row)])

    start = problem.start.copy()
    load = wmat @ start
    worst = float(load.max()) if load.size else 0.0
    if worst >= 0.5:
        start[: layout.h_off] *= 0.45 / worst

    augmented = ConvexProblem(
        num_vars=problem.num_vars, rate_map=problem.rate_map,
        arrival_rates=problem.arrival_rates, eq_mat=problem.eq_mat,
        eq_rhs=problem.eq_rhs, ineq_mat=ineq, ineq_rhs=ineq_rhs,
        nonneg=problem.nonneg, start=start, meta=layout)
    res = convex_core.solve(augmented, tol=tol, max_newton_iters=max_newton_iters,
                            warm_start_v=warm_start_v,
                            initial_barrier_weight=initial_barrier_weight)
    return _segmented_from_result(problem, res)


def solve_unweighted(problem: ConvexProblem, *, tol: float = 1e-7,
                     max_newton_iters: int = 200) -> SegmentedAllocation:
    """Solve the segmented program itself (equivalence checks, diagnostics)."""
    res = convex_core.solve(problem, tol=tol, max_newton_iters=max_newton_iters)
    return _segmented_from_result(problem, res)


def _segmented_from_result(problem: ConvexProblem, res: SolveResult) -> SegmentedAllocation:
    layout: SegmentLayout = problem.meta
    v = res.v
    lo, hi = layout.consistency_rows
    if res.status == convex_core.INFEASIBLE:
        return SegmentedAllocation(
            layout=layout, v=v, h=np.zeros(layout.num_segments),
            rates=np.zeros(problem.rate_map.shape[0]), utility=NEG_INF,
            status=res.status, consistency_residual=float("nan"), solve_info=res)
    cres = 0.0
    if hi > lo:
        cres = float(np.abs((problem.eq_mat @ v)[lo:hi]).max())
    return SegmentedAllocation(
        layout=layout, v=v,
        h=v[layout.h_off:layout.h_off + layout.num_segments].copy(),
        rates=problem.rate_map @ v, utility=res.utility, status=res.status,
        consistency_residual=cres, solve_info=res)


def reweighted_l1(s: Scenario, nb: Neighborhoods, num_segments: int, *,
                  alpha: float = 0.05, t_max: int = 20, seed: int = 0,
                  conv_tol: float = 1e-5, cap: int = DEFAULT_NEIGHBORHOOD_CAP,
                  tol: float = 1e-7, max_newton_iters: int = 200,
                  problem: ConvexProblem | None = None,
                  ) -> tuple[SegmentedAllocation, WeightState]:
    """Iterative reweighted-l1 loop driving each (AP, segment) toward a single
    active local pattern.

    Weights start uniformly at random in (0, 1) to break the symmetry between
    segments, then follow w = 1 / (y + alpha * h) from the previous solution.
    Stops when the largest change in any y entry falls below ``conv_tol`` or
    after ``t_max`` rounds.  A prebuilt ``problem`` may be passed to reuse the
    constraint matrices across loads.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if problem is None:
        problem = build_segment_problem(s, nb, num_segments, cap)
    elif not np.array_equal(problem.arrival_rates, s.arrival_rates):
        problem = swap_arrival_rates(problem, s.arrival_rates)
    weights = initial_weights(problem, alpha, seed)
    layout: SegmentLayout = problem.meta

    seg = None
    y_prev = None
    warm = None
    barrier0 = 1.0
    for it in range(t_max):
        seg = solve_with_weights(problem, weights, tol=tol,
                                 max_newton_iters=max_newton_iters,
                                 warm_start_v=warm,
                                 initial_barrier_weight=barrier0)
        weights.iteration = it + 1
        if seg.status == convex_core.INFEASIBLE:
            return seg, weights
        y = seg.y_flat()
        if y_prev is not None and float(np.abs(y - y_prev).max()) < conv_tol:
            break
        y_prev = y
        h_hat = np.maximum(seg.h, 1e-6)
        weights.w_flat = 1.0 / (y + weights.alpha * h_hat[layout.y_seg_index])
        warm = seg.v
        # later rounds start near the previous optimum: open with a tighter barrier
        barrier0 = max(1.0, seg.solve_info.barrier_weight / 1e4)
    return seg, weights


def swap_arrival_rates(problem: ConvexProblem, arrival_rates: np.ndarray) -> ConvexProblem:
    """Same constraint structure under a different traffic vector."""
    return ConvexProblem(
        num_vars=problem.num_vars, rate_map=problem.rate_map,
        arrival_rates=np.asarray(arrival_rates, dtype=float),
        eq_mat=problem.eq_mat, eq_rhs=problem.eq_rhs, ineq_mat=problem.ineq_mat,
        ineq_rhs=problem.ineq_rhs, nonneg=problem.nonneg, start=problem.start,
        meta=problem.meta)


def extract_patterns(seg: SegmentedAllocation, nb: Neighborhoods) -> list[Pattern]:
    """Per segment, each AP picks its local pattern with the most bandwidth
    (ties toward the lowest bitmask); the segment's global pattern is the set
    of APs that appear in their own dominant pattern."""
    layout = seg.layout
    out = []
    for l in range(layout.num_segments):
        members = []
        for i in layout.ap_list:
            base = layout.y_index(i, 0, l)
            block = seg.v[base:base + len(layout.patterns[i])]
            b = int(np.argmax(block))
            if i in layout.patterns[i][b]:
                members.append(i)
        out.append(Pattern.from_indices(members))
    return out


@dataclass
class FinalAllocation:
    """One global pattern per segment with re-optimized widths and assignments."""

    patterns: list[Pattern]
    h: np.ndarray
    xbar: dict[tuple[int, int, int], float]
    rates: np.ndarray
    utility: float
    status: str
    solve_info: SolveResult | None = None

    def active_pattern_count(self, width_threshold: float = 1e-9) -> int:
        seen = set()
        for pat, width in zip(self.patterns, self.h):
            if pat and width > width_threshold:
                seen.add(pat.mask)
        return len(seen)


def reoptimize_with_patterns(s: Scenario, nb: Neighborhoods,
                             patterns: list[Pattern],
                             arrival_rates: np.ndarray | None = None, *,
                             tol: float = 1e-7, max_newton_iters: int = 200,
                             phase1_only: bool = False) -> FinalAllocation:
    """Fix one global pattern per segment and re-optimize segment widths and
    per-link bandwidths.  Segments sharing a pattern merge naturally."""
    lam = s.arrival_rates if arrival_rates is None else np.asarray(arrival_rates, float)
    L = len(patterns)
    table = spectral_efficiency_table(s, nb)

    x_keys: list[tuple[int, int, int]] = []
    se_of: list[float] = []
    for l, pat in enumerate(patterns):
        for i in pat:
            if not nb.ap_ues[i]:
                continue
            for j in nb.ap_ues[i]:
                x_keys.append((i, j, l))
                se_of.append(table[(i, j)][(pat & nb.ue_nbhd[j]).mask])
    nx = len(x_keys)
    nv = nx + L

    r_rows, r_cols, r_data = [], [], []
    for idx, ((i, j, l), se) in enumerate(zip(x_keys, se_of)):
        if se > 0:
            r_rows.append(j)
            r_cols.append(idx)
            r_data.append(se)
    rate_map = sp.coo_matrix((r_data, (r_rows, r_cols)), shape=(s.k, nv)).tocsr()

    cap_groups: dict[tuple[int, int], list[int]] = {}
    for idx, (i, j, l) in enumerate(x_keys):
        cap_groups.setdefault((l, i), []).append(idx)
    g_rows, g_cols, g_data = [], [], []
    for row, ((l, i), idxs) in enumerate(sorted(cap_groups.items())):
        for idx in idxs:
            g_rows.append(row)
            g_cols.append(idx)
            g_data.append(1.0)
        g_rows.append(row)
        g_cols.append(nx + l)
        g_data.append(-1.0)
    ineq = sp.coo_matrix((g_data, (g_rows, g_cols)),
                         shape=(len(cap_groups), nv)).tocsr()

    eq = sp.csr_matrix((np.ones(L), (np.zeros(L, dtype=int), nx + np.arange(L))),
                       shape=(1, nv))

    start = np.empty(nv)
    h0 = 1.0 / L
    start[nx:] = h0
    group_size = {key: len(idxs) for key, idxs in cap_groups.items()}
    for idx, (i, j, l) in enumerate(x_keys):
        start[idx] = h0 / (2.0 * group_size[(l, i)])

    problem = ConvexProblem(
        num_vars=nv, rate_map=rate_map, arrival_rates=lam,
        eq_mat=eq, eq_rhs=np.array([1.0]), ineq_mat=ineq,
        ineq_rhs=np.zeros(len(cap_groups)),
        nonneg=np.ones(nv, dtype=bool), start=start)
    res = convex_core.solve(problem, tol=tol, max_newton_iters=max_newton_iters,
                            phase1_only=phase1_only)
    if res.status == convex_core.INFEASIBLE:
        return FinalAllocation(patterns=list(patterns), h=np.zeros(L), xbar={},
                               rates=np.zeros(s.k), utility=NEG_INF,
                               status=res.status, solve_info=res)
    xbar = {key: float(res.v[idx]) for idx, key in enumerate(x_keys)}
    return FinalAllocation(
        patterns=list(patterns), h=res.v[nx:].copy(), xbar=xbar,
        rates=rate_map @ res.v, utility=res.utility, status=res.status,
        solve_info=res)


def sparse_pipeline(s: Scenario, nb: Neighborhoods, num_segments: int, *,
                    alpha: float = 0.05, t_max: int = 20, seed: int = 0,
                    conv_tol: float = 1e-5, cap: int = DEFAULT_NEIGHBORHOOD_CAP,
                    tol: float = 1e-7, problem: ConvexProblem | None = None,
                    ) -> tuple[FinalAllocation, SegmentedAllocation, WeightState]:
    """Full sparse scheme: reweighted loop, pattern extraction, re-optimization."""
    seg, weights = reweighted_l1(
        s, nb, num_segments, alpha=alpha, t_max=t_max, seed=seed,
        conv_tol=conv_tol, cap=cap, tol=tol, problem=problem)
    if seg.status == convex_core.INFEASIBLE:
        empty = FinalAllocation(patterns=[], h=np.zeros(num_segments), xbar={},
                                rates=np.zeros(s.k), utility=NEG_INF,
                                status=seg.status)
        return empty, seg, weights
    patterns = extract_patterns(seg, nb)
    final = reoptimize_with_patterns(s, nb, patterns, s.arrival_rates, tol=tol)
    return final, seg, weights
