"""Barrier-method solver for delay-utility maximization over linear constraints.

Canonical problem: maximize the concave utility u(R v) over v, where u is the
negative-total-delay function of the rate vector r = R v, subject to E v = e,
G v <= g, and v_i >= 0 on a masked subset of variables.

The solver is a two-phase interior-point method.  Phase I maximizes the
minimum rate slack min_j (r_j - lambda_j) over the polytope via an auxiliary
variable; a nonpositive optimum certifies infeasibility.  Phase II runs
Newton's method on the objective plus logarithmic barriers, tightening the
barrier weight by a fixed factor per outer stage until the duality-gap proxy
meets tolerance.  Rates and inequality slacks are hoisted into explicit
variables tied by equality rows, so every Newton KKT system has a diagonal
Hessian block and stays sparse.

The delay objective is kept in its natural form: its pole at r_j = lambda_j
acts as a built-in barrier for the rate domain, and the line search never
steps across it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import NEG_INF, utility_delay

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"

_DENSE_LIMIT = 600          # KKT dimension below which dense factorization is used
_RIDGE_INIT = 1e-10         # first ridge tried on a singular Newton system
_RIDGE_MAX = 1e-2
_HESS_FLOOR = 1e-9          # diagonal floor for variables with no curvature of their own
_LS_ALPHA = 0.25            # backtracking: required fraction of predicted decrease
_LS_BETA = 0.5              # backtracking: step shrink factor


class SolverError(RuntimeError):
    """Malformed problem data or an unrecoverable numerical failure."""


def _zeros(m: int, n: int) -> sp.csr_matrix:
    return sp.csr_matrix((m, n))


@dataclass
class ConvexProblem:
    """Canonical constrained utility-maximization instance.

    rate_map is the sparse k x num_vars matrix R; the objective is the delay
    utility of R v at the fixed arrival rates.  ``start`` must satisfy the
    equalities exactly and the inequalities/nonnegativity strictly; builders
    construct it from a uniform allocation.
    """

    num_vars: int
    rate_map: sp.csr_matrix
    arrival_rates: np.ndarray
    eq_mat: sp.csr_matrix
    eq_rhs: np.ndarray
    ineq_mat: sp.csr_matrix
    ineq_rhs: np.ndarray
    nonneg: np.ndarray
    start: np.ndarray
    meta: object = None

    def __post_init__(self):
        n = self.num_vars
        self.rate_map = sp.csr_matrix(self.rate_map)
        self.eq_mat = sp.csr_matrix(self.eq_mat)
        self.ineq_mat = sp.csr_matrix(self.ineq_mat)
        self.arrival_rates = np.asarray(self.arrival_rates, dtype=float)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float)
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float)
        self.nonneg = np.asarray(self.nonneg, dtype=bool)
        self.start = np.asarray(self.start, dtype=float)
        k = self.arrival_rates.shape[0]
        if self.rate_map.shape != (k, n):
            raise SolverError(f"rate_map shape {self.rate_map.shape} != ({k}, {n})")
        if self.eq_mat.shape[1] != n or self.ineq_mat.shape[1] != n:
            raise SolverError("constraint matrix column count != num_vars")
        if self.eq_mat.shape[0] != self.eq_rhs.shape[0]:
            raise SolverError("eq_mat rows != eq_rhs length")
        if self.ineq_mat.shape[0] != self.ineq_rhs.shape[0]:
            raise SolverError("ineq_mat rows != ineq_rhs length")
        if self.nonneg.shape != (n,) or self.start.shape != (n,):
            raise SolverError("nonneg mask / start length != num_vars")
        for name, m in (("rate_map", self.rate_map), ("eq_mat", self.eq_mat),
                        ("ineq_mat", self.ineq_mat)):
            if m.nnz and not np.all(np.isfinite(m.data)):
                raise SolverError(f"non-finite entries in {name}")
        for name, a in (("arrival_rates", self.arrival_rates), ("eq_rhs", self.eq_rhs),
                        ("ineq_rhs", self.ineq_rhs), ("start", self.start)):
            if not np.all(np.isfinite(a)):
                raise SolverError(f"non-finite entries in {name}")
        referenced = np.zeros(n, dtype=bool)
        for m in (self.rate_map, self.eq_mat, self.ineq_mat):
            if m.nnz:
                referenced[np.unique(m.indices)] = True
        if not np.all(referenced):
            missing = int(np.flatnonzero(~referenced)[0])
            raise SolverError(f"variable {missing} referenced by no constraint or objective")


@dataclass
class DualValues:
    """Multipliers at the returned point: eq rows, ineq rows, nonnegativity."""

    eq: np.ndarray
    ineq: np.ndarray
    nonneg: np.ndarray


@dataclass
class SolveResult:
    v: np.ndarray
    utility: float
    status: str
    kkt_residual: float
    iterations: int
    duals: DualValues | None = None
    phase1_slack: float | None = None
    barrier_weight: float = 0.0
    stage_utilities: list = field(default_factory=list)


class _Stall(Exception):
    """Newton system unusable even at maximum ridge."""


class _KKTSolver:
    """Factorizes [[diag(h), A^T], [A, -delta I]] with an escalating ridge.

    delta starts at zero; on a singular or garbage factorization it doubles
    from 1e-10 upward.  Iterative refinement targets the unridged system so
    equality rows stay satisfied to near machine precision even when the
    constraint rows are linearly dependent (consistent redundancy).
    """

    def __init__(self, A: sp.csr_matrix):
        self.A = A.tocsr()
        self.AT = self.A.T.tocsr()
        self.m, self.nw = A.shape
        self.delta = 0.0
        self.dense = (self.m + self.nw) <= _DENSE_LIMIT
        if not self.dense:
            self._build_structure()

    def _build_structure(self):
        """Fixed CSC pattern of the KKT matrix; per-step solves only swap the
        diagonal data in place, skipping symbolic reassembly."""
        acoo = self.A.tocoo()
        nw, m = self.nw, self.m
        rows = np.concatenate([
            np.arange(nw),                # H diagonal
            acoo.row + nw,                # A (bottom-left)
            acoo.col,                     # A^T (top-right)
            nw + np.arange(m),            # -delta diagonal
        ])
        cols = np.concatenate([
            np.arange(nw),
            acoo.col,
            acoo.row + nw,
            nw + np.arange(m),
        ])
        marker = np.arange(rows.size, dtype=np.float64)
        probe = sp.coo_matrix((marker, (rows, cols)), shape=(nw + m, nw + m)).tocsc()
        self._gather = probe.data.astype(np.int64)
        self._template = sp.csc_matrix(
            (np.zeros(probe.data.size), probe.indices, probe.indptr),
            shape=probe.shape)
        self._adata = acoo.data

    def _apply_true(self, hd, x):
        xw, xd = x[: self.nw], x[self.nw:]
        top = hd * xw + self.AT @ xd
        bottom = self.A @ xw
        return np.concatenate([top, bottom])

    def solve(self, hd: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        while True:
            try:
                solver = self._factor(hd)
            except (RuntimeError, scipy.linalg.LinAlgError, ValueError):
                self._escalate()
                continue
            x = solver(rhs)
            if not np.all(np.isfinite(x)):
                self._escalate()
                continue
            for _ in range(2):
                res = rhs - self._apply_true(hd, x)
                corr = solver(res)
                if not np.all(np.isfinite(corr)):
                    break
                x = x + corr
            res = rhs - self._apply_true(hd, x)
            if np.linalg.norm(res) > 1e-6 * (np.linalg.norm(rhs) + 1.0):
                self._escalate()
                continue
            return x

    def _factor(self, hd):
        if self.dense:
            dim = self.nw + self.m
            K = np.zeros((dim, dim))
            K[np.arange(self.nw), np.arange(self.nw)] = hd
            K[: self.nw, self.nw:] = self.AT.toarray()
            K[self.nw:, : self.nw] = self.A.toarray()
            if self.delta > 0:
                K[self.nw + np.arange(self.m), self.nw + np.arange(self.m)] = -self.delta
            lu, piv = scipy.linalg.lu_factor(K)
            return lambda b: scipy.linalg.lu_solve((lu, piv), b)
        data = np.concatenate([
            hd, self._adata, self._adata, np.full(self.m, -self.delta)])
        self._template.data[:] = data[self._gather]
        lu = spla.splu(self._template)
        return lu.solve

    def _escalate(self):
        self.delta = _RIDGE_INIT if self.delta == 0.0 else self.delta * 2.0
        if self.delta > _RIDGE_MAX:
            raise _Stall


@dataclass
class _Core:
    """Hoisted barrier subproblem: minimize c.w + sum lam/(w_d - lam) + (1/t) phi(w)
    subject to A w = b, phi the log barrier over coords in barrier_idx."""

    A: sp.csr_matrix
    b: np.ndarray
    barrier_idx: np.ndarray
    delay_idx: np.ndarray
    delay_lam: np.ndarray
    lin_obj: np.ndarray | None

    def __post_init__(self):
        free = np.ones(self.A.shape[1], dtype=bool)
        free[self.barrier_idx] = False
        self.free_idx = np.flatnonzero(free)

    def psi(self, w, inv_t):
        val = 0.0 if self.lin_obj is None else float(self.lin_obj @ w)
        if self.delay_idx.size:
            d = w[self.delay_idx] - self.delay_lam
            if np.any(d <= 0):
                return np.inf
            val += float(np.sum(self.delay_lam / d))
        if self.barrier_idx.size:
            wb = w[self.barrier_idx]
            if np.any(wb <= 0):
                return np.inf
            val -= inv_t * float(np.sum(np.log(wb)))
        return val

    def grad(self, w, inv_t):
        g = np.zeros(w.shape[0]) if self.lin_obj is None else self.lin_obj.copy()
        if self.delay_idx.size:
            d = w[self.delay_idx] - self.delay_lam
            g[self.delay_idx] += -self.delay_lam / d**2
        if self.barrier_idx.size:
            g[self.barrier_idx] += -inv_t / w[self.barrier_idx]
        return g

    def hess_diag(self, w, inv_t):
        h = np.zeros(w.shape[0])
        if self.delay_idx.size:
            d = w[self.delay_idx] - self.delay_lam
            h[self.delay_idx] += 2.0 * self.delay_lam / d**3
        if self.barrier_idx.size:
            h[self.barrier_idx] += inv_t / w[self.barrier_idx] ** 2
        return np.maximum(h, _HESS_FLOOR)

    def max_step(self, w, dw):
        """Largest step keeping barrier coords and delay slacks strictly positive."""
        alpha = 1.0
        if self.barrier_idx.size:
            cur = w[self.barrier_idx]
            step = dw[self.barrier_idx]
            dec = step < 0
            if np.any(dec):
                alpha = min(alpha, 0.995 * float(np.min(cur[dec] / -step[dec])))
        if self.delay_idx.size:
            cur = w[self.delay_idx] - self.delay_lam
            step = dw[self.delay_idx]
            dec = step < 0
            if np.any(dec):
                alpha = min(alpha, 0.995 * float(np.min(cur[dec] / -step[dec])))
        return alpha


def _newton_stage(core, kkt, w, nu, inv_t, max_iters, newton_tol, stat_tol=np.inf):
    """Centering run at a fixed barrier weight.  Returns the new point, the
    final constraint multipliers, and the step count.

    Besides the Newton decrement, the stop optionally requires the
    stationarity leftover |H dw| to be small on coordinates without their own
    barrier, which is what bounds the recovered-dual KKT error.
    """
    steps = 0
    for _ in range(max_iters):
        g = core.grad(w, inv_t)
        hd = core.hess_diag(w, inv_t)
        pres = core.b - core.A @ w
        rhs = np.concatenate([-g, pres])
        sol = kkt.solve(hd, rhs)
        dw = sol[: kkt.nw]
        nu = sol[kkt.nw:]
        lam2 = float(dw @ (hd * dw))
        if lam2 / 2.0 <= newton_tol and np.linalg.norm(pres, np.inf) <= 1e-9:
            if not np.isfinite(stat_tol) or not core.free_idx.size:
                break
            if float(np.abs((hd * dw)[core.free_idx]).max()) <= stat_tol:
                break
        alpha = core.max_step(w, dw)
        psi0 = core.psi(w, inv_t)
        slope = float(g @ dw)
        accepted = False
        for _ in range(60):
            cand = w + alpha * dw
            if core.psi(cand, inv_t) <= psi0 + _LS_ALPHA * alpha * slope + 1e-13 * abs(psi0):
                w = cand
                accepted = True
                break
            alpha *= _LS_BETA
        steps += 1
        if not accepted:
            break
    return w, nu, steps


def _run_barrier(core, w0, t0, barrier_multiplier, tol, max_newton_iters,
                 stage_hook=None, utility_of=None, stat_tol=np.inf):
    """Outer barrier loop.  stage_hook may end the loop early (phase I);
    utility_of records the true objective once per stage."""
    kkt = _KKTSolver(core.A)
    m_bar = max(core.barrier_idx.size, 1)
    w = w0.copy()
    nu = np.zeros(core.A.shape[0])
    t = t0
    total = 0
    utilities = []
    for _ in range(90):
        inv_t = 1.0 / t
        ntol = max(1e-12, 1e-10 * (1.0 + abs(core.psi(w, inv_t))))
        # the stationarity extra only pays off on the final stage
        stage_stat = stat_tol if m_bar / t <= tol else np.inf
        w, nu, steps = _newton_stage(core, kkt, w, nu, inv_t, max_newton_iters,
                                     ntol, stage_stat)
        total += steps
        gap = m_bar / t
        if utility_of is not None:
            utilities.append(utility_of(w))
        if stage_hook is not None and stage_hook(w, gap):
            break
        if gap <= tol:
            break
        t *= barrier_multiplier
    return w, nu, t, total, utilities


def _build_phase2_core(p: ConvexProblem) -> _Core:
    n = p.num_vars
    k = p.arrival_rates.shape[0]
    mi = p.ineq_mat.shape[0]
    me = p.eq_mat.shape[0]
    served = np.flatnonzero(p.arrival_rates > 0)
    # variable order: v (n), r (k), s (mi)
    A = sp.vstack([
        sp.hstack([p.eq_mat, _zeros(me, k), _zeros(me, mi)]),
        sp.hstack([p.rate_map, -sp.eye(k), _zeros(k, mi)]),
        sp.hstack([p.ineq_mat, _zeros(mi, k), sp.eye(mi)]),
    ], format="csr")
    b = np.concatenate([p.eq_rhs, np.zeros(k), p.ineq_rhs])
    barrier_idx = np.concatenate([
        np.flatnonzero(p.nonneg),
        n + k + np.arange(mi),
    ]).astype(np.int64)
    return _Core(
        A=A,
        b=b,
        barrier_idx=barrier_idx,
        delay_idx=(n + served).astype(np.int64),
        delay_lam=p.arrival_rates[served],
        lin_obj=None,
    )


def _pack_w(p: ConvexProblem, v: np.ndarray) -> np.ndarray:
    r = p.rate_map @ v
    slack = p.ineq_rhs - p.ineq_mat @ v
    return np.concatenate([v, r, slack])


def _strictly_feasible(p: ConvexProblem, v) -> bool:
    if v is None:
        return False
    v = np.asarray(v, dtype=float)
    if v.shape != (p.num_vars,) or not np.all(np.isfinite(v)):
        return False
    tiny = 1e-12
    if np.any(v[p.nonneg] <= tiny):
        return False
    if p.ineq_mat.shape[0]:
        scale = 1.0 + float(np.abs(p.ineq_rhs).max()) if p.ineq_rhs.size else 1.0
        if float(np.min(p.ineq_rhs - p.ineq_mat @ v)) <= tiny * scale:
            return False
    r = p.rate_map @ v
    served = p.arrival_rates > 0
    if np.any(r[served] - p.arrival_rates[served] <= 0):
        return False
    return True


def _blend_warm(p: ConvexProblem, warm) -> np.ndarray | None:
    """Pull a stale warm point toward the interior start until it is strictly
    feasible again; None if no blend works (then phase I must run)."""
    if warm is None:
        return None
    warm = np.asarray(warm, dtype=float)
    if warm.shape != (p.num_vars,) or not np.all(np.isfinite(warm)):
        return None
    for theta in (0.0, 0.05, 0.1, 0.2, 0.35, 0.6):
        v = (1.0 - theta) * warm + theta * p.start
        if _strictly_feasible(p, v):
            return v
    return None


def _phase1(p: ConvexProblem, tol, max_newton_iters, barrier_multiplier,
            feasibility_only=False):
    """Maximize the minimum rate slack.  Returns (v, slack_value, iterations)."""
    n = p.num_vars
    k = p.arrival_rates.shape[0]
    mi = p.ineq_mat.shape[0]
    me = p.eq_mat.shape[0]
    served = np.flatnonzero(p.arrival_rates > 0)
    ks = served.size
    v0 = p.start
    s0 = p.ineq_rhs - p.ineq_mat @ v0
    if (mi and np.any(s0 <= 0)) or np.any(v0[p.nonneg] <= 0):
        raise SolverError("problem start point is not strictly feasible")
    r0 = p.rate_map @ v0
    if ks == 0:
        return v0, np.inf, 0

    lam_s = p.arrival_rates[served]
    sel = sp.csr_matrix((np.ones(ks), (np.arange(ks), served)), shape=(ks, k))
    # variable order: v (n), r (k), s (mi), q (ks), tau (1)
    A = sp.vstack([
        sp.hstack([p.eq_mat, _zeros(me, k), _zeros(me, mi), _zeros(me, ks), _zeros(me, 1)]),
        sp.hstack([p.rate_map, -sp.eye(k), _zeros(k, mi), _zeros(k, ks), _zeros(k, 1)]),
        sp.hstack([p.ineq_mat, _zeros(mi, k), sp.eye(mi), _zeros(mi, ks), _zeros(mi, 1)]),
        sp.hstack([_zeros(ks, n), sel, _zeros(ks, mi), -sp.eye(ks),
                   sp.csr_matrix(-np.ones((ks, 1)))]),
    ], format="csr")
    b = np.concatenate([p.eq_rhs, np.zeros(k), p.ineq_rhs, lam_s])

    off_s = n + k
    off_q = off_s + mi
    off_tau = off_q + ks
    barrier_idx = np.concatenate([
        np.flatnonzero(p.nonneg),
        off_s + np.arange(mi),
        off_q + np.arange(ks),
    ]).astype(np.int64)
    c = np.zeros(off_tau + 1)
    c[off_tau] = -1.0
    core = _Core(A=A, b=b, barrier_idx=barrier_idx,
                 delay_idx=np.array([], dtype=np.int64),
                 delay_lam=np.array([]), lin_obj=c)

    tau0 = float(np.min(r0[served] - lam_s)) - 1.0
    q0 = r0[served] - lam_s - tau0
    w0 = np.concatenate([v0, r0, s0, q0, [tau0]])

    def hook(w, gap):
        tau = float(w[off_tau])
        if feasibility_only and tau > 0:
            return True
        if tau + gap < 0:
            return True
        if tau > 0 and gap <= 0.25 * tau:
            return True
        return False

    w, _, _, total, _ = _run_barrier(
        core, w0, 1.0, barrier_multiplier, max(tol, 1e-9),
        max_newton_iters, stage_hook=hook)
    return w[:n], float(w[off_tau]), total


def solve(p: ConvexProblem, tol: float = 1e-7, max_newton_iters: int = 200, *,
          warm_start_v: np.ndarray | None = None,
          initial_barrier_weight: float = 1.0,
          barrier_multiplier: float = 10.0,
          phase1_only: bool = False) -> SolveResult:
    """Optimize the problem; see the module docstring for the method.

    ``warm_start_v`` skips phase I when it is strictly feasible (used by the
    reweighting loop).  ``phase1_only`` stops after the feasibility phase;
    the result's phase1_slack carries the max-min rate slack.
    """
    lam = p.arrival_rates
    iterations = 0
    phase1_slack = None

    blended = None if phase1_only else _blend_warm(p, warm_start_v)
    if blended is None:
        try:
            v1, slack, it1 = _phase1(p, tol, max_newton_iters, barrier_multiplier,
                                     feasibility_only=phase1_only)
        except _Stall:
            return SolveResult(v=p.start.copy(), utility=NEG_INF, status=MAX_ITERATIONS,
                               kkt_residual=float("nan"), iterations=iterations)
        iterations += it1
        phase1_slack = slack
        if slack <= 0:
            return SolveResult(v=v1, utility=NEG_INF, status=INFEASIBLE,
                               kkt_residual=float("nan"), iterations=iterations,
                               phase1_slack=slack)
        if phase1_only:
            return SolveResult(v=v1, utility=utility_delay(lam, p.rate_map @ v1),
                               status=OPTIMAL, kkt_residual=float("nan"),
                               iterations=iterations, phase1_slack=slack)
        v_start = v1
        # a fresh phase-I point is far from the central path at high weights
        initial_barrier_weight = 1.0
    else:
        v_start = blended

    core = _build_phase2_core(p)
    w0 = _pack_w(p, v_start)

    def utility_of(w):
        return utility_delay(lam, p.rate_map @ w[: p.num_vars])

    try:
        w, nu, t, steps, stage_u = _run_barrier(
            core, w0, initial_barrier_weight, barrier_multiplier, tol,
            max_newton_iters, utility_of=utility_of,
            stat_tol=max(1e-9, 0.01 * tol))
        iterations += steps

        v = w[: p.num_vars]
        duals = _external_duals(p, w, nu, t)
        resid = kkt_residual(p, v, duals)
        kkt = _KKTSolver(core.A)
        polish = 0
        stat_tol = 0.01 * tol
        while resid > tol and polish < 8:
            t *= barrier_multiplier
            stat_tol = max(stat_tol * 0.1, 1e-13)
            inv_t = 1.0 / t
            ntol = max(1e-13, 1e-11 * (1 + abs(core.psi(w, inv_t))))
            w, nu, steps = _newton_stage(core, kkt, w, nu, inv_t,
                                         max_newton_iters, ntol, stat_tol)
            iterations += steps
            v = w[: p.num_vars]
            duals = _external_duals(p, w, nu, t)
            resid = kkt_residual(p, v, duals)
            polish += 1
    except _Stall:
        v = w0[: p.num_vars]
        return SolveResult(v=v, utility=utility_delay(lam, p.rate_map @ v),
                           status=MAX_ITERATIONS, kkt_residual=float("nan"),
                           iterations=iterations, phase1_slack=phase1_slack)

    status = OPTIMAL if resid <= tol else MAX_ITERATIONS
    return SolveResult(v=v, utility=utility_delay(lam, p.rate_map @ v),
                       status=status, kkt_residual=resid, iterations=iterations,
                       duals=duals, phase1_slack=phase1_slack, barrier_weight=t,
                       stage_utilities=stage_u)


def _external_duals(p: ConvexProblem, w, nu, t) -> DualValues:
    """Recover canonical multipliers from the hoisted KKT multipliers.

    nu is ordered [eq rows, rate rows, ineq rows].  The nonnegativity duals
    are read off the variable-block stationarity identity, clamped at zero;
    whatever clamping discards shows up in the reported KKT residual.
    """
    k = p.arrival_rates.shape[0]
    me = p.eq_mat.shape[0]
    nu_eq = nu[:me]
    nu_rate = nu[me:me + k]
    nu_ineq = nu[me + k:]
    expr = p.rate_map.T @ nu_rate
    if me:
        expr = expr + p.eq_mat.T @ nu_eq
    if nu_ineq.size:
        expr = expr + p.ineq_mat.T @ nu_ineq
    sigma = np.zeros(p.num_vars)
    sigma[p.nonneg] = np.maximum(expr[p.nonneg], 0.0)
    return DualValues(eq=nu_eq.copy(), ineq=np.maximum(nu_ineq, 0.0), nonneg=sigma)


def kkt_residual(p: ConvexProblem, v: np.ndarray, duals: DualValues) -> float:
    """Max-norm KKT error of (v, duals) for the canonical problem.

    Covers stationarity of the negated utility, primal feasibility of
    equalities, inequalities and nonnegativity, dual nonnegativity, and the
    complementary-slackness products.
    """
    lam = p.arrival_rates
    r = p.rate_map @ v
    served = lam > 0
    d = r[served] - lam[served]
    if np.any(d <= 0):
        return np.inf
    fprime = np.zeros_like(lam)
    fprime[served] = -lam[served] / d**2
    stat = p.rate_map.T @ fprime
    if p.eq_mat.shape[0]:
        stat = stat + p.eq_mat.T @ duals.eq
    if p.ineq_mat.shape[0]:
        stat = stat + p.ineq_mat.T @ duals.ineq
    stat = stat - duals.nonneg
    parts = [float(np.abs(stat).max()) if stat.size else 0.0]
    if p.eq_mat.shape[0]:
        parts.append(float(np.abs(p.eq_mat @ v - p.eq_rhs).max()))
    if p.ineq_mat.shape[0]:
        slack = p.ineq_rhs - p.ineq_mat @ v
        parts.append(max(0.0, float((-slack).max())))
        parts.append(float(np.abs(duals.ineq * slack).max()))
        parts.append(max(0.0, float((-duals.ineq).max())))
    if np.any(p.nonneg):
        vm = v[p.nonneg]
        parts.append(max(0.0, float((-vm).max())))
        parts.append(float(np.abs(duals.nonneg[p.nonneg] * vm).max()))
        parts.append(max(0.0, float((-duals.nonneg[p.nonneg]).max())))
    return float(max(parts))
