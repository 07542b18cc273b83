"""Alpha-fair routing under a coherent risk budget.

The problem: maximize the sum of alpha-fair utilities of community
allocations x = community_route @ z, over balanced link flows y and route
flows z, subject to vehicle capacity (link_route @ z <= y), per-scenario
capacity rows K y <= (1+h_i) c_i and y <= (1+h_i) d_i, and a risk budget
rho_delta(y) <= epsilon.  The risk budget enters through its conjugate
certificate (scores w, scale lam, shift nu): lam g*(w/lam) - nu <= epsilon
with w - nu >= h, which is linear for "cvar" and "tv" and handled by outer
cutting planes for "evar".  Everything lands in one polytope, so the concave
objective is maximized with Frank-Wolfe steps: linearize, call the simplex
oracle, exact line search on the segment.  An optional corrective mode
re-optimizes over the hull of the oracle vertices collected so far, which
drives the duality gap to machine precision on small instances where plain
Frank-Wolfe zigzags.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InfeasibleProblemError, SolverError
from .lpcore import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, lp_solve
from .network import IncidenceMatrices, Network, build_incidence
from .riskmeasures import (RiskEvaluation, RiskSpec, ScenarioSet, conjugate_g,
                           rho_primal, scenario_violations)

_EVAR_LAM_FLOOR = 1e-15


def alpha_utility(x, alpha: float):
    """Alpha-fair utility: log for alpha = 1, else x^(1-alpha) / (1-alpha)."""
    x = np.asarray(x, dtype=float)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if np.any(x <= 0.0) and alpha != 0.0:
        raise ValueError("alpha utility needs strictly positive allocations")
    if alpha == 1.0:
        return np.log(x)
    return x ** (1.0 - alpha) / (1.0 - alpha)


def alpha_utility_grad(x, alpha: float):
    """Derivative of alpha_utility: x^(-alpha)."""
    x = np.asarray(x, dtype=float)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if np.any(x <= 0.0) and alpha != 0.0:
        raise ValueError("alpha utility needs strictly positive allocations")
    return x ** (-alpha)


def jain_index(x) -> float:
    """Jain fairness index (sum x)^2 / (n * sum x^2); 1 means even shares."""
    x = np.asarray(x, dtype=float)
    denom = len(x) * float(np.sum(x * x))
    if denom <= 0.0:
        return 0.0
    return float(np.sum(x)) ** 2 / denom


@dataclass
class SolverConfig:
    """Knobs for solve_fair / solve_maxsum.

    corrective=True re-optimizes over collected oracle vertices each step
    (needed to push the gap below ~1e-6; plain Frank-Wolfe stalls earlier).
    """

    max_iters: int = 100
    gap_tol: float = 1e-6
    corrective: bool = False
    cut_budget: int = 200
    cut_tol: float = 1e-9
    line_search_tol: float = 1e-10


@dataclass
class FairProblem:
    """Problem data: network, scenarios, risk budget, fairness exponent."""

    network: Network
    scenarios: ScenarioSet
    risk: RiskSpec
    alpha: float = 1.0
    x_min: float = 1e-3
    incidence: Optional[IncidenceMatrices] = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.x_min > 0.0):
            raise ValueError(f"x_min must be > 0, got {self.x_min}")
        n = self.network
        s = self.scenarios
        if s.node_caps.shape[1] != n.n_nodes:
            raise ValueError("scenario node capacities do not match node count")
        if s.link_caps.shape[1] != n.n_links:
            raise ValueError("scenario link capacities do not match link count")
        if self.incidence is None:
            self.incidence = build_incidence(n)


@dataclass
class RiskCertificate:
    """Conjugate-side certificate carried by a solution."""

    scores: np.ndarray      # w, one per scenario
    scale: float            # lam >= 0
    shift: float            # nu
    violations: np.ndarray  # h, one per scenario


@dataclass
class FlowSolution:
    """Feasible point: allocations, link flows, route flows, certificate."""

    allocations: np.ndarray
    link_flow: np.ndarray
    route_flow: np.ndarray
    certificate: RiskCertificate


@dataclass
class FeasibilityReport:
    """Absolute residuals of a FlowSolution against every constraint family,
    plus the independently recomputed risk value."""

    balance_residual: float
    vehicle_violation: float
    scenario_violation: float
    floor_violation: float
    certificate_order_violation: float
    conjugate_excess: float
    nonneg_violation: float
    rho_recomputed: float
    rho_excess: float
    flow_scale: float

    def max_relative_residual(self) -> float:
        s = 1.0 + self.flow_scale
        return max(self.balance_residual / s, self.vehicle_violation / s,
                   self.scenario_violation / s, self.floor_violation / s,
                   self.nonneg_violation / s, self.certificate_order_violation,
                   max(self.conjugate_excess, 0.0))

    def ok(self, tol: float = 1e-8, rho_tol: float = 1e-6) -> bool:
        return self.max_relative_residual() <= tol and self.rho_excess <= rho_tol


@dataclass
class SolveReport:
    """What happened during a solve, for reports and reruns."""

    objective: float
    objective_kind: str
    alpha: float
    risk_kind: str
    delta: float
    epsilon: float
    iterations: int
    final_gap: float
    gap_trace: list
    objective_trace: list
    wall_time_s: float
    rho: float
    metrics: dict
    allocations: np.ndarray
    feasibility: FeasibilityReport
    warnings: list = field(default_factory=list)


@dataclass
class FairnessCheck:
    """Outcome of sampling the variational fairness condition."""

    sums: list
    max_sum: float
    tol: float
    n_samples: int

    @property
    def ok(self) -> bool:
        return self.max_sum <= self.tol


def _independent_balance_rows(n_nodes: int, links: np.ndarray) -> list:
    """Node indices whose balance rows are linearly independent: all nodes
    touched by links, minus one representative per connected component."""
    parent = list(range(n_nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    touched = np.zeros(n_nodes, dtype=bool)
    for a, b in links:
        touched[int(a)] = touched[int(b)] = True
        parent[find(int(a))] = find(int(b))
    drop = set()
    for comp in {find(i) for i in range(n_nodes) if touched[i]}:
        members = [i for i in range(n_nodes) if touched[i] and find(i) == comp]
        drop.add(max(members))
    return [i for i in range(n_nodes) if touched[i] and i not in drop]


class Reformulation:
    """Single polytope holding every constraint of the routing problem.

    Variable layout: [y (links) | z (routes) | w (scenarios) | lam | nu |
    h (scenarios) | t (scenarios, cvar only)].  The allocation x = H z is
    eliminated and reconstructed, so x = H z holds exactly by construction.
    """

    def __init__(self, problem: FairProblem):
        net, inc, scen = problem.network, problem.incidence, problem.scenarios
        risk = problem.risk
        n_l, n_r, n_s = net.n_links, net.n_routes, scen.n_scenarios
        self.problem = problem
        self.kind = risk.kind
        self.delta = risk.delta
        self.eps = risk.epsilon
        self.p = scen.probs
        self.n_scen = n_s

        self.sl_y = slice(0, n_l)
        self.sl_z = slice(n_l, n_l + n_r)
        self.sl_w = slice(n_l + n_r, n_l + n_r + n_s)
        self.i_lam = n_l + n_r + n_s
        self.i_nu = self.i_lam + 1
        self.sl_h = slice(self.i_nu + 1, self.i_nu + 1 + n_s)
        nv = self.i_nu + 1 + n_s
        if risk.kind == "cvar":
            self.sl_t = slice(nv, nv + n_s)
            nv += n_s
        else:
            self.sl_t = None
        self.nv = nv

        # Any feasible point has p @ h <= rho <= epsilon because the nominal
        # distribution always lies in the ambiguity set, so h_i <= eps / p_i.
        self.h_max = risk.epsilon / self.p
        self.lam_max = 10.0 * (1.0 + float(np.max(self.h_max)))

        rows, rhs = [], []

        def row():
            return np.zeros(nv)

        # vehicle capacity: F z <= y
        block = np.zeros((n_l, nv))
        block[:, self.sl_y] = -np.eye(n_l)
        block[:, self.sl_z] = inc.link_route
        rows.append(block); rhs.append(np.zeros(n_l))

        # scenario capacity rows, h_i entering with -cap
        for i in range(n_s):
            c_i, d_i = scen.node_caps[i], scen.link_caps[i]
            b1 = np.zeros((net.n_nodes, nv))
            b1[:, self.sl_y] = inc.node_inflow
            b1[:, self.sl_h.start + i] = -c_i
            rows.append(b1); rhs.append(c_i.copy())
            b2 = np.zeros((n_l, nv))
            b2[:, self.sl_y] = np.eye(n_l)
            b2[:, self.sl_h.start + i] = -d_i
            rows.append(b2); rhs.append(d_i.copy())

        # certificate ordering: h - w + nu <= 0
        b3 = np.zeros((n_s, nv))
        b3[:, self.sl_h] = np.eye(n_s)
        b3[:, self.sl_w] = -np.eye(n_s)
        b3[:, self.i_nu] = 1.0
        rows.append(b3); rhs.append(np.zeros(n_s))

        # allocation floor: -H z <= -x_min
        b4 = np.zeros((net.n_communities, nv))
        b4[:, self.sl_z] = -inc.community_route
        rows.append(b4); rhs.append(np.full(net.n_communities, -problem.x_min))

        lower = np.full(nv, -np.inf)
        upper = np.full(nv, np.inf)
        lower[self.sl_y] = 0.0
        lower[self.sl_z] = 0.0
        lower[self.i_lam] = 0.0
        upper[self.i_lam] = self.lam_max
        lower[self.sl_h] = 0.0
        upper[self.sl_h] = self.h_max

        if risk.kind == "cvar":
            for i in range(n_s):
                for sign in (1.0, -1.0):
                    r = row()
                    r[self.sl_w.start + i] = sign * self.p[i]
                    r[self.sl_t.start + i] = -1.0
                    rows.append(r[None, :]); rhs.append(np.zeros(1))
            r = row()
            r[self.sl_t] = 1.0
            r[self.i_lam] = -1.0
            rows.append(r[None, :]); rhs.append(np.zeros(1))
            r = row()
            r[self.i_lam] = 1.0 / (1.0 - risk.delta)
            r[self.i_nu] = -1.0
            rows.append(r[None, :]); rhs.append(np.array([risk.epsilon]))
            lower[self.sl_t] = 0.0
        elif risk.kind == "tv":
            for i in range(n_s):
                for sign in (1.0, -1.0):
                    r = row()
                    r[self.sl_w.start + i] = sign
                    r[self.i_lam] = -1.0
                    rows.append(r[None, :]); rhs.append(np.zeros(1))
            r = row()
            r[self.sl_w] = self.p
            r[self.i_lam] = 2.0 * risk.delta
            r[self.i_nu] = -1.0
            rows.append(r[None, :]); rhs.append(np.array([risk.epsilon]))
        else:
            # evar: the convex budget arrives as cutting planes; fixing the
            # shift removes the translation direction (w, nu) -> (w+s, nu+s)
            # the cuts cannot pin down, and a box keeps the oracle bounded.
            lower[self.i_nu] = 0.0
            upper[self.i_nu] = 0.0
            lower[self.sl_w] = 0.0
            upper[self.sl_w] = self.h_max + 1.0

        self.a_ub_base = np.vstack(rows)
        self.b_ub_base = np.concatenate(rhs)
        # The incidence rows of each connected component sum to zero, so one
        # row per component (and every isolated node's zero row) is redundant;
        # dropping them up front keeps the row count stable, which lets the
        # oracle reuse its basis across Frank-Wolfe iterations.
        balance_rows = _independent_balance_rows(net.n_nodes, net.links)
        a_eq = np.zeros((len(balance_rows), nv))
        a_eq[:, self.sl_y] = inc.node_link[balance_rows]
        self.a_eq = a_eq
        self.b_eq = np.zeros(len(balance_rows))
        self.lower = lower
        self.upper = upper
        self.cuts_a: list = []
        self.cuts_b: list = []

    @property
    def n_cuts(self) -> int:
        return len(self.cuts_a)

    def lp(self, maximize_obj: np.ndarray) -> LinearProgram:
        a_ub = self.a_ub_base
        b_ub = self.b_ub_base
        if self.cuts_a:
            a_ub = np.vstack([a_ub, np.array(self.cuts_a)])
            b_ub = np.concatenate([b_ub, np.array(self.cuts_b)])
        return LinearProgram(c=-maximize_obj, a_ub=a_ub, b_ub=b_ub,
                             a_eq=self.a_eq, b_eq=self.b_eq,
                             lower=self.lower, upper=self.upper)

    def objective_for_allocation_grad(self, grad_x: np.ndarray) -> np.ndarray:
        obj = np.zeros(self.nv)
        obj[self.sl_z] = self.problem.incidence.community_route.T @ grad_x
        return obj

    def allocation_of(self, v: np.ndarray) -> np.ndarray:
        return self.problem.incidence.community_route @ v[self.sl_z]

    # ----- evar cutting planes -----

    def evar_budget_excess(self, v: np.ndarray) -> float:
        if self.kind != "evar":
            return 0.0
        value, _, _ = self._evar_value_grad(v[self.sl_w], v[self.i_lam])
        return value - v[self.i_nu] - self.eps

    def _evar_value_grad(self, w: np.ndarray, lam: float):
        lam_eff = max(float(lam), _EVAR_LAM_FLOOR)
        shift = float(np.max(w))
        expo = np.exp((w - shift) / lam_eff)
        s = float(np.sum(self.p * expo))
        q = self.p * expo / s
        log_term = -math.log1p(-self.delta)
        value = shift + lam_eff * (math.log(s) + log_term)
        # q @ (shift - w) has exact zero terms at the maximum, so the ratio
        # stays clean even as lam -> 0 (plain shift - q@w would cancel badly).
        dlam = math.log(s) + float(q @ (shift - w)) / lam_eff + log_term
        return value, q, dlam

    def add_cut_at(self, v: np.ndarray) -> None:
        w, lam = v[self.sl_w], float(v[self.i_lam])
        lam_eff = max(lam, _EVAR_LAM_FLOOR)
        value, q, dlam = self._evar_value_grad(w, lam)
        r = np.zeros(self.nv)
        r[self.sl_w] = q
        r[self.i_lam] = dlam
        r[self.i_nu] = -1.0
        rhs = self.eps - value + float(q @ w) + dlam * lam_eff
        self.cuts_a.append(r)
        self.cuts_b.append(rhs)


def build_reformulation(problem: FairProblem) -> Reformulation:
    """Assembles the constraint polytope once; reuse it across solves."""
    return Reformulation(problem)


_CUT_ACCEPT_SLACK = 1e-6


def _solve_polytope_lp(refm: Reformulation, maximize_obj: np.ndarray,
                       config: SolverConfig, basis=None, context="solve",
                       warnings_sink: Optional[list] = None):
    """Maximizes a linear objective over the polytope; for evar keeps adding
    tangent cuts until the returned vertex respects the risk budget."""
    while True:
        res = lp_solve(refm.lp(maximize_obj), start_basis=basis)
        if res.status == INFEASIBLE:
            raise InfeasibleProblemError(
                f"{context}: no flow satisfies the allocation floor and the "
                "risk budget; lower x_min or raise epsilon")
        if res.status != OPTIMAL:
            raise SolverError(f"{context}: polytope oracle ended {res.status}")
        v = res.x
        if refm.kind != "evar":
            return v, res.basis
        excess = refm.evar_budget_excess(v)
        if excess <= config.cut_tol:
            return v, res.basis
        if refm.n_cuts >= config.cut_budget:
            if excess <= _CUT_ACCEPT_SLACK:
                if warnings_sink is not None:
                    warnings_sink.append(
                        f"cut budget reached with residual risk-budget "
                        f"violation {excess:.2e} (within {_CUT_ACCEPT_SLACK})")
                return v, res.basis
            raise SolverError(
                f"{context}: risk-budget violation {excess:.2e} persists after "
                f"{refm.n_cuts} cutting planes")
        refm.add_cut_at(v)
        basis = None  # the row set changed; cold start


def _clip_small_negatives(refm: Reformulation, v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for sl in (refm.sl_y, refm.sl_z, refm.sl_h):
        part = v[sl]
        part[(part < 0.0) & (part > -1e-9)] = 0.0
        v[sl] = part
    return v


def _line_search_gamma(x, dx, alpha: float, tol: float) -> float:
    """Exact maximizer of sum psi(x + gamma dx) on [0, 1] by bisection on the
    (monotone) derivative."""

    def slope(gamma: float) -> float:
        return float(dx @ alpha_utility_grad(x + gamma * dx, alpha))

    if slope(1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _hull_reoptimize(xcols: np.ndarray, alpha: float, theta: np.ndarray,
                     max_outer: int = 200) -> np.ndarray:
    """Maximizes sum psi(xcols @ theta) over the probability simplex with a
    reduced-space Newton method; used by the corrective mode.  The working set
    is the current support plus the coordinate with the largest gradient, so
    promising vertices can receive mass in the same step that checks them."""
    k = xcols.shape[1]
    if k == 1 or alpha == 0.0:
        return theta

    def value(th):
        return float(np.sum(alpha_utility(xcols @ th, alpha)))

    theta = theta.copy()
    for _ in range(max_outer):
        x = xcols @ theta
        g = xcols.T @ alpha_utility_grad(x, alpha)
        support = theta > 1e-14
        lam_bar = float(g @ theta)
        scale = 1.0 + float(np.max(np.abs(g)))
        inner = float(np.max(np.abs(g[support] - lam_bar))) if support.any() else math.inf
        outer_gain = float(np.max(g - lam_bar))
        if inner <= 1e-12 * scale and outer_gain <= 1e-12 * scale:
            return theta
        active = np.flatnonzero(support | (np.arange(k) == int(np.argmax(g))))
        m = len(active)
        if m == 1:
            return theta
        xa = xcols[:, active]
        ga = g[active]
        curv = -alpha * x ** (-alpha - 1.0)
        ha = xa.T @ (curv[:, None] * xa)
        z = np.vstack([-np.ones((1, m - 1)), np.eye(m - 1)])
        gu = z.T @ ga
        hu = z.T @ ha @ z
        ridge = 1e-12 * (1.0 + float(np.trace(-hu)) / max(m - 1, 1))
        try:
            du = np.linalg.solve(-hu + ridge * np.eye(m - 1), gu)
        except np.linalg.LinAlgError:
            du = gu
        step = z @ du
        if float(ga @ step) <= 0.0:
            step = z @ gu
        neg = step < 0.0
        t_max = 1.0
        if np.any(neg):
            t_max = min(1.0, float(np.min(theta[active][neg] / -step[neg])))
        if t_max <= 0.0:
            t_max = 1e-16
        base = value(theta)
        gain0 = float(ga @ step)
        t = t_max
        improved = False
        for _ in range(60):
            trial = theta.copy()
            trial[active] = np.maximum(theta[active] + t * step, 0.0)
            ssum = trial.sum()
            if ssum > 0.0:
                trial = trial / ssum
                if value(trial) >= base + 1e-4 * t * gain0 - 1e-15:
                    theta = trial
                    improved = True
                    break
            t *= 0.5
        if not improved:
            return theta
    return theta


def _assemble_solution(refm: Reformulation, v: np.ndarray) -> FlowSolution:
    cert = RiskCertificate(scores=v[refm.sl_w].copy(),
                           scale=float(v[refm.i_lam]),
                           shift=float(v[refm.i_nu]),
                           violations=v[refm.sl_h].copy())
    return FlowSolution(allocations=refm.allocation_of(v),
                        link_flow=v[refm.sl_y].copy(),
                        route_flow=v[refm.sl_z].copy(),
                        certificate=cert)


def _allocation_metrics(x: np.ndarray) -> dict:
    return {
        "total_allocation": float(np.sum(x)),
        "min_share": float(np.min(x)),
        "max_share": float(np.max(x)),
        "jain_index": jain_index(x),
    }


def solve_fair(problem: FairProblem, config: Optional[SolverConfig] = None,
               reformulation: Optional[Reformulation] = None):
    """Maximizes sum alpha_utility(x) with Frank-Wolfe over the reformulated
    polytope.  Returns (FlowSolution, SolveReport).

    Stops when the linearized improvement bound (the duality gap) drops to
    config.gap_tol or after config.max_iters steps, whichever comes first;
    the final gap is always measured with a fresh oracle call.
    """
    config = config or SolverConfig()
    t0 = time.perf_counter()
    refm = reformulation if reformulation is not None else build_reformulation(problem)
    alpha = problem.alpha

    warnings: list = []
    v, basis = _solve_polytope_lp(refm, np.zeros(refm.nv), config,
                                  context="preflight", warnings_sink=warnings)
    v = _clip_small_negatives(refm, v)
    x = refm.allocation_of(v)

    vertices = [v]
    theta = np.array([1.0])
    gap_trace, obj_trace = [], []
    iters_done = 0
    while True:
        grad_x = alpha_utility_grad(x, alpha)
        obj = refm.objective_for_allocation_grad(grad_x)
        v_hat, basis = _solve_polytope_lp(refm, obj, config, basis=basis,
                                          warnings_sink=warnings)
        v_hat = _clip_small_negatives(refm, v_hat)
        x_hat = refm.allocation_of(v_hat)
        gap = float(grad_x @ (x_hat - x))
        obj_trace.append(float(np.sum(alpha_utility(x, alpha))))
        gap_trace.append(gap)
        if gap <= config.gap_tol or iters_done >= config.max_iters:
            break
        iters_done += 1
        gamma = _line_search_gamma(x, x_hat - x, alpha, config.line_search_tol)
        if config.corrective:
            # theta0 reproduces the plain step; keep it if re-optimizing over
            # the hull does not beat it.
            vertices, theta0 = _extend_hull(vertices, theta, v_hat, gamma)
            xcols = np.column_stack([refm.allocation_of(u) for u in vertices])
            theta = _hull_reoptimize(xcols, alpha, theta0.copy())
            plain_value = float(np.sum(alpha_utility(xcols @ theta0, alpha)))
            if float(np.sum(alpha_utility(xcols @ theta, alpha))) < plain_value - 1e-12:
                theta = theta0
            vertices, theta = _prune_hull(vertices, theta)
            v = _combine(vertices, theta)
        else:
            v = v + gamma * (v_hat - v)
        x = refm.allocation_of(v)

    sol = _assemble_solution(refm, v)
    if sol.certificate.scale >= refm.lam_max * (1.0 - 1e-9):
        warnings.append("certificate scale lam sits at its bound lam_max")
    feas = verify_solution(problem, sol)
    report = SolveReport(
        objective=float(np.sum(alpha_utility(x, alpha))),
        objective_kind="alpha_fair",
        alpha=alpha,
        risk_kind=refm.kind,
        delta=refm.delta,
        epsilon=refm.eps,
        iterations=iters_done,
        final_gap=gap_trace[-1],
        gap_trace=gap_trace,
        objective_trace=obj_trace,
        wall_time_s=time.perf_counter() - t0,
        rho=feas.rho_recomputed,
        metrics=_allocation_metrics(x),
        allocations=x.copy(),
        feasibility=feas,
        warnings=warnings,
    )
    return sol, report


def _extend_hull(vertices, theta, v_hat, gamma):
    for i, u in enumerate(vertices):
        if float(np.max(np.abs(u - v_hat))) <= 1e-12:
            theta = (1.0 - gamma) * theta
            theta[i] += gamma
            return vertices, theta
    vertices = vertices + [v_hat]
    theta = np.append((1.0 - gamma) * theta, gamma)
    return vertices, theta


def _prune_hull(vertices, theta, keep_max: int = 200):
    mask = theta > 1e-14
    if mask.sum() == 0:
        mask[int(np.argmax(theta))] = True
    vertices = [u for u, m in zip(vertices, mask) if m]
    theta = theta[mask]
    if len(vertices) > keep_max:
        order = np.argsort(-theta)[:keep_max]
        order = np.sort(order)
        vertices = [vertices[i] for i in order]
        theta = theta[order]
    theta = theta / theta.sum()
    return vertices, theta


def _combine(vertices, theta):
    out = theta[0] * vertices[0]
    for w, u in zip(theta[1:], vertices[1:]):
        out = out + w * u
    return out


def solve_maxsum(problem: FairProblem, config: Optional[SolverConfig] = None,
                 reformulation: Optional[Reformulation] = None):
    """Maximizes total allocation (no fairness shaping): a single LP over the
    same polytope, cuts included for evar.  Returns (FlowSolution, SolveReport)."""
    config = config or SolverConfig()
    t0 = time.perf_counter()
    refm = reformulation if reformulation is not None else build_reformulation(problem)
    warnings: list = []
    obj = refm.objective_for_allocation_grad(np.ones(problem.network.n_communities))
    v, _ = _solve_polytope_lp(refm, obj, config, context="maxsum",
                              warnings_sink=warnings)
    v = _clip_small_negatives(refm, v)
    x = refm.allocation_of(v)
    sol = _assemble_solution(refm, v)
    feas = verify_solution(problem, sol)
    if sol.certificate.scale >= refm.lam_max * (1.0 - 1e-9):
        warnings.append("certificate scale lam sits at its bound lam_max")
    report = SolveReport(
        objective=float(np.sum(x)),
        objective_kind="max_sum",
        alpha=0.0,
        risk_kind=refm.kind,
        delta=refm.delta,
        epsilon=refm.eps,
        iterations=1,
        final_gap=0.0,
        gap_trace=[0.0],
        objective_trace=[float(np.sum(x))],
        wall_time_s=time.perf_counter() - t0,
        rho=feas.rho_recomputed,
        metrics=_allocation_metrics(x),
        allocations=x.copy(),
        feasibility=feas,
        warnings=warnings,
    )
    return sol, report


def verify_solution(problem: FairProblem, sol: FlowSolution) -> FeasibilityReport:
    """Recomputes every constraint residual from scratch, including the risk
    value through the primal route (independent of the certificate)."""
    inc, scen, risk = problem.incidence, problem.scenarios, problem.risk
    y, z, x = sol.link_flow, sol.route_flow, sol.allocations
    cert = sol.certificate
    balance = float(np.max(np.abs(inc.node_link @ y), initial=0.0))
    vehicle = float(np.max(inc.link_route @ z - y, initial=0.0))
    floor = float(np.max(problem.x_min - x, initial=0.0))
    scen_vio = 0.0
    for i in range(scen.n_scenarios):
        h_i = cert.violations[i]
        scen_vio = max(
            scen_vio,
            float(np.max(inc.node_inflow @ y - (1.0 + h_i) * scen.node_caps[i], initial=0.0)),
            float(np.max(y - (1.0 + h_i) * scen.link_caps[i], initial=0.0)))
    order = float(np.max(cert.violations - (cert.scores - cert.shift), initial=0.0))
    lam_eff = max(cert.scale, _EVAR_LAM_FLOOR)
    conj = conjugate_g(risk.kind, risk.delta, cert.scores / lam_eff, scen.probs)
    if math.isinf(conj):
        # allow the tiny domain slack a simplex vertex can carry
        conj_excess = math.inf
        if risk.kind == "cvar":
            slack = float(np.sum(scen.probs * np.abs(cert.scores))) - cert.scale
            if slack <= 1e-7 * (1.0 + cert.scale):
                conj_excess = lam_eff / (1.0 - risk.delta) - cert.shift - risk.epsilon
        elif risk.kind == "tv":
            slack = float(np.max(np.abs(cert.scores), initial=0.0)) - cert.scale
            if slack <= 1e-7 * (1.0 + cert.scale):
                conj_excess = (2.0 * risk.delta * cert.scale
                               + float(scen.probs @ cert.scores)
                               - cert.shift - risk.epsilon)
    else:
        conj_excess = lam_eff * conj - cert.shift - risk.epsilon
    nonneg = float(max(0.0, -np.min(y, initial=0.0), -np.min(z, initial=0.0)))
    h_star = scenario_violations(inc.node_inflow, y, scen)
    if np.all(np.isfinite(h_star)):
        rho = rho_primal(h_star, scen.probs, risk.kind, risk.delta).rho
    else:
        rho = math.inf
    scale = float(np.max(np.abs(y), initial=0.0))
    return FeasibilityReport(
        balance_residual=balance,
        vehicle_violation=vehicle,
        scenario_violation=scen_vio,
        floor_violation=floor,
        certificate_order_violation=order,
        conjugate_excess=conj_excess,
        nonneg_violation=nonneg,
        rho_recomputed=rho,
        rho_excess=rho - risk.epsilon,
        flow_scale=scale,
    )


def check_alpha_fairness(problem: FairProblem, sol: FlowSolution,
                         n_samples: int = 100, seed: int = 0,
                         tol: Optional[float] = None,
                         config: Optional[SolverConfig] = None,
                         reformulation: Optional[Reformulation] = None) -> FairnessCheck:
    """Samples feasible allocations x' (vertices maximizing random linear
    objectives) and evaluates sum (x'_k - x_k) / x_k^alpha; at an alpha-fair
    optimum every such sum is <= 0 up to the solver gap."""
    config = config or SolverConfig()
    refm = reformulation if reformulation is not None else build_reformulation(problem)
    n_c = problem.network.n_communities
    if tol is None:
        tol = 10.0 * config.gap_tol * n_c
    rng = np.random.default_rng(seed)
    weight = alpha_utility_grad(sol.allocations, problem.alpha)
    sums = []
    basis = None
    for _ in range(n_samples):
        direction = rng.standard_normal(n_c)
        obj = refm.objective_for_allocation_grad(direction)
        v, basis = _solve_polytope_lp(refm, obj, config, basis=basis,
                                      context="fairness check")
        x_cand = refm.allocation_of(v)
        sums.append(float(weight @ (x_cand - sol.allocations)))
    return FairnessCheck(sums=sums, max_sum=float(np.max(sums)), tol=tol,
                         n_samples=n_samples)
