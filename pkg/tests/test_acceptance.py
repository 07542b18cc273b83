"""Acceptance suite: ten end-to-end criteria at fixed tolerances.

Run with `pytest tests/test_acceptance.py -v` for one pass/fail line per
criterion; each test also prints a one-line summary with the measured
numbers (visible with -s or in the captured output).
"""

import time

import numpy as np
import pytest

from fairflow.casegen import CaseSpec, generate
from fairflow.fairsolver import (
    FairProblem,
    SolverConfig,
    build_reformulation,
    check_alpha_fairness,
    solve_fair,
    solve_maxsum,
    verify_solution,
)
from fairflow.lpcore import LinearProgram, lp_solve
from fairflow.riskmeasures import (
    RiskSpec,
    rho_dual,
    rho_primal,
    violation_level,
)

KINDS = ("cvar", "evar", "tv")


def _random_distribution(rng, n, floor=0.01):
    """A probability vector with every entry >= floor."""
    u = rng.uniform(0.2, 1.0, n)
    return floor + (1.0 - floor * n) * (u / u.sum())


# ---------------------------------------------------------------------------
# Shared small-network catalog for criteria 5, 6, and 7.  Solutions are
# cached so later criteria re-verify the same returned solutions instead of
# re-solving.
# ---------------------------------------------------------------------------

def _small_specs():
    shapes = [(4, 6), (4, 8), (5, 8), (5, 10), (6, 10), (6, 12)]
    specs = []
    for i in range(20):
        n, m = shapes[i % len(shapes)]
        specs.append(CaseSpec(
            n_nodes=n,
            n_links=m,
            n_routes=4 + (i % 5),
            n_communities=2 + (i % 3),
            node_cap_range=(30.0, 120.0),
            link_cap_range=(10.0, 60.0),
            max_route_len=3,
            seed=1000 + i,
        ))
    return specs


_SMALL_SPECS = _small_specs()
_SMALL_CASES: dict = {}
_SMALL_SOLVES: dict = {}
_CATALOG: list = []           # (problem, solution) pairs for criterion 7


def _kind_of(i: int) -> str:
    return KINDS[i % 3]


def _small_case(i: int):
    if i not in _SMALL_CASES:
        _SMALL_CASES[i] = generate(_SMALL_SPECS[i])
    return _SMALL_CASES[i]


def _small_problem(i: int, alpha: float) -> FairProblem:
    case = _small_case(i)
    return FairProblem(case.network, case.scenarios,
                       RiskSpec(kind=_kind_of(i), delta=0.5, epsilon=0.1),
                       alpha=alpha)


def _solve_small(i: int, alpha: float):
    """Cached corrective solve to a tight gap; returns
    (problem, solution, report, reformulation)."""
    key = (i, alpha)
    if key not in _SMALL_SOLVES:
        problem = _small_problem(i, alpha)
        refm = build_reformulation(problem)
        config = SolverConfig(max_iters=400, gap_tol=1e-8, corrective=True)
        sol, rep = solve_fair(problem, config, reformulation=refm)
        _SMALL_SOLVES[key] = (problem, sol, rep, refm)
        _CATALOG.append((problem, sol))
    return _SMALL_SOLVES[key]


def _solve_small_maxsum(i: int):
    key = (i, "maxsum")
    if key not in _SMALL_SOLVES:
        problem = _small_problem(i, alpha=0.0)
        sol, rep = solve_maxsum(problem)
        _SMALL_SOLVES[key] = (problem, sol, rep, None)
        _CATALOG.append((problem, sol))
    return _SMALL_SOLVES[key]


# ---------------------------------------------------------------------------
# Criterion 1: the direct (ambiguity-set) and the conjugate (certificate)
# evaluations of every risk measure agree.
# ---------------------------------------------------------------------------

def test_criterion_01_risk_duality():
    deltas = (0.1, 0.5, 0.9)
    t0 = time.perf_counter()
    worst = 0.0
    for kind in KINDS:
        rng = np.random.default_rng(11)
        for i in range(50):
            n = int(rng.integers(2, 7))
            h = rng.uniform(0.0, 10.0, n)
            p = _random_distribution(rng, n)
            delta = deltas[i % 3]
            r_primal = rho_primal(h, p, kind, delta).rho
            r_dual = rho_dual(h, p, kind, delta)
            diff = abs(r_primal - r_dual)
            bound = 1e-6 * (1.0 + abs(r_primal))
            assert diff <= bound, (kind, delta, i, diff, bound)
            worst = max(worst, diff / (1.0 + abs(r_primal)))
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"criterion 1 PASS: primal/dual risk agree on 150 instances, "
          f"worst relative diff {worst:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 2: coherence axioms (monotonicity, translation invariance,
# positive homogeneity, subadditivity).
# ---------------------------------------------------------------------------

def test_criterion_02_coherence_axioms():
    deltas = (0.1, 0.5, 0.9)
    tol = 1e-8
    t0 = time.perf_counter()
    for kind in KINDS:
        rng = np.random.default_rng(13)
        for i in range(200):
            n = int(rng.integers(2, 7))
            delta = deltas[i % 3]
            h1 = rng.uniform(0.0, 10.0, n)
            h2 = rng.uniform(0.0, 10.0, n)
            r1 = rho_primal(h1, p := _random_distribution(rng, n), kind,
                            delta).rho
            r2 = rho_primal(h2, p, kind, delta).rho
            # monotonicity: h1 <= h1 + g pointwise
            grow = rng.uniform(0.0, 3.0, n)
            r_up = rho_primal(h1 + grow, p, kind, delta).rho
            assert r_up >= r1 - tol
            # translation invariance by a constant shift
            c = float(rng.uniform(-np.min(h1), 3.0))
            r_shift = rho_primal(h1 + c, p, kind, delta).rho
            assert abs(r_shift - (r1 + c)) <= tol
            # positive homogeneity
            t = float(rng.uniform(0.1, 2.0))
            r_scaled = rho_primal(t * h1, p, kind, delta).rho
            assert abs(r_scaled - t * r1) <= tol
            # subadditivity
            r_sum = rho_primal(h1 + h2, p, kind, delta).rho
            assert r_sum <= r1 + r2 + tol
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(f"criterion 2 PASS: 4 coherence axioms on 600 pairs within 1e-8, "
          f"{elapsed:.2f}s")


# ---------------------------------------------------------------------------
# Criterion 3: closed-form violation level vs a direct LP.
# ---------------------------------------------------------------------------

def test_criterion_03_violation_level_vs_lp():
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(100):
        n_nodes = int(rng.integers(2, 7))
        n_links = int(rng.integers(2, 11))
        heads = rng.integers(0, n_nodes, n_links)
        node_inflow = np.zeros((n_nodes, n_links))
        node_inflow[heads, np.arange(n_links)] = 1.0
        y = rng.uniform(0.0, 30.0, n_links)
        y[rng.uniform(size=n_links) < 0.2] = 0.0
        node_caps = rng.uniform(1.0, 50.0, n_nodes)
        link_caps = rng.uniform(1.0, 50.0, n_links)
        closed = violation_level(node_inflow, y, node_caps, link_caps)
        # LP: minimize t subject to inflow <= (1+t)*cap per element, t >= 0
        arrivals = node_inflow @ y
        a_ub = np.concatenate([-node_caps, -link_caps])[:, None]
        b_ub = np.concatenate([node_caps - arrivals, link_caps - y])
        res = lp_solve(LinearProgram(c=np.array([1.0]), a_ub=a_ub, b_ub=b_ub,
                                     lower=np.array([0.0])))
        assert res.status == "optimal"
        diff = abs(res.value - closed)
        assert diff <= 1e-8, (closed, res.value)
        worst = max(worst, diff)
    print(f"criterion 3 PASS: closed form matches LP on 100 instances, "
          f"worst diff {worst:.2e}")


# ---------------------------------------------------------------------------
# Criterion 4: limit anchors of the risk measures.
# ---------------------------------------------------------------------------

def test_criterion_04_limit_anchors():
    rng = np.random.default_rng(31)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        h = rng.uniform(0.0, 10.0, n)
        p = _random_distribution(rng, n)
        mean, top = float(p @ h), float(np.max(h))
        # delta -> 0 recovers the expectation (tv admits delta = 0 exactly;
        # cvar/evar require delta > 0, evaluated at 1e-15)
        assert abs(rho_primal(h, p, "tv", 0.0).rho - mean) <= 1e-6
        assert abs(rho_primal(h, p, "cvar", 1e-15).rho - mean) <= 1e-6
        assert abs(rho_primal(h, p, "evar", 1e-15).rho - mean) <= 1e-6
        # full-aversion anchors recover the worst case
        assert abs(rho_primal(h, p, "tv", 1.0).rho - top) <= 1e-6
        dwc = 1.0 - float(np.min(p)) / 2.0
        assert abs(rho_primal(h, p, "cvar", dwc).rho - top) <= 1e-6
    print("criterion 4 PASS: expectation and worst-case anchors within 1e-6 "
          "on 20 vectors")


# ---------------------------------------------------------------------------
# Criterion 5: fairness certificate on tightly solved small networks.
# ---------------------------------------------------------------------------

def test_criterion_05_fairness_certificate():
    t0 = time.perf_counter()
    worst_gap, worst_margin = 0.0, -np.inf
    for i in range(20):
        for alpha in (1.0, 2.0):
            problem, sol, rep, refm = _solve_small(i, alpha)
            assert rep.final_gap <= 1e-8, (i, alpha, rep.final_gap)
            worst_gap = max(worst_gap, rep.final_gap)
            n_c = problem.network.n_communities
            check = check_alpha_fairness(
                problem, sol, n_samples=100, seed=500 + i,
                tol=1e-5 * n_c, reformulation=refm)
            assert check.ok, (i, alpha, check.max_sum, check.tol)
            worst_margin = max(worst_margin, check.max_sum)
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    print(f"criterion 5 PASS: gap <= 1e-8 and 100-sample certificate on "
          f"20 networks x alpha in (1, 2); worst gap {worst_gap:.2e}, "
          f"worst certificate sum {worst_margin:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 6: alpha = 0 reproduces the max-sum objective.
# ---------------------------------------------------------------------------

def test_criterion_06_alpha_zero_equals_maxsum():
    worst = 0.0
    for i in range(20):
        problem = _small_problem(i, alpha=0.0)
        sol0, rep0 = solve_fair(problem,
                                SolverConfig(max_iters=50, gap_tol=1e-9))
        _CATALOG.append((problem, sol0))
        _, _, rep_max, _ = _solve_small_maxsum(i)
        diff = abs(rep0.objective - rep_max.objective)
        assert diff <= 1e-6, (i, rep0.objective, rep_max.objective)
        worst = max(worst, diff)
    print(f"criterion 6 PASS: alpha=0 objective equals max-sum on 20 "
          f"networks, worst diff {worst:.2e}")


# ---------------------------------------------------------------------------
# Criterion 7: feasibility residuals of every returned solution.
# ---------------------------------------------------------------------------

def _assert_residuals(problem, sol):
    feas = verify_solution(problem, sol)
    assert feas.balance_residual <= 1e-8
    assert feas.vehicle_violation <= 1e-8
    assert feas.rho_excess <= 1e-6
    return feas


def test_criterion_07_feasibility_residuals():
    # make sure the catalog covers every risk kind and objective even when
    # this test runs in isolation
    for i in range(6):
        _solve_small(i, 1.0)
        _solve_small_maxsum(i)
    worst_bal = worst_veh = 0.0
    worst_rho = -np.inf
    for problem, sol in _CATALOG:
        feas = _assert_residuals(problem, sol)
        worst_bal = max(worst_bal, feas.balance_residual)
        worst_veh = max(worst_veh, feas.vehicle_violation)
        worst_rho = max(worst_rho, feas.rho_excess)
    print(f"criterion 7 PASS: {len(_CATALOG)} solutions re-verified; worst "
          f"balance {worst_bal:.2e}, route-vs-link {worst_veh:.2e}, "
          f"risk excess {worst_rho:.2e}")


# ---------------------------------------------------------------------------
# Criterion 8: full-scale default case, 100 iterations, within the time box.
# ---------------------------------------------------------------------------

def test_criterion_08_full_scale_run():
    case = generate(CaseSpec())
    problem = FairProblem(case.network, case.scenarios,
                          RiskSpec(kind="cvar", delta=0.5, epsilon=0.1),
                          alpha=1.0)
    t0 = time.perf_counter()
    sol, rep = solve_fair(problem, SolverConfig(max_iters=100,
                                                gap_tol=1e-6))
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    assert rep.iterations <= 100
    _assert_residuals(problem, sol)
    print(f"criterion 8 PASS: default-scale case, {rep.iterations} "
          f"iterations in {elapsed:.1f}s, final gap {rep.final_gap:.3e}, "
          f"objective {rep.objective:.4f}")


# ---------------------------------------------------------------------------
# Criterion 9: evenness across seeds at full scale.
# ---------------------------------------------------------------------------

def test_criterion_09_evenness_across_seeds():
    config = SolverConfig(max_iters=100, gap_tol=1e-6, corrective=True)
    jain_wins = 0
    t0 = time.perf_counter()
    for seed in range(20):
        case = generate(CaseSpec(seed=seed))
        problem = FairProblem(case.network, case.scenarios,
                              RiskSpec(kind="cvar", delta=0.5, epsilon=0.1),
                              alpha=1.0)
        refm = build_reformulation(problem)
        _, fair_rep = solve_fair(problem, config, reformulation=refm)
        _, max_rep = solve_maxsum(problem, config, reformulation=refm)
        fm, mm = fair_rep.metrics, max_rep.metrics
        if fm["jain_index"] >= mm["jain_index"]:
            jain_wins += 1
        assert fm["min_share"] >= mm["min_share"] - 1e-8, seed
    elapsed = time.perf_counter() - t0
    assert jain_wins >= 18, jain_wins
    print(f"criterion 9 PASS: Jain(fair) >= Jain(maxsum) in {jain_wins}/20 "
          f"seeds, min share never worse, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# Criterion 10: monotone totals in the risk level and the risk budget.
# ---------------------------------------------------------------------------

def test_criterion_10_monotone_totals():
    slack = 1e-7
    deltas = (0.2, 0.5, 0.8)
    epsilons = (0.05, 0.1, 0.2)

    def total(case, kind, delta, eps):
        problem = FairProblem(case.network, case.scenarios,
                              RiskSpec(kind=kind, delta=delta, epsilon=eps),
                              alpha=0.0)
        _, rep = solve_maxsum(problem)
        return rep.objective

    t0 = time.perf_counter()
    for i in range(5):
        case = generate(CaseSpec(n_nodes=10, n_links=28, n_routes=40,
                                 n_communities=10, max_route_len=4,
                                 seed=200 + i))
        for kind in KINDS:
            by_delta = [total(case, kind, d, 0.1) for d in deltas]
            for a, b in zip(by_delta, by_delta[1:]):
                assert b <= a + slack, (i, kind, "delta", by_delta)
            by_eps = [total(case, kind, 0.5, e) for e in epsilons]
            for a, b in zip(by_eps, by_eps[1:]):
                assert b >= a - slack, (i, kind, "epsilon", by_eps)
    elapsed = time.perf_counter() - t0
    print(f"criterion 10 PASS: totals nonincreasing in risk level and "
          f"nondecreasing in budget on 5 networks x 3 kinds, {elapsed:.1f}s")
