"""Tests for the alpha-fair solver: utilities, hand-sized instances with
known optima, risk-budget cross-checks against the primal risk evaluator,
fairness certification, and determinism."""

import numpy as np
import pytest

from fairflow.errors import InfeasibleProblemError
from fairflow.fairsolver import (FairProblem, SolverConfig, alpha_utility,
                                 alpha_utility_grad, build_reformulation,
                                 check_alpha_fairness, jain_index, solve_fair,
                                 solve_maxsum, verify_solution)
from fairflow.network import Network
from fairflow.riskmeasures import RiskSpec, ScenarioSet, rho_primal


def _scen(node_caps, link_caps, probs) -> ScenarioSet:
    return ScenarioSet(node_caps=np.asarray(node_caps, dtype=float),
                       link_caps=np.asarray(link_caps, dtype=float),
                       probs=np.asarray(probs, dtype=float))


def _cycle_net() -> Network:
    """Two nodes joined by a forward and a return link; one route on the
    forward link serving one community."""
    return Network(
        n_nodes=2,
        links=np.array([[0, 1], [1, 0]]),
        routes=[np.array([0])],
        n_communities=1,
        route_communities=[np.array([0])],
    )


def _bottleneck_net() -> Network:
    """Two origin nodes feeding one destination, with return links.  Both
    communities compete for the destination's arrival capacity."""
    return Network(
        n_nodes=3,
        links=np.array([[0, 2], [1, 2], [2, 0], [2, 1]]),
        routes=[np.array([0]), np.array([1])],
        n_communities=2,
        route_communities=[np.array([0]), np.array([1])],
    )


def _bottleneck_problem(kind="cvar", delta=0.5, epsilon=0.0, alpha=1.0,
                        node_cap=10.0, scen=None) -> FairProblem:
    net = _bottleneck_net()
    if scen is None:
        scen = _scen([[1e6, 1e6, node_cap]], [[1e6] * 4], [1.0])
    return FairProblem(network=net, scenarios=scen,
                       risk=RiskSpec(kind, delta, epsilon), alpha=alpha)


# ---------------------------------------------------------------------------
# utilities


def test_alpha_utility_values():
    x = np.array([1.0, 4.0])
    assert np.allclose(alpha_utility(x, 1.0), np.log(x))
    assert np.allclose(alpha_utility(x, 0.0), x)
    assert np.allclose(alpha_utility(x, 2.0), -1.0 / x)
    assert np.allclose(alpha_utility(x, 0.5), 2.0 * np.sqrt(x))


def test_alpha_utility_grad_matches_central_difference():
    rng = np.random.default_rng(3)
    for alpha in (0.0, 0.5, 1.0, 2.0, 10.0):
        x = rng.uniform(1e-3, 1e3, size=6)
        step = 1e-6 * np.maximum(x, 1.0)
        for k in range(len(x)):
            up = x.copy(); up[k] += step[k]
            dn = x.copy(); dn[k] -= step[k]
            num = (np.sum(alpha_utility(up, alpha)) -
                   np.sum(alpha_utility(dn, alpha))) / (2.0 * step[k])
            ana = alpha_utility_grad(x, alpha)[k]
            assert num == pytest.approx(ana, rel=1e-5, abs=1e-9)


def test_alpha_utility_rejects_bad_input():
    with pytest.raises(ValueError):
        alpha_utility(np.array([0.0]), 1.0)
    with pytest.raises(ValueError):
        alpha_utility_grad(np.array([1.0]), -0.5)


def test_jain_index():
    assert jain_index([3.0, 3.0, 3.0]) == pytest.approx(1.0)
    assert jain_index([1.0, 0.0, 0.0]) == pytest.approx(1.0 / 3.0)
    assert jain_index([0.0, 0.0]) == 0.0


# ---------------------------------------------------------------------------
# single-community cycle: optimum determined by one capacity


def test_cycle_network_saturates_the_capacity():
    net = _cycle_net()
    scen = _scen([[100.0, 100.0]], [[10.0, 10.0]], [1.0])
    prob = FairProblem(network=net, scenarios=scen,
                       risk=RiskSpec("cvar", 0.5, 0.0), alpha=1.0)
    sol, rep = solve_fair(prob)
    assert sol.allocations[0] == pytest.approx(10.0, abs=1e-6)
    assert rep.final_gap <= 1e-6
    assert rep.feasibility.ok()
    sol2, rep2 = solve_maxsum(prob)
    assert sol2.allocations[0] == pytest.approx(10.0, abs=1e-8)
    assert np.all(sol2.link_flow >= -1e-12)


def test_cycle_network_balance_forces_equal_link_flows():
    net = _cycle_net()
    scen = _scen([[100.0, 100.0]], [[10.0, 10.0]], [1.0])
    prob = FairProblem(network=net, scenarios=scen,
                       risk=RiskSpec("cvar", 0.5, 0.0))
    sol, _ = solve_fair(prob)
    assert sol.link_flow[0] == pytest.approx(sol.link_flow[1], abs=1e-8)


# ---------------------------------------------------------------------------
# two communities sharing one bottleneck


def test_bottleneck_fair_split_is_even():
    prob = _bottleneck_problem(alpha=1.0)
    cfg = SolverConfig(max_iters=200, gap_tol=1e-10, corrective=True)
    sol, rep = solve_fair(prob, cfg)
    assert sol.allocations == pytest.approx([5.0, 5.0], abs=1e-4)
    assert rep.final_gap <= 1e-8
    assert rep.feasibility.ok()
    assert rep.metrics["jain_index"] == pytest.approx(1.0, abs=1e-6)


def test_bottleneck_fair_split_alpha_two():
    prob = _bottleneck_problem(alpha=2.0)
    cfg = SolverConfig(max_iters=200, gap_tol=1e-10, corrective=True)
    sol, _ = solve_fair(prob, cfg)
    assert sol.allocations == pytest.approx([5.0, 5.0], abs=1e-4)


def test_bottleneck_maxsum_total_and_fair_jain_dominates():
    prob = _bottleneck_problem()
    _, fair_rep = solve_fair(prob, SolverConfig(corrective=True, gap_tol=1e-9))
    _, sum_rep = solve_maxsum(prob)
    assert sum_rep.objective == pytest.approx(10.0, abs=1e-6)
    assert sum_rep.objective >= fair_rep.metrics["total_allocation"] - 1e-7
    assert fair_rep.metrics["jain_index"] >= sum_rep.metrics["jain_index"] - 1e-9
    assert fair_rep.metrics["min_share"] >= prob.x_min - 1e-9


def test_alpha_zero_matches_maxsum_total():
    prob = _bottleneck_problem(alpha=0.0)
    _, fair_rep = solve_fair(prob)
    _, sum_rep = solve_maxsum(prob)
    assert fair_rep.metrics["total_allocation"] == pytest.approx(
        sum_rep.objective, abs=1e-8)


# ---------------------------------------------------------------------------
# risk budget: totals pinned by the primal risk evaluator


def _two_scenario_problem(kind, delta, epsilon):
    scen = _scen([[1e6, 1e6, 10.0], [1e6, 1e6, 20.0]],
                 [[1e6] * 4, [1e6] * 4], [0.5, 0.5])
    return _bottleneck_problem(kind=kind, delta=delta, epsilon=epsilon, scen=scen)


def _oracle_total(kind, delta, epsilon):
    """Independent route to the optimal total: bisection on T of
    rho(h(T)) = epsilon with the closed-form violation profile."""

    def rho_of(total):
        h = np.array([max(0.0, total / 10.0 - 1.0), max(0.0, total / 20.0 - 1.0)])
        return rho_primal(h, np.array([0.5, 0.5]), kind, delta).rho

    lo, hi = 10.0, 60.0
    assert rho_of(lo) <= epsilon < rho_of(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rho_of(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("kind,delta", [
    ("cvar", 0.1), ("cvar", 0.6), ("evar", 0.1), ("evar", 0.6),
    ("tv", 0.2), ("tv", 0.7),
])
def test_maxsum_total_matches_risk_bisection_oracle(kind, delta):
    eps = 0.5
    prob = _two_scenario_problem(kind, delta, eps)
    sol, rep = solve_maxsum(prob)
    assert rep.objective == pytest.approx(_oracle_total(kind, delta, eps), abs=1e-5)
    assert rep.rho <= eps + 1e-6
    assert rep.feasibility.ok()
    assert sol.certificate.scale >= 0.0


def test_epsilon_zero_gives_hard_capacity():
    prob = _two_scenario_problem("cvar", 0.5, 0.0)
    _, rep = solve_maxsum(prob)
    assert rep.objective == pytest.approx(10.0, abs=1e-7)


def test_maxsum_total_monotone_in_epsilon_and_delta():
    totals_eps = [solve_maxsum(_two_scenario_problem("cvar", 0.3, e))[1].objective
                  for e in (0.0, 0.25, 0.5)]
    assert totals_eps[0] <= totals_eps[1] + 1e-9 <= totals_eps[2] + 2e-9
    totals_delta = [solve_maxsum(_two_scenario_problem("cvar", d, 0.5))[1].objective
                    for d in (0.05, 0.45, 0.85)]
    assert totals_delta[0] >= totals_delta[1] - 1e-9 >= totals_delta[2] - 2e-9


def test_tv_delta_zero_equals_expectation_budget():
    # At delta = 0 the tv ambiguity set is the single nominal distribution,
    # so the budget constrains the expected violation; a nearly-degenerate
    # cvar set gives the same answer through a different formulation.
    t_tv = solve_maxsum(_two_scenario_problem("tv", 0.0, 0.5))[1].objective
    t_cvar = solve_maxsum(_two_scenario_problem("cvar", 1e-9, 0.5))[1].objective
    assert t_tv == pytest.approx(t_cvar, abs=1e-5)


def test_evar_certificate_has_zero_shift():
    prob = _two_scenario_problem("evar", 0.4, 0.5)
    sol, rep = solve_maxsum(prob)
    assert sol.certificate.shift == 0.0
    assert rep.feasibility.conjugate_excess <= 1e-6


# ---------------------------------------------------------------------------
# fairness certificate


def test_fairness_certificate_accepts_fair_point():
    prob = _bottleneck_problem()
    refm = build_reformulation(prob)
    sol, _ = solve_fair(prob, SolverConfig(corrective=True, gap_tol=1e-10,
                                           max_iters=200), reformulation=refm)
    check = check_alpha_fairness(prob, sol, n_samples=40, seed=11,
                                 reformulation=refm)
    assert check.ok
    assert check.max_sum <= check.tol


def test_fairness_certificate_rejects_lopsided_point():
    prob = _bottleneck_problem()
    refm = build_reformulation(prob)
    lopsided, _ = solve_maxsum(prob, reformulation=refm)
    spread = abs(lopsided.allocations[0] - lopsided.allocations[1])
    if spread < 1.0:
        pytest.skip("max-sum vertex landed on the fair split")
    check = check_alpha_fairness(prob, lopsided, n_samples=40, seed=11,
                                 reformulation=refm)
    assert not check.ok


# ---------------------------------------------------------------------------
# verification and failure modes


def test_verify_solution_flags_tampered_flows():
    prob = _bottleneck_problem()
    sol, _ = solve_fair(prob)
    assert verify_solution(prob, sol).ok()
    sol.link_flow[0] += 1.0
    assert not verify_solution(prob, sol).ok()


def test_unreachable_floor_raises_infeasible():
    net = _bottleneck_net()
    scen = _scen([[1e6, 1e6, 10.0]], [[1e6] * 4], [1.0])
    prob = FairProblem(network=net, scenarios=scen,
                       risk=RiskSpec("cvar", 0.5, 0.0), x_min=100.0)
    with pytest.raises(InfeasibleProblemError):
        solve_fair(prob)


def test_problem_validation():
    net = _bottleneck_net()
    scen = _scen([[1e6, 1e6, 10.0]], [[1e6] * 4], [1.0])
    with pytest.raises(ValueError):
        FairProblem(network=net, scenarios=scen,
                    risk=RiskSpec("cvar", 0.5, 0.1), alpha=-1.0)
    with pytest.raises(ValueError):
        FairProblem(network=net, scenarios=scen,
                    risk=RiskSpec("cvar", 0.5, 0.1), x_min=0.0)
    bad = _scen([[1e6, 1e6]], [[1e6] * 4], [1.0])
    with pytest.raises(ValueError):
        FairProblem(network=net, scenarios=bad, risk=RiskSpec("cvar", 0.5, 0.1))


# ---------------------------------------------------------------------------
# reporting and determinism


def test_report_traces_and_metrics():
    prob = _bottleneck_problem()
    sol, rep = solve_fair(prob)
    assert len(rep.gap_trace) == len(rep.objective_trace) == rep.iterations + 1
    assert rep.final_gap == rep.gap_trace[-1]
    assert rep.objective == pytest.approx(
        float(np.sum(np.log(sol.allocations))), abs=1e-12)
    assert rep.metrics["total_allocation"] == pytest.approx(
        float(np.sum(sol.allocations)), abs=1e-12)
    assert rep.wall_time_s >= 0.0
    assert rep.objective_kind == "alpha_fair"
    assert rep.risk_kind == "cvar"


def test_solver_is_deterministic():
    runs = []
    for _ in range(2):
        prob = _two_scenario_problem("evar", 0.4, 0.5)
        sol, rep = solve_fair(prob, SolverConfig(corrective=True, max_iters=60))
        runs.append((sol.allocations.tobytes(), sol.link_flow.tobytes(),
                     rep.iterations, rep.objective))
    assert runs[0] == runs[1]
