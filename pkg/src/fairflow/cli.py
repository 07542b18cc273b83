"""Command-line front end.

Commands:
    validate  check a network file and a scenario file for consistency
    gen       generate a synthetic case (network + scenarios)
    solve     run the fairness solver, write solution/report/tables/figures
    compare   solve both objectives (fair, maxsum) and write comparison files
    sweep     re-solve both objectives across a list of risk levels

Exit codes: 0 success, 1 input/solver error, 2 infeasible problem.
Diagnostics go to standard error; result summaries to standard output.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from . import __version__
from .errors import FairflowError, InfeasibleProblemError, InputFormatError
from .fairsolver import FairProblem, SolverConfig, solve_fair, solve_maxsum
from .casegen import DEFAULT_REDUCTION_RULES, CaseSpec, generate
from .network import Network, load_network, save_network, validate_network
from .riskmeasures import RiskSpec, ScenarioSet, load_scenarios, save_scenarios
from . import figures, reports

_RISK_KINDS = ("cvar", "evar", "tv")


@dataclass
class RunManifest:
    """Everything needed to reproduce one CLI run, echoed into report.json."""

    command: str
    network_path: str = ""
    scenarios_path: str = ""
    out_dir: str = ""
    risk_kind: str = "cvar"
    delta: float = 0.5
    epsilon: float = 0.1
    alpha: float = 1.0
    x_min: float = 1e-3
    max_iters: int = 100
    gap_tol: float = 1e-6
    corrective: bool = False
    seed: int = 7
    tool_version: str = __version__
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "command": self.command,
            "network": self.network_path,
            "scenarios": self.scenarios_path,
            "out_dir": self.out_dir,
            "risk": {"kind": self.risk_kind, "delta": self.delta,
                     "epsilon": self.epsilon},
            "alpha": self.alpha,
            "x_min": self.x_min,
            "max_iters": self.max_iters,
            "gap_tol": self.gap_tol,
            "corrective": self.corrective,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "wall_time_s": self.wall_time_s,
        }
        out.update(self.extra)
        return out


def _err(msg: str) -> None:
    print(f"fairflow: error: {msg}", file=sys.stderr)


def _note(msg: str) -> None:
    print(f"fairflow: {msg}", file=sys.stderr)


def _solver_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--alpha", type=float, default=1.0,
                   help="fairness exponent (0 = pure throughput, 1 = "
                        "proportional fairness; default 1.0)")
    p.add_argument("--epsilon", type=float, default=0.1,
                   help="risk budget: allowed risk-adjusted capacity "
                        "violation level (default 0.1)")
    p.add_argument("--risk", choices=_RISK_KINDS, default="cvar",
                   help="risk measure kind (default cvar)")
    p.add_argument("--delta", type=float, default=0.5,
                   help="risk aversion level in [0, 1) (default 0.5)")
    p.add_argument("--max-iters", type=int, default=100,
                   help="iteration budget for the solver (default 100)")
    p.add_argument("--gap-tol", type=float, default=1e-6,
                   help="stop when the optimality gap falls below this "
                        "(default 1e-6)")
    p.add_argument("--x-min", type=float, default=1e-3,
                   help="minimum allocation per community (default 1e-3)")
    p.add_argument("--seed", type=int, default=7,
                   help="random seed, recorded in the run manifest "
                        "(default 7)")
    p.add_argument("--corrective", action="store_true",
                   help="re-optimize over the vertex hull each iteration "
                        "(slower per step, far smaller final gap)")
    p.add_argument("--no-plots", action="store_true",
                   help="skip PNG figure rendering")
    return p


def _io_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--scenarios", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairflow",
        description="Risk-aware fair traffic allocation for aerial corridor "
                    "networks.")
    parser.add_argument("--version", action="version",
                        version=f"fairflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    shared = _solver_flags()

    p_val = sub.add_parser("validate", help="check input files",
                           description="Parse and cross-check a network file "
                                       "and a scenario file.")
    p_val.add_argument("--network", required=True)
    p_val.add_argument("--scenarios", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_gen = sub.add_parser("gen", help="generate a synthetic case",
                           description="Generate a synthetic vertiport "
                                       "network with routes, communities, "
                                       "and capacity scenarios.")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=7)
    p_gen.add_argument("--nodes", type=int, default=17,
                       help="number of vertiports (default 17)")
    p_gen.add_argument("--links", type=int, default=72,
                       help="number of directed links, even (default 72)")
    p_gen.add_argument("--routes", type=int, default=200,
                       help="number of candidate routes (default 200)")
    p_gen.add_argument("--communities", type=int, default=46,
                       help="number of demand communities (default 46)")
    p_gen.add_argument("--max-route-len", type=int, default=5,
                       help="maximum links per route (default 5)")
    p_gen.add_argument("--node-cap-range", default="50,200",
                       help="nominal vertiport capacity range LO,HI "
                            "(default 50,200)")
    p_gen.add_argument("--link-cap-range", default="20,100",
                       help="nominal link capacity range LO,HI "
                            "(default 20,100)")
    p_gen.add_argument("--reduction-rules", default=None,
                       help="capacity-reduction scenarios as FRAC:PROB pairs, "
                            "comma separated, e.g. 0.2:0.3,0.4:0.2 (default)")
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", parents=[shared],
                             help="solve the fair allocation problem",
                             description="Solve the risk-constrained fair "
                                         "allocation problem and write "
                                         "solution files.")
    _io_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", parents=[shared],
                           help="fair vs maxsum comparison",
                           description="Solve the fair and the throughput-"
                                       "maximizing objectives on identical "
                                       "constraints and write comparison "
                                       "files.")
    _io_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", parents=[shared],
                           help="re-solve across risk levels",
                           description="Solve both objectives for each risk "
                                       "level in a list; infeasible points "
                                       "are skipped with a warning.")
    _io_flags(p_swp)
    p_swp.add_argument("--deltas", default=None,
                       help="comma-separated risk levels "
                            "(default 0.1,0.2,...,0.9)")
    p_swp.add_argument("--jobs", type=int, default=1,
                       help="concurrent sweep points (default 1)")
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def _load_inputs(args) -> tuple[Network, ScenarioSet]:
    net = load_network(args.network)
    scen = load_scenarios(args.scenarios)
    _check_dimensions(net, scen)
    return net, scen


def _check_dimensions(net: Network, scen: ScenarioSet) -> None:
    if scen.node_caps.shape[1] != net.n_nodes:
        raise InputFormatError(
            f"scenarios: node_caps has {scen.node_caps.shape[1]} entries per "
            f"scenario but the network has {net.n_nodes} nodes")
    if scen.link_caps.shape[1] != net.links.shape[0]:
        raise InputFormatError(
            f"scenarios: link_caps has {scen.link_caps.shape[1]} entries per "
            f"scenario but the network has {net.links.shape[0]} links")


def _manifest(args, command: str) -> RunManifest:
    return RunManifest(
        command=command,
        network_path=str(args.network),
        scenarios_path=str(args.scenarios),
        out_dir=str(args.out),
        risk_kind=args.risk,
        delta=args.delta,
        epsilon=args.epsilon,
        alpha=args.alpha,
        x_min=args.x_min,
        max_iters=args.max_iters,
        gap_tol=args.gap_tol,
        corrective=args.corrective,
        seed=args.seed,
    )


def _problem(net, scen, args, delta=None) -> FairProblem:
    risk = RiskSpec(kind=args.risk,
                    delta=args.delta if delta is None else delta,
                    epsilon=args.epsilon)
    return FairProblem(net, scen, risk, alpha=args.alpha, x_min=args.x_min)


def _config(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, gap_tol=args.gap_tol,
                        corrective=args.corrective)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_validate(args) -> int:
    net = load_network(args.network)
    problems = validate_network(net)
    if problems:
        for line in problems:
            _err(f"network: {line}")
        return 1
    scen = load_scenarios(args.scenarios)
    _check_dimensions(net, scen)
    print(f"network ok: {net.n_nodes} nodes, {net.links.shape[0]} links, "
          f"{len(net.routes)} routes, {net.n_communities} communities")
    print(f"scenarios ok: {len(scen.probs)} scenarios, "
          f"probabilities sum to {float(scen.probs.sum()):g}")
    return 0


def _parse_range(text: str, flag: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 2:
        raise InputFormatError(f"{flag}: expected LO,HI, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise InputFormatError(f"{flag}: {exc}") from None
    return lo, hi


def _parse_rules(text: str) -> tuple:
    rules = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise InputFormatError(
                f"--reduction-rules: expected FRAC:PROB, got {item!r}")
        try:
            rules.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise InputFormatError(f"--reduction-rules: {exc}") from None
    return tuple(rules)


def cmd_gen(args) -> int:
    rules = (DEFAULT_REDUCTION_RULES if args.reduction_rules is None
             else _parse_rules(args.reduction_rules))
    try:
        spec = CaseSpec(
            n_nodes=args.nodes,
            n_links=args.links,
            n_routes=args.routes,
            n_communities=args.communities,
            node_cap_range=_parse_range(args.node_cap_range,
                                        "--node-cap-range"),
            link_cap_range=_parse_range(args.link_cap_range,
                                        "--link-cap-range"),
            reduction_rules=rules,
            max_route_len=args.max_route_len,
            seed=args.seed,
        )
        case = generate(spec)
    except ValueError as exc:
        raise InputFormatError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    net_path = os.path.join(args.out, "network.json")
    scen_path = os.path.join(args.out, "scenarios.json")
    save_network(case.network, net_path, provenance=case.provenance)
    save_scenarios(case.scenarios, scen_path, provenance=case.provenance)
    print(f"wrote {net_path}")
    print(f"wrote {scen_path}")
    return 0


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    net, scen = _load_inputs(args)
    manifest = _manifest(args, "solve")
    problem = _problem(net, scen, args)
    sol, rep = solve_fair(problem, _config(args))
    out = _outdir(args)
    manifest.wall_time_s = time.perf_counter() - t0
    reports.write_solution_json(os.path.join(out, "solution.json"), sol)
    reports.write_report_json(os.path.join(out, "report.json"), rep,
                              run=manifest.to_dict())
    reports.write_communities_csv(os.path.join(out, "communities.csv"),
                                  sol.allocations)
    reports.write_links_csv(os.path.join(out, "links.csv"), sol.link_flow)
    if not args.no_plots:
        figures.plot_allocations(os.path.join(out, "allocations.png"),
                                 sol.allocations)
        figures.plot_gap_trace(os.path.join(out, "gap_trace.png"),
                               rep.gap_trace)
        figures.plot_network(os.path.join(out, "network.png"), net,
                             link_flow=sol.link_flow)
    for w in rep.warnings:
        _note(f"warning: {w}")
    print(f"objective {rep.objective:.6f} after {rep.iterations} iterations, "
          f"final gap {rep.final_gap:.3e}, risk value {rep.rho:.6f} "
          f"(budget {rep.epsilon:g})")
    print(f"wrote solution.json report.json communities.csv links.csv in "
          f"{out}")
    return 0


def cmd_compare(args) -> int:
    t0 = time.perf_counter()
    net, scen = _load_inputs(args)
    manifest = _manifest(args, "compare")
    problem = _problem(net, scen, args)
    config = _config(args)
    fair_sol, fair_rep = solve_fair(problem, config)
    max_sol, max_rep = solve_maxsum(problem, config)
    out = _outdir(args)
    manifest.wall_time_s = time.perf_counter() - t0
    reports.write_compare_csv(os.path.join(out, "compare.csv"),
                              fair_sol.allocations, max_sol.allocations)
    metrics_path = os.path.join(out, "metrics.json")
    reports.write_metrics_json(metrics_path, fair_rep.metrics,
                               max_rep.metrics)
    if not args.no_plots:
        figures.plot_compare(os.path.join(out, "compare.png"),
                             fair_sol.allocations, max_sol.allocations)
    for w in (*fair_rep.warnings, *max_rep.warnings):
        _note(f"warning: {w}")
    fm, mm = fair_rep.metrics, max_rep.metrics
    print(f"fair:   total {fm['total_allocation']:.4f}  min share "
          f"{fm['min_share']:.4f}  jain {fm['jain_index']:.4f}")
    print(f"maxsum: total {mm['total_allocation']:.4f}  min share "
          f"{mm['min_share']:.4f}  jain {mm['jain_index']:.4f}")
    print(f"wrote compare.csv metrics.json in {out}")
    return 0


def _parse_deltas(text) -> list:
    if text is None:
        return [round(0.1 * i, 1) for i in range(1, 10)]
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise InputFormatError(f"--deltas: {exc}") from None
    if not values:
        raise InputFormatError("--deltas: empty list")
    return values


def _sweep_point(net, scen, args, delta):
    problem = _problem(net, scen, args, delta=delta)
    config = _config(args)
    fair_sol, _ = solve_fair(problem, config)
    max_sol, _ = solve_maxsum(problem, config)
    rows = [(delta, k + 1, float(x), "fair")
            for k, x in enumerate(fair_sol.allocations)]
    rows += [(delta, k + 1, float(x), "maxsum")
             for k, x in enumerate(max_sol.allocations)]
    return rows


def cmd_sweep(args) -> int:
    net, scen = _load_inputs(args)
    deltas = _parse_deltas(args.deltas)
    out = _outdir(args)
    csv_path = os.path.join(out, "sweep.csv")
    done: dict = {}
    skipped = []

    def flush() -> None:
        rows = []
        for d in sorted(done):
            rows.extend(done[d])
        reports.write_sweep_csv(csv_path, rows)

    jobs = max(1, args.jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(_sweep_point, net, scen, args, d): d
                   for d in deltas}
        for fut in as_completed(futures):
            d = futures[fut]
            try:
                done[d] = fut.result()
            except InfeasibleProblemError as exc:
                skipped.append(d)
                _note(f"skipping delta={d:g}: infeasible ({exc})")
                continue
            flush()
    if not done:
        raise InfeasibleProblemError(
            "every sweep point was infeasible: "
            + ", ".join(f"{d:g}" for d in sorted(skipped)))
    if not args.no_plots:
        rows = [r for d in sorted(done) for r in done[d]]
        figures.plot_sweep(os.path.join(out, "sweep.png"), rows)
    print(f"swept {len(done)} of {len(deltas)} risk levels "
          f"({len(skipped)} infeasible), wrote {csv_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleProblemError as exc:
        _err(f"infeasible: {exc}")
        return 2
    except (FairflowError, OSError, ValueError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
