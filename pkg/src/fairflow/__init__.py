"""Risk-aware fair traffic allocation for aerial corridor networks.

The library splits community demand over candidate routes in a capacitated
vertiport network, maximizing a sum of alpha-fair utilities while keeping a
coherent risk measure (CVaR, EVaR, or total-variation ambiguity) of the
capacity-violation level within a budget.
"""

from .errors import (
    FairflowError,
    InfeasibleProblemError,
    InputFormatError,
    LpStalledError,
    SolverError,
)
from .network import (
    IncidenceMatrices,
    Network,
    build_incidence,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
    validate_network,
)
from .riskmeasures import (
    RiskEvaluation,
    RiskSpec,
    ScenarioSet,
    conjugate_g,
    envelope_g,
    evaluate_risk,
    load_scenarios,
    rho_dual,
    rho_primal,
    save_scenarios,
    scenario_violations,
    scenarios_from_dict,
    scenarios_to_dict,
    violation_level,
)
from .lpcore import LpResult, lp_solve
from .fairsolver import (
    FairProblem,
    FairnessCheck,
    FeasibilityReport,
    FlowSolution,
    Reformulation,
    RiskCertificate,
    SolveReport,
    SolverConfig,
    alpha_utility,
    alpha_utility_grad,
    build_reformulation,
    check_alpha_fairness,
    jain_index,
    solve_fair,
    solve_maxsum,
    verify_solution,
)
from .casegen import (
    CaseSpec,
    DEFAULT_REDUCTION_RULES,
    GeneratedCase,
    generate,
    scenario_from_reductions,
)

__version__ = "0.1.0"

__all__ = [
    "CaseSpec",
    "DEFAULT_REDUCTION_RULES",
    "FairProblem",
    "FairflowError",
    "FairnessCheck",
    "FeasibilityReport",
    "FlowSolution",
    "GeneratedCase",
    "IncidenceMatrices",
    "InfeasibleProblemError",
    "InputFormatError",
    "LpResult",
    "LpStalledError",
    "Network",
    "Reformulation",
    "RiskCertificate",
    "RiskEvaluation",
    "RiskSpec",
    "ScenarioSet",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "alpha_utility",
    "alpha_utility_grad",
    "build_incidence",
    "build_reformulation",
    "check_alpha_fairness",
    "conjugate_g",
    "envelope_g",
    "evaluate_risk",
    "generate",
    "jain_index",
    "load_network",
    "load_scenarios",
    "lp_solve",
    "network_from_dict",
    "network_to_dict",
    "rho_dual",
    "rho_primal",
    "save_network",
    "save_scenarios",
    "scenario_from_reductions",
    "scenario_violations",
    "scenarios_from_dict",
    "scenarios_to_dict",
    "solve_fair",
    "solve_maxsum",
    "validate_network",
    "verify_solution",
    "violation_level",
    "__version__",
]
