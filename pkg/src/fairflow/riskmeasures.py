"""Capacity-violation risk over discrete scenarios.

A scenario is a pair of capacity vectors (node arrivals, link traffic) with a
probability.  For link flows y, each scenario's violation level is the
smallest uniform capacity inflation h making the flow fit.  Risk is the worst
expectation of those levels over an ambiguity set of probability vectors,

    rho_delta(y) = max { q @ h_star : g_delta(q) <= 0, q in simplex },

with three ambiguity families: "cvar" (density bounded by 1/(1-delta)),
"evar" (relative-entropy ball of radius -log(1-delta)) and "tv" (total
variation ball of radius delta).  rho_primal evaluates the maximum directly
(greedy mass transport, or an entropy line search for "evar"); rho_dual goes
through the conjugate reformulation and, for "cvar"/"tv", an LP.  The two
routes are independent and must agree, which the tests enforce.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InputFormatError
from .lpcore import OPTIMAL, LinearProgram, lp_solve

FORMAT_VERSION = 1
RISK_KINDS = ("cvar", "evar", "tv")

_TIE_TOL = 1e-12


@dataclass
class RiskSpec:
    """Risk family and its parameters.

    kind: one of "cvar", "evar", "tv".
    delta: confidence/radius parameter; (0, 1) for cvar and evar, [0, 1] for tv.
    epsilon: admissible risk budget for the routing problem (>= 0).
    """

    kind: str
    delta: float
    epsilon: float = 0.1

    def __post_init__(self):
        _check_kind_delta(self.kind, self.delta)
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")


@dataclass
class ScenarioSet:
    """Discrete capacity scenarios with strictly positive probabilities."""

    node_caps: np.ndarray   # (n_scenarios, n_nodes)
    link_caps: np.ndarray   # (n_scenarios, n_links)
    probs: np.ndarray       # (n_scenarios,)

    @property
    def n_scenarios(self) -> int:
        return len(self.probs)


@dataclass
class RiskEvaluation:
    """Result of a primal risk evaluation."""

    rho: float
    maximizing_q: np.ndarray
    h_star: np.ndarray


def _check_kind_delta(kind: str, delta: float) -> None:
    if kind not in RISK_KINDS:
        raise ValueError(f"unknown risk kind {kind!r}; expected one of {RISK_KINDS}")
    if not math.isfinite(delta):
        raise ValueError("delta must be finite")
    if kind == "tv":
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"tv delta must lie in [0, 1], got {delta}")
    elif not 0.0 < delta < 1.0:
        raise ValueError(f"{kind} delta must lie in (0, 1), got {delta}")


def violation_level(node_inflow: np.ndarray, y: np.ndarray,
                    node_caps: np.ndarray, link_caps: np.ndarray) -> float:
    """Smallest h >= 0 with node_inflow @ y <= (1+h) node_caps and
    y <= (1+h) link_caps; +inf when a zero-capacity element carries flow."""
    y = np.asarray(y, dtype=float)
    arrivals = node_inflow @ y
    worst = 0.0
    for used, cap in ((arrivals, np.asarray(node_caps, float)),
                      (y, np.asarray(link_caps, float))):
        zero = cap <= 0.0
        if np.any(used[zero] > 0.0):
            return math.inf
        ok = ~zero
        if np.any(ok):
            worst = max(worst, float(np.max(used[ok] / cap[ok])) - 1.0)
    return max(0.0, worst)


def scenario_violations(node_inflow: np.ndarray, y: np.ndarray,
                        scenarios: ScenarioSet) -> np.ndarray:
    """Per-scenario violation levels for link flows y."""
    return np.array([
        violation_level(node_inflow, y, scenarios.node_caps[i], scenarios.link_caps[i])
        for i in range(scenarios.n_scenarios)])


def envelope_g(kind: str, delta: float, q: np.ndarray, p: np.ndarray) -> float:
    """The ambiguity-set defining function g_delta(q); the set is
    {q in simplex : g <= 0}."""
    _check_kind_delta(kind, delta)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if kind == "cvar":
        return float(np.max(q / p)) - 1.0 / (1.0 - delta)
    if kind == "tv":
        return float(np.sum(np.abs(q - p))) - 2.0 * delta
    # evar: relative entropy, +inf off the simplex
    if np.min(q) < -1e-12 or abs(float(np.sum(q)) - 1.0) > 1e-9:
        return math.inf
    qc = np.maximum(q, 0.0)
    terms = np.where(qc > 0.0, qc * np.log(np.maximum(qc, 1e-300) / p), 0.0)
    return float(np.sum(terms)) + math.log1p(-delta)


def conjugate_g(kind: str, delta: float, r: np.ndarray, p: np.ndarray) -> float:
    """Convex conjugate of envelope_g in the standard pairing
    sup_q q @ r - g(q); +inf outside the conjugate domain."""
    _check_kind_delta(kind, delta)
    r = np.asarray(r, dtype=float)
    p = np.asarray(p, dtype=float)
    if kind == "cvar":
        if float(np.sum(p * np.abs(r))) > 1.0 + 1e-12:
            return math.inf
        return 1.0 / (1.0 - delta)
    if kind == "tv":
        if float(np.max(np.abs(r), initial=0.0)) > 1.0 + 1e-12:
            return math.inf
        return 2.0 * delta + float(r @ p)
    shift = float(np.max(r))
    return -math.log1p(-delta) + shift + math.log(float(np.sum(p * np.exp(r - shift))))


def _require_finite_h(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise ValueError(
            "violation levels contain +inf: a hard-infeasible scenario "
            "(zero capacity with positive flow) has no finite risk")
    return h


def rho_primal(h: np.ndarray, p: np.ndarray, kind: str, delta: float) -> RiskEvaluation:
    """Maximizes q @ h over the ambiguity set directly.

    cvar: fill the density cap p_i/(1-delta) on the largest h first.
    tv:   move up to delta of mass from the smallest-h entries to the largest.
    evar: the maximizer is a Gibbs tilt of p; the tilt temperature is found
          by a monotone bisection on the entropy budget.
    Ties are broken toward the lowest scenario index throughout.
    """
    _check_kind_delta(kind, delta)
    h = _require_finite_h(h)
    p = np.asarray(p, dtype=float)
    n = len(h)
    if kind == "cvar":
        caps = p / (1.0 - delta)
        order = np.lexsort((np.arange(n), -h))
        q = np.zeros(n)
        remaining = 1.0
        for i in order:
            take = min(caps[i], remaining)
            q[i] = take
            remaining -= take
            if remaining <= 0.0:
                break
        return RiskEvaluation(float(q @ h), q, h)
    if kind == "tv":
        target = int(np.argmax(h))
        q = p.astype(float).copy()
        budget = delta
        moved = 0.0
        for i in np.lexsort((np.arange(n), h)):
            if budget <= 0.0:
                break
            if h[i] >= h[target]:
                continue
            take = min(p[i], budget)
            q[i] -= take
            moved += take
            budget -= take
        q[target] += moved
        return RiskEvaluation(float(q @ h), q, h)
    return _rho_primal_evar(h, p, delta)


def rho_dual(h: np.ndarray, p: np.ndarray, kind: str, delta: float) -> float:
    """Evaluates rho through the conjugate route:
    min over (w, lam, nu) of lam * g*(w / lam) - nu with w - nu >= h, lam >= 0.
    For cvar/tv this is a linear program; for evar it collapses to a
    one-dimensional convex minimization solved by golden section."""
    _check_kind_delta(kind, delta)
    h = _require_finite_h(h)
    p = np.asarray(p, dtype=float)
    n = len(h)
    if kind == "evar":
        return _rho_dual_evar(h, p, delta)
    if kind == "cvar":
        # vars: w (n), nu, lam, t (n); min lam/(1-delta) - nu
        nv = 2 * n + 2
        c = np.zeros(nv)
        c[n] = -1.0
        c[n + 1] = 1.0 / (1.0 - delta)
        rows, rhs = [], []
        for i in range(n):
            row = np.zeros(nv)
            row[i] = -1.0
            row[n] = 1.0
            rows.append(row); rhs.append(-h[i])
        for i in range(n):
            for sign in (1.0, -1.0):
                row = np.zeros(nv)
                row[i] = sign * p[i]
                row[n + 2 + i] = -1.0
                rows.append(row); rhs.append(0.0)
        row = np.zeros(nv)
        row[n + 2:] = 1.0
        row[n + 1] = -1.0
        rows.append(row); rhs.append(0.0)
        lower = np.concatenate([np.full(n + 1, -np.inf), np.zeros(n + 1)])
    else:
        # tv vars: w (n), nu, lam; min 2 delta lam + p @ w - nu
        nv = n + 2
        c = np.zeros(nv)
        c[:n] = p
        c[n] = -1.0
        c[n + 1] = 2.0 * delta
        rows, rhs = [], []
        for i in range(n):
            row = np.zeros(nv)
            row[i] = -1.0
            row[n] = 1.0
            rows.append(row); rhs.append(-h[i])
        for i in range(n):
            for sign in (1.0, -1.0):
                row = np.zeros(nv)
                row[i] = sign
                row[n + 1] = -1.0
                rows.append(row); rhs.append(0.0)
        lower = np.concatenate([np.full(n + 1, -np.inf), np.zeros(1)])
    lp = LinearProgram(c=c, a_ub=np.array(rows), b_ub=np.array(rhs), lower=lower)
    res = lp_solve(lp)
    if res.status != OPTIMAL:
        raise ValueError(f"conjugate-route LP ended {res.status}; rho is finite by construction")
    return float(res.value)


def _max_mass(h: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, float]:
    top = h >= np.max(h) - _TIE_TOL * (1.0 + abs(float(np.max(h))))
    return top, float(np.sum(p[top]))


def _evar_terms(h: np.ndarray, p: np.ndarray, lam: float):
    """Shifted pieces of the evar objective at temperature lam."""
    shift = float(np.max(h))
    expo = np.exp((h - shift) / lam)
    s = float(np.sum(p * expo))
    q = p * expo / s
    return shift, s, q


def _rho_primal_evar(h: np.ndarray, p: np.ndarray, delta: float) -> RiskEvaluation:
    budget = -math.log1p(-delta)
    spread = float(np.max(h) - np.min(h))
    if spread <= _TIE_TOL * (1.0 + abs(float(np.max(h)))):
        q = p.astype(float).copy()
        return RiskEvaluation(float(q @ h), q, h)
    top, mass = _max_mass(h, p)
    if mass >= (1.0 - delta) * (1.0 - 1e-12):
        # The entropy ball already contains the vertex supported on the
        # largest entries; the maximum is max h exactly.
        q = np.where(top, p, 0.0) / mass
        return RiskEvaluation(float(q @ h), q, h)

    def entropy_used(lam: float) -> float:
        shift, s, q = _evar_terms(h, p, lam)
        return (float(q @ h) - shift) / lam - math.log(s)

    lo = 1e-6 * spread
    for _ in range(200):
        if entropy_used(lo) >= budget:
            break
        lo *= 0.25
    hi = 10.0 * spread + 1.0
    for _ in range(200):
        if entropy_used(hi) <= budget:
            break
        hi *= 2.0
    for _ in range(300):
        if hi - lo <= 1e-15 * hi:
            break
        mid = 0.5 * (lo + hi)
        if entropy_used(mid) > budget:
            lo = mid
        else:
            hi = mid
    _, _, q = _evar_terms(h, p, hi)  # hi side: entropy within budget
    return RiskEvaluation(float(q @ h), q, h)


def _rho_dual_evar(h: np.ndarray, p: np.ndarray, delta: float) -> float:
    spread = float(np.max(h) - np.min(h))
    if spread <= _TIE_TOL * (1.0 + abs(float(np.max(h)))):
        return float(p @ h)
    top, mass = _max_mass(h, p)
    if mass >= (1.0 - delta) * (1.0 - 1e-12):
        return float(np.max(h))
    log_term = -math.log1p(-delta)

    def objective(lam: float) -> float:
        shift, s, _ = _evar_terms(h, p, lam)
        return shift + lam * (math.log(s) + log_term)

    def slope(lam: float) -> float:
        shift, s, q = _evar_terms(h, p, lam)
        return math.log(s) + (shift - float(q @ h)) / lam + log_term

    lo = 1e-6 * spread + 1e-12
    hi = 10.0 * spread + 1.0
    for _ in range(200):
        if slope(hi) >= 0.0:
            break
        hi *= 2.0
    lam, value = _golden_min(objective, lo, hi)
    return value


def _golden_min(f, lo: float, hi: float, rel: float = 1e-10,
                max_iter: int = 300) -> tuple[float, float]:
    """Golden-section minimum of a unimodal f on [lo, hi]."""
    ratio = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= rel * max(1.0, abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    return mid, f(mid)


def evaluate_risk(node_inflow: np.ndarray, y: np.ndarray,
                  scenarios: ScenarioSet, spec: RiskSpec) -> RiskEvaluation:
    """Violation levels then primal risk, in one call."""
    h = scenario_violations(node_inflow, y, scenarios)
    if not np.all(np.isfinite(h)):
        raise ValueError("flow uses an element some scenario caps at zero")
    return rho_primal(h, scenarios.probs, spec.kind, spec.delta)


def scenarios_from_dict(raw: dict, where: str = "scenarios") -> ScenarioSet:
    """Parses the scenario JSON structure.  Scenarios with probability zero
    are dropped; the remaining probabilities must be positive and sum to 1."""
    if not isinstance(raw, dict) or raw.get("format_version") != FORMAT_VERSION:
        raise InputFormatError(f"{where}: format_version must be {FORMAT_VERSION}")
    items = raw.get("scenarios")
    if not isinstance(items, list) or not items:
        raise InputFormatError(f"{where}.scenarios: need a non-empty list")
    node_caps, link_caps, probs = [], [], []
    for i, item in enumerate(items):
        tag = f"{where}.scenarios[{i}]"
        if not isinstance(item, dict):
            raise InputFormatError(f"{tag}: must be an object")
        prob = item.get("prob")
        if not isinstance(prob, (int, float)) or not math.isfinite(prob) or prob < 0.0:
            raise InputFormatError(f"{tag}.prob: must be a finite number >= 0")
        if prob == 0.0:
            continue
        caps = {}
        for key in ("node_caps", "link_caps"):
            try:
                arr = np.asarray(item.get(key), dtype=float)
            except (TypeError, ValueError):
                raise InputFormatError(f"{tag}.{key}: not numeric")
            if arr.ndim != 1 or not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
                raise InputFormatError(f"{tag}.{key}: need finite nonnegative values")
            caps[key] = arr
        node_caps.append(caps["node_caps"])
        link_caps.append(caps["link_caps"])
        probs.append(float(prob))
    if not probs:
        raise InputFormatError(f"{where}: every scenario has probability zero")
    lens_n = {len(a) for a in node_caps}
    lens_l = {len(a) for a in link_caps}
    if len(lens_n) != 1 or len(lens_l) != 1:
        raise InputFormatError(f"{where}: scenarios disagree on capacity vector lengths")
    total = sum(probs)
    if abs(total - 1.0) > 1e-9:
        raise InputFormatError(f"{where}: probabilities sum to {total!r}, expected 1")
    return ScenarioSet(np.array(node_caps), np.array(link_caps), np.array(probs))


def scenarios_to_dict(scenarios: ScenarioSet, provenance: Optional[dict] = None) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "scenarios": [
            {
                "prob": float(scenarios.probs[i]),
                "node_caps": [float(v) for v in scenarios.node_caps[i]],
                "link_caps": [float(v) for v in scenarios.link_caps[i]],
            }
            for i in range(scenarios.n_scenarios)
        ],
    }
    if provenance is not None:
        out["provenance"] = provenance
    return out


def load_scenarios(path) -> ScenarioSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputFormatError(f"{path}: {exc.strerror or exc}")
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    return scenarios_from_dict(raw, where=str(path))


def save_scenarios(scenarios: ScenarioSet, path, provenance: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenarios_to_dict(scenarios, provenance), fh, indent=1, sort_keys=True)
        fh.write("\n")
