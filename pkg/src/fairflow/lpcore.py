"""Dense linear-programming core: two-phase revised simplex.

Solves  minimize c @ v  subject to  a_ub @ v <= b_ub,  a_eq @ v = b_eq,
lower <= v <= upper  (entries of lower/upper may be -inf/+inf).

Pivoting is Dantzig's rule with an automatic switch to Bland's rule after a
run of degenerate pivots, which guarantees termination on degenerate
instances.  Rows and columns are equilibrated with power-of-two factors so
scaling never introduces rounding.  The solver is deterministic: the same
problem bytes produce the same pivot sequence and the same answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import LpStalledError, SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
DEGENERATE_LIMIT = 20
REFACTOR_EVERY = 100


@dataclass
class LinearProgram:
    """A dense LP in inequality/equality form with variable bounds.

    Attributes:
        c: objective coefficients, minimized.
        a_ub, b_ub: rows of a_ub @ v <= b_ub (may be None for none).
        a_eq, b_eq: rows of a_eq @ v = b_eq (may be None for none).
        lower, upper: per-variable bounds; None means 0 and +inf.
    """

    c: np.ndarray
    a_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def n_vars(self) -> int:
        return len(self.c)


@dataclass
class LpResult:
    """Outcome of lp_solve.

    `basis` is an opaque warm-start token: passing it back to lp_solve for a
    problem with identical constraints (only the objective may differ) skips
    phase 1.
    """

    status: str
    value: float
    x: Optional[np.ndarray]
    iterations: int
    basis: Optional[tuple] = None


@dataclass
class LpCheck:
    """Residual report for a candidate point against a LinearProgram."""

    objective: float
    max_eq_residual: float
    max_ub_violation: float
    max_bound_violation: float

    def within(self, tol: float) -> bool:
        return max(self.max_eq_residual, self.max_ub_violation,
                   self.max_bound_violation) <= tol


def lp_check(problem: LinearProgram, v: np.ndarray) -> LpCheck:
    """Evaluates feasibility residuals of `v`; does not solve anything."""
    v = np.asarray(v, dtype=float)
    if v.shape != (problem.n_vars(),):
        raise ValueError(f"candidate has shape {v.shape}, expected ({problem.n_vars()},)")
    eq_res = 0.0
    if problem.a_eq is not None and len(problem.a_eq):
        eq_res = float(np.max(np.abs(problem.a_eq @ v - problem.b_eq)))
    ub_vio = 0.0
    if problem.a_ub is not None and len(problem.a_ub):
        ub_vio = float(max(0.0, np.max(problem.a_ub @ v - problem.b_ub)))
    lo, hi = _bounds_arrays(problem)
    bound_vio = 0.0
    if len(v):
        bound_vio = float(max(0.0, np.max(lo - v), np.max(v - hi)))
    obj = float(problem.c @ v) if len(v) else 0.0
    return LpCheck(obj, eq_res, ub_vio, bound_vio)


def dump_lp(problem: LinearProgram) -> str:
    """Plain-text dump of an LP instance, for reproducing solver failures."""
    lo, hi = _bounds_arrays(problem)
    lines = [f"vars {problem.n_vars()}"]
    lines.append("min " + " ".join(repr(float(x)) for x in problem.c))
    for a, b, tag in ((problem.a_ub, problem.b_ub, "<="),
                      (problem.a_eq, problem.b_eq, "==")):
        if a is None:
            continue
        for row, rhs in zip(a, b):
            lines.append(" ".join(repr(float(x)) for x in row) + f" {tag} {rhs!r}")
    lines.append("lower " + " ".join(repr(float(x)) for x in lo))
    lines.append("upper " + " ".join(repr(float(x)) for x in hi))
    return "\n".join(lines) + "\n"


def _bounds_arrays(problem: LinearProgram) -> tuple[np.ndarray, np.ndarray]:
    n = problem.n_vars()
    lo = np.zeros(n) if problem.lower is None else np.asarray(problem.lower, float)
    hi = np.full(n, np.inf) if problem.upper is None else np.asarray(problem.upper, float)
    return lo, hi


def _pow2_scale(values: np.ndarray) -> np.ndarray:
    """Per-entry power-of-two factors bringing magnitudes near 1."""
    out = np.ones_like(values)
    mask = values > 0
    out[mask] = np.exp2(-np.round(np.log2(values[mask])))
    return out


class _StandardForm:
    """Standard-form image of a LinearProgram: min c @ s, A s = b, s >= 0.

    Keeps everything needed to map a standard-form point back to original
    variables.  Construction depends only on the constraints, not on the
    objective, so a basis stays meaningful when just the objective changes.
    """

    def __init__(self, problem: LinearProgram):
        n = problem.n_vars()
        c = np.asarray(problem.c, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective coefficients must be finite")
        lo, hi = _bounds_arrays(problem)
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")

        a_ub = np.zeros((0, n)) if problem.a_ub is None else np.asarray(problem.a_ub, float)
        b_ub = np.zeros(0) if problem.b_ub is None else np.asarray(problem.b_ub, float).copy()
        a_eq = np.zeros((0, n)) if problem.a_eq is None else np.asarray(problem.a_eq, float)
        b_eq = np.zeros(0) if problem.b_eq is None else np.asarray(problem.b_eq, float).copy()
        for mat, vec, tag in ((a_ub, b_ub, "a_ub"), (a_eq, b_eq, "a_eq")):
            if mat.shape != (len(vec), n):
                raise ValueError(f"{tag} has shape {mat.shape}, expected ({len(vec)}, {n})")
            if not (np.all(np.isfinite(mat)) and np.all(np.isfinite(vec))):
                raise ValueError(f"{tag} rows must be finite")

        # Fixed variables are substituted out before anything else.
        fixed = np.isfinite(lo) & (hi - lo <= 0.0)
        keep = ~fixed
        self.fixed = fixed
        self.fixed_values = np.where(fixed, lo, 0.0)
        if np.any(fixed):
            b_ub = b_ub - a_ub[:, fixed] @ lo[fixed]
            b_eq = b_eq - a_eq[:, fixed] @ lo[fixed]
        a_ub = a_ub[:, keep]
        a_eq = a_eq[:, keep]
        lo_k, hi_k = lo[keep], hi[keep]
        self.keep_index = np.flatnonzero(keep)
        nk = len(self.keep_index)

        # Shift/negate/split each kept variable so every column is >= 0.
        # transform kinds: 0 shift by lower, 1 reflect about upper, 2 free split.
        kinds = np.zeros(nk, dtype=np.int8)
        offsets = np.zeros(nk)
        cols_ub, cols_eq, col_of = [], [], []
        widths = []  # (standard column, width) pairs for finite-width vars
        for j in range(nk):
            if np.isfinite(lo_k[j]):
                kinds[j] = 0
                offsets[j] = lo_k[j]
                b_ub = b_ub - a_ub[:, j] * lo_k[j]
                b_eq = b_eq - a_eq[:, j] * lo_k[j]
                cols_ub.append(a_ub[:, j]); cols_eq.append(a_eq[:, j])
                col_of.append((j, 1.0))
                if np.isfinite(hi_k[j]):
                    widths.append((len(col_of) - 1, hi_k[j] - lo_k[j]))
            elif np.isfinite(hi_k[j]):
                kinds[j] = 1
                offsets[j] = hi_k[j]
                b_ub = b_ub - a_ub[:, j] * hi_k[j]
                b_eq = b_eq - a_eq[:, j] * hi_k[j]
                cols_ub.append(-a_ub[:, j]); cols_eq.append(-a_eq[:, j])
                col_of.append((j, -1.0))
            else:
                kinds[j] = 2
                cols_ub.append(a_ub[:, j]); cols_eq.append(a_eq[:, j])
                col_of.append((j, 1.0))
                cols_ub.append(-a_ub[:, j]); cols_eq.append(-a_eq[:, j])
                col_of.append((j, -1.0))
        self.kinds = kinds
        self.offsets = offsets
        self.col_of = col_of
        n_struct = len(col_of)

        au = np.column_stack(cols_ub) if n_struct else np.zeros((len(b_ub), 0))
        ae = np.column_stack(cols_eq) if n_struct else np.zeros((len(b_eq), 0))
        # Width rows turn finite two-sided bounds into plain inequality rows.
        if widths:
            wrows = np.zeros((len(widths), n_struct))
            wrhs = np.zeros(len(widths))
            for i, (col, wd) in enumerate(widths):
                wrows[i, col] = 1.0
                wrhs[i] = wd
            au = np.vstack([au, wrows])
            b_ub = np.concatenate([b_ub, wrhs])

        m_ub, m_eq = len(b_ub), len(b_eq)
        amat = np.vstack([au, ae]) if m_ub + m_eq else np.zeros((0, n_struct))
        brhs = np.concatenate([b_ub, b_eq])

        # Power-of-two equilibration; depends only on the matrix pattern.
        row_scale = _pow2_scale(np.max(np.abs(amat), axis=1)) if amat.size else np.ones(m_ub + m_eq)
        amat = amat * row_scale[:, None]
        brhs = brhs * row_scale
        col_scale = _pow2_scale(np.max(np.abs(amat), axis=0)) if amat.size else np.ones(n_struct)
        amat = amat * col_scale[None, :]
        self.col_scale = col_scale

        # Slack columns for the <= block, then flip rows to make b >= 0.
        m = m_ub + m_eq
        full = np.zeros((m, n_struct + m_ub))
        full[:, :n_struct] = amat
        full[:m_ub, n_struct:] = np.eye(m_ub)
        flip = brhs < 0
        full[flip] *= -1.0
        brhs = np.abs(brhs)

        self.m_ub = m_ub
        self.m_eq = m_eq
        self.n_struct = n_struct
        self.a = full
        self.b = brhs
        self.flip = flip
        # Rows whose slack entered with +1 can start basic; the rest need an
        # artificial column in phase 1.
        self.slack_basic_ok = np.concatenate([~flip[:m_ub], np.zeros(m_eq, dtype=bool)])
        self.signature = (n, nk, n_struct, m_ub, m_eq)

    def standard_cost(self, c_orig: np.ndarray) -> np.ndarray:
        c = np.asarray(c_orig, dtype=float)[self.keep_index]
        cs = np.zeros(self.a.shape[1])
        for scol, (j, sign) in enumerate(self.col_of):
            cs[scol] = sign * c[j] * self.col_scale[scol]
        return cs

    def to_original(self, s: np.ndarray) -> np.ndarray:
        """Maps a standard-form point back to the original variable vector."""
        vals = np.zeros(len(self.keep_index))
        vals += self.offsets
        for scol, (j, sign) in enumerate(self.col_of):
            vals[j] += sign * s[scol] * self.col_scale[scol]
        out = self.fixed_values.copy()
        out[self.keep_index] = vals
        return out


def _simplex_core(a, b, c, basis, allowed, budget, *, phase_two):
    """Runs revised simplex from `basis`; returns (status, basis, x_b, used).

    `budget` is the remaining pivot allowance; exceeding it raises
    LpStalledError.  `allowed` masks columns permitted to enter.
    """
    m, n = a.shape
    if m == 0:
        entering = np.flatnonzero(allowed & (c < -PIVOT_TOL))
        if len(entering):
            return UNBOUNDED, basis, np.zeros(0), 0
        return OPTIMAL, basis, np.zeros(0), 0

    basis = list(basis)
    b_inv = np.linalg.inv(a[:, basis])
    x_b = b_inv @ b
    degenerate_run = 0
    bland = False
    used = 0
    while True:
        if used and used % REFACTOR_EVERY == 0:
            b_inv = np.linalg.inv(a[:, basis])
            x_b = b_inv @ b
        duals = c[basis] @ b_inv
        reduced = c - duals @ a
        reduced[basis] = 0.0
        candidates = allowed & (reduced < -PIVOT_TOL)
        if not candidates.any():
            return OPTIMAL, basis, x_b, used
        if bland:
            enter = int(np.flatnonzero(candidates)[0])
        else:
            masked = np.where(candidates, reduced, 0.0)
            enter = int(np.argmin(masked))
        d = b_inv @ a[:, enter]
        pos = d > PIVOT_TOL
        if not pos.any():
            if phase_two:
                return UNBOUNDED, basis, x_b, used
            raise SolverError("phase-1 simplex found an unbounded direction")
        ratios = np.full(m, np.inf)
        x_clip = np.maximum(x_b, 0.0)
        ratios[pos] = x_clip[pos] / d[pos]
        theta = float(ratios.min())
        ties = np.flatnonzero(ratios <= theta + 1e-10 * (1.0 + theta))
        leave = int(min(ties, key=lambda i: basis[i]))
        if theta <= 1e-11 * (1.0 + float(np.max(x_clip, initial=0.0))):
            degenerate_run += 1
            if degenerate_run >= DEGENERATE_LIMIT:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        x_b = x_b - theta * d
        x_b[leave] = theta
        piv = d[leave]
        row = b_inv[leave] / piv
        d_adj = d.copy()
        d_adj[leave] = 0.0
        b_inv = b_inv - np.outer(d_adj, row)
        b_inv[leave] = row
        basis[leave] = enter
        used += 1
        if used > budget:
            raise LpStalledError(
                f"simplex exceeded its pivot budget ({budget}) without concluding")


def lp_solve(problem: LinearProgram, start_basis: Optional[tuple] = None,
             max_iter: Optional[int] = None) -> LpResult:
    """Solves a LinearProgram; see module docstring for the method.

    Raises LpStalledError when the pivot cap (default 50 * (rows + cols)) is
    exceeded, and SolverError if the final point fails its own residual
    check, so a wrong answer is never returned silently.
    """
    sf = _StandardForm(problem)
    m, n_std = sf.a.shape
    if n_std == 0:
        # Everything fixed by bounds: feasibility is a direct check.
        v = sf.to_original(np.zeros(0))
        chk = lp_check(problem, v)
        if chk.within(FEAS_TOL * (1.0 + float(np.max(np.abs(sf.b), initial=0.0)))):
            return LpResult(OPTIMAL, chk.objective, v, 0, None)
        return LpResult(INFEASIBLE, np.nan, None, 0, None)

    cap = max_iter if max_iter is not None else 50 * (m + n_std)
    c_std = sf.standard_cost(problem.c)
    # The vertex set of optima is invariant to positive cost scaling, but the
    # absolute entering tolerance is not: huge costs turn rounding noise in
    # the reduced costs into spurious pivots (and bogus unbounded verdicts).
    # Normalize to unit max-norm; the reported value uses the original c.
    c_norm = float(np.max(np.abs(c_std), initial=0.0))
    if c_norm > 1.0:
        c_std = c_std / c_norm
    used_total = 0

    basis = None
    if start_basis is not None:
        basis = _try_warm_basis(sf, start_basis)
    if basis is None:
        basis, used_total = _phase_one(sf, cap)
        if basis is None:
            return LpResult(INFEASIBLE, np.nan, None, used_total, None)

    allowed = np.ones(n_std, dtype=bool)
    status, basis, x_b, used = _simplex_core(
        sf.a, sf.b, c_std, basis, allowed, cap - used_total, phase_two=True)
    used_total += used
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, -np.inf, None, used_total, None)

    # Fresh factorization before reporting, then a residual self-check.
    x_b = np.linalg.solve(sf.a[:, list(basis)], sf.b)
    s = np.zeros(n_std)
    s[list(basis)] = np.maximum(x_b, 0.0)
    v = sf.to_original(s)
    chk = lp_check(problem, v)
    scale = 1.0 + float(np.max(np.abs(sf.b), initial=0.0))
    if chk.max_eq_residual > FEAS_TOL * scale or chk.max_ub_violation > FEAS_TOL * scale \
            or chk.max_bound_violation > 1e-9 * scale:
        raise SolverError(
            "simplex result failed its residual check "
            f"(eq {chk.max_eq_residual:.3e}, ub {chk.max_ub_violation:.3e}, "
            f"bounds {chk.max_bound_violation:.3e})")
    token = (sf.signature, tuple(int(j) for j in basis))
    return LpResult(OPTIMAL, chk.objective, v, used_total, token)


def _phase_one(sf: _StandardForm, cap: int):
    """Finds a feasible basis, or returns (None, pivots) when infeasible."""
    m, n_std = sf.a.shape
    need_art = np.flatnonzero(~sf.slack_basic_ok)
    slack_rows = np.flatnonzero(sf.slack_basic_ok)
    if len(need_art) == 0:
        basis = [n_std - sf.m_ub + int(i) for i in slack_rows]
        return basis, 0

    n_art = len(need_art)
    a1 = np.zeros((m, n_std + n_art))
    a1[:, :n_std] = sf.a
    for k, i in enumerate(need_art):
        a1[i, n_std + k] = 1.0
    c1 = np.zeros(n_std + n_art)
    c1[n_std:] = 1.0
    basis = [0] * m
    for i in slack_rows:
        basis[i] = n_std - sf.m_ub + int(i)
    for k, i in enumerate(need_art):
        basis[i] = n_std + k
    allowed = np.ones(n_std + n_art, dtype=bool)
    allowed[n_std:] = False

    status, basis, x_b, used = _simplex_core(
        a1, sf.b, c1, basis, allowed, cap, phase_two=False)
    value = float(c1[basis] @ np.maximum(x_b, 0.0))
    scale = 1.0 + float(np.max(np.abs(sf.b), initial=0.0))
    if value > 1e-7 * scale:
        return None, used

    if any(j >= n_std for j in basis):
        # Pivot leftover artificials out on any usable entry; rows that offer
        # none are redundant and the artificial simply stays basic at zero.
        b_inv = np.linalg.inv(a1[:, basis])
        in_basis = set(basis)
        for i in range(m):
            if basis[i] < n_std:
                continue
            row = b_inv[i] @ sf.a
            row[[j for j in basis if j < n_std]] = 0.0
            cands = np.flatnonzero(np.abs(row) > 1e-7)
            cands = [j for j in cands if j not in in_basis]
            if not cands:
                continue
            j = int(cands[0])
            d = b_inv @ sf.a[:, j]
            piv = d[i]
            new_row = b_inv[i] / piv
            d_adj = d.copy()
            d_adj[i] = 0.0
            b_inv = b_inv - np.outer(d_adj, new_row)
            b_inv[i] = new_row
            in_basis.discard(basis[i])
            in_basis.add(j)
            basis[i] = j
        redundant = [i for i in range(m) if basis[i] >= n_std]
        if redundant:
            # Rows whose artificial could not be pivoted out are linearly
            # dependent on the others; drop them before phase 2.
            keep = np.array([i for i in range(m) if i not in set(redundant)])
            sf.a = sf.a[keep]
            sf.b = sf.b[keep]
            basis = [basis[i] for i in keep]
    return basis, used


def _try_warm_basis(sf: _StandardForm, token: tuple):
    """Validates a warm-start token; returns a basis list or None."""
    try:
        signature, basis = token
    except (TypeError, ValueError):
        return None
    if signature != sf.signature:
        return None
    m, n_std = sf.a.shape
    basis = list(basis)
    if len(basis) != m or any(not (0 <= j < n_std) for j in basis):
        return None
    if len(set(basis)) != m:
        return None
    try:
        x_b = np.linalg.solve(sf.a[:, basis], sf.b)
    except np.linalg.LinAlgError:
        return None
    if np.min(x_b, initial=0.0) < -1e-7 * (1.0 + float(np.max(np.abs(sf.b), initial=0.0))):
        return None
    return basis
