"""Bounded-variable linear programming and branch-and-bound for binary MILPs.

The model container is a plain list of finitely-bounded variables, a minimize
objective, and sparse constraint rows. Two interchangeable LP engines sit
behind `solve_lp`:

* a dense bounded-variable primal simplex (two phases, Dantzig pricing with
  lowest-index tie-breaks, Bland's rule after a degeneracy stall), used for
  small models and as the auditable reference, and
* scipy's HiGHS, used automatically once the dense tableau would be large;
  dispatch-scale models are ~100x faster there.

Engine choice is a pure function of model size, so identical models always
take the identical path and results stay reproducible bit for bit.
`solve_milp` is a best-first branch-and-bound on the relaxation, branching on
the most fractional binary, independent of the LP engine underneath. Every
optimal result is re-verified against the original rows before it is
returned; the solver's own bookkeeping is never trusted for feasibility.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog
from scipy.optimize import milp as scipy_milp

FEAS_TOL = 1e-7          # simplex feasibility / optimality tolerance
RESIDUAL_TOL = 1e-6      # independent post-solve constraint check
INTEGRALITY_TOL = 1e-6
DEFAULT_NODE_LIMIT = 100_000
BLAND_STALL_THRESHOLD = 120   # degenerate pivots before switching to Bland
# rows * (structurals + rows) above which the dense simplex yields to HiGHS
SIMPLEX_CELL_LIMIT = 50_000
# binary count above which the built-in branch-and-bound yields to HiGHS MIP;
# dispatch-scale commitment models have hundreds of binaries and real
# integrality gaps, far past what a cut-free tree search proves in time
BNB_BINARY_LIMIT = 40

LE, GE, EQ = "<=", ">=", "="
_RELS = (LE, GE, EQ)


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class SolverError(RuntimeError):
    """Model construction or numerical failure (not an infeasible status)."""


class LinearProgram:
    """A minimize LP/MILP with named, finitely-bounded variables.

    Integrality is restricted to binary variables (bounds [0, 1]); rows are
    sparse lists of (variable index, coefficient).
    """

    def __init__(self):
        self.names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.is_binary: list[bool] = []
        self.objective: dict[int, float] = {}
        self.objective_offset: float = 0.0
        self.rows: list[tuple[list[tuple[int, float]], str, float]] = []
        self._index: dict[str, int] = {}

    @property
    def num_vars(self) -> int:
        return len(self.names)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str, lower: float, upper: float) -> int:
        if name in self._index:
            raise SolverError(f"duplicate variable {name!r}")
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise SolverError(f"variable {name!r} needs finite bounds")
        if lower > upper:
            raise SolverError(f"variable {name!r} has empty bound range")
        idx = len(self.names)
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.is_binary.append(False)
        self._index[name] = idx
        return idx

    def add_binary(self, name: str) -> int:
        idx = self.add_var(name, 0.0, 1.0)
        self.is_binary[idx] = True
        return idx

    def index(self, name: str) -> int:
        return self._index[name]

    def set_objective(self, idx: int, coefficient: float) -> None:
        if coefficient:
            self.objective[idx] = self.objective.get(idx, 0.0) + float(coefficient)

    def add_row(self, terms: list[tuple[int, float]], rel: str, rhs: float) -> int:
        if rel not in _RELS:
            raise SolverError(f"unknown relation {rel!r}")
        n = self.num_vars
        for idx, _ in terms:
            if not (0 <= idx < n):
                raise SolverError(f"row references undeclared variable index {idx}")
        self.rows.append((list(terms), rel, float(rhs)))
        return len(self.rows) - 1


@dataclass
class MilpSolution:
    status: SolveStatus
    objective: float | None
    values: np.ndarray | None
    names: tuple[str, ...] = ()
    node_count: int = 0
    iterations: int = 0
    _by_name: dict = field(default_factory=dict, repr=False)

    def value(self, name: str) -> float:
        if not self._by_name:
            self._by_name.update({n: i for i, n in enumerate(self.names)})
        return float(self.values[self._by_name[name]])

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


# ---------------------------------------------------------------------------
# standard form shared by both engines


class _Standard:
    """Precomputed arrays for one model; bound vectors vary per solve."""

    def __init__(self, model: LinearProgram):
        n = model.num_vars
        m = model.num_rows
        self.n = n
        self.m = m
        self.names = tuple(model.names)
        self.lb = np.array(model.lower, dtype=float)
        self.ub = np.array(model.upper, dtype=float)
        self.binaries = np.flatnonzero(model.is_binary)
        self.c = np.zeros(n)
        for idx, coef in model.objective.items():
            self.c[idx] = coef
        self.offset = model.objective_offset

        rows_i, cols_i, data = [], [], []
        rels, rhs = [], []
        for r, (terms, rel, b) in enumerate(model.rows):
            merged: dict[int, float] = {}
            for idx, coef in terms:
                merged[idx] = merged.get(idx, 0.0) + coef
            for idx, coef in merged.items():
                if coef:
                    rows_i.append(r)
                    cols_i.append(idx)
                    data.append(coef)
            rels.append(rel)
            rhs.append(b)
        self.rows = sparse.csr_array(
            (data, (rows_i, cols_i)), shape=(m, n)) if m else None
        self.rels = np.array(rels) if m else np.empty(0, dtype="<U2")
        self.rhs = np.array(rhs, dtype=float)

        self.use_highs = m * (n + m) > SIMPLEX_CELL_LIMIT
        self._dense = None
        self._highs = None
        self._csc = None
        self._row_scale = None

    def csc(self):
        if self._csc is None and self.rows is not None:
            self._csc = self.rows.tocsc()
        return self._csc

    # -- dense layout for the built-in simplex --------------------------------
    def dense(self):
        if self._dense is None:
            m, n = self.m, self.n
            A = np.zeros((m, n + 2 * m))
            if m:
                A[:, :n] = self.rows.toarray()
                A[:, n:n + m] = np.eye(m)
                # naive row equilibration
                scale = np.maximum(np.abs(A[:, :n]).max(axis=1, initial=0.0), 1e-12)
                A /= scale[:, None]
                rhs = self.rhs / scale
            else:
                rhs = self.rhs.copy()
            slack_lb = np.zeros(m)
            slack_ub = np.zeros(m)
            for i, rel in enumerate(self.rels):
                if rel == LE:
                    slack_ub[i] = np.inf
                elif rel == GE:
                    slack_lb[i] = -np.inf
            self._dense = (A, rhs, slack_lb, slack_ub)
        return self._dense

    # -- scipy layout ----------------------------------------------------------
    def highs(self):
        if self._highs is None:
            le = self.rels == LE
            ge = self.rels == GE
            eq = self.rels == EQ
            A_ub = b_ub = A_eq = b_eq = None
            if le.any() or ge.any():
                parts, rhs_parts = [], []
                if le.any():
                    parts.append(self.rows[le])
                    rhs_parts.append(self.rhs[le])
                if ge.any():
                    parts.append(-self.rows[ge])
                    rhs_parts.append(-self.rhs[ge])
                A_ub = sparse.vstack(parts, format="csr")
                b_ub = np.concatenate(rhs_parts)
            if eq.any():
                A_eq = self.rows[eq]
                b_eq = self.rhs[eq]
            self._highs = (A_ub, b_ub, A_eq, b_eq)
        return self._highs

    def residual_violation(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> float:
        """Worst constraint/bound violation, scaled by each row's magnitude."""
        worst = max(float(np.max(lb - x, initial=0.0)), float(np.max(x - ub, initial=0.0)))
        if self.m:
            if self._row_scale is None:
                scale = np.zeros(self.m)
                absrows = abs(self.rows)
                scale = np.maximum(absrows.max(axis=1).toarray().ravel(), 1.0)
                self._row_scale = scale
            ax = self.rows @ x
            resid = (ax - self.rhs) / self._row_scale
            for sel, sign in ((self.rels == LE, 1.0), (self.rels == GE, -1.0)):
                if sel.any():
                    worst = max(worst, float(np.max(sign * resid[sel], initial=0.0)))
            eq = self.rels == EQ
            if eq.any():
                worst = max(worst, float(np.max(np.abs(resid[eq]), initial=0.0)))
        return worst


# ---------------------------------------------------------------------------
# engine: scipy HiGHS


def _solve_highs(std: _Standard, lb: np.ndarray, ub: np.ndarray,
                 max_iterations: int | None):
    A_ub, b_ub, A_eq, b_eq = std.highs()
    # engine tolerances two decades inside our own 1e-6 verification gate
    options = {"presolve": True,
               "primal_feasibility_tolerance": 1e-9,
               "dual_feasibility_tolerance": 1e-9}
    if max_iterations is not None:
        options["maxiter"] = max_iterations
    res = linprog(std.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=np.column_stack([lb, ub]), method="highs-ds",
                  options=options)
    iters = int(np.sum(res.nit)) if res.nit is not None else 0
    if res.status == 0:
        return SolveStatus.OPTIMAL, np.asarray(res.x, dtype=float), iters
    if res.status == 2:
        return SolveStatus.INFEASIBLE, None, iters
    if res.status == 3:
        return SolveStatus.UNBOUNDED, None, iters
    return SolveStatus.ITERATION_LIMIT, None, iters


# ---------------------------------------------------------------------------
# engine: dense bounded-variable primal simplex

_BASIC, _AT_LB, _AT_UB = 0, 1, 2


def _solve_simplex(std: _Standard, lb_struct: np.ndarray, ub_struct: np.ndarray,
                   max_iterations: int | None):
    A0, rhs, slack_lb, slack_ub = std.dense()
    m = std.m
    n = std.n
    N = n + 2 * m
    if max_iterations is None:
        max_iterations = 200 * (m + n) + 5000

    A = A0  # artificial columns live in A0[:, n+m:]; signs set below
    lb = np.concatenate([lb_struct, slack_lb, np.zeros(m)])
    ub = np.concatenate([ub_struct, slack_ub, np.zeros(m)])

    # nonbasic start: bound of smallest magnitude (slacks start at 0)
    xval = np.where(np.abs(lb) <= np.abs(ub), lb, ub)
    xval[~np.isfinite(xval)] = 0.0
    vstat = np.where(xval == lb, _AT_LB, _AT_UB).astype(np.int8)

    basis = np.empty(m, dtype=int)
    Binv = np.eye(m)
    art_cols: list[int] = []
    if m:
        resid = rhs - A[:, :n] @ xval[:n]
        for i in range(m):
            s = n + i
            if slack_lb[i] - FEAS_TOL <= resid[i] <= slack_ub[i] + FEAS_TOL:
                basis[i] = s
                xval[s] = min(max(resid[i], slack_lb[i]), slack_ub[i])
                vstat[s] = _BASIC
            else:
                a = n + m + i
                sign = 1.0 if resid[i] >= 0 else -1.0
                A[i, a] = sign
                Binv[i, i] = sign
                basis[i] = a
                xval[a] = abs(resid[i])
                vstat[a] = _BASIC
                ub[a] = np.inf
                art_cols.append(a)

    movable = (ub - lb) > FEAS_TOL
    iters = 0

    def run_phase(costs: np.ndarray) -> str:
        nonlocal iters
        bland = False
        stall = 0
        while True:
            if iters >= max_iterations:
                return "limit"
            iters += 1
            if m:
                y = costs[basis] @ Binv
                d = costs - y @ A
            else:
                d = costs.copy()
            gain = np.where(vstat == _AT_LB, -d, np.where(vstat == _AT_UB, d, -np.inf))
            gain[~movable] = -np.inf
            if bland:
                elig = np.flatnonzero(gain > FEAS_TOL)
                if elig.size == 0:
                    return "optimal"
                j = int(elig[0])
            else:
                j = int(np.argmax(gain))
                if gain[j] <= FEAS_TOL:
                    return "optimal"
            sigma = 1.0 if vstat[j] == _AT_LB else -1.0
            w = Binv @ A[:, j] if m else np.empty(0)
            sw = sigma * w
            t_basic = np.full(m, np.inf)
            if m:
                xB = xval[basis]
                pos = sw > 1e-9
                neg = sw < -1e-9
                t_basic[pos] = (xB[pos] - lb[basis][pos]) / sw[pos]
                t_basic[neg] = (xB[neg] - ub[basis][neg]) / sw[neg]
                np.maximum(t_basic, 0.0, out=t_basic)
            t_own = ub[j] - lb[j]
            t_min = float(t_basic.min()) if m else np.inf
            if t_own <= t_min:
                if not np.isfinite(t_own):
                    return "unbounded"
                xval[basis] -= sigma * t_own * w
                xval[j] = ub[j] if sigma > 0 else lb[j]
                vstat[j] = _AT_UB if sigma > 0 else _AT_LB
                stall = 0
                continue
            if not np.isfinite(t_min):
                return "unbounded"
            cand = np.flatnonzero(t_basic <= t_min + 1e-9)
            if bland:
                r = int(cand[np.argmin(basis[cand])])
            else:
                r = int(cand[np.argmax(np.abs(sw[cand]))])
            t = max(t_basic[r], 0.0)
            if t <= 1e-12:
                stall += 1
                if stall >= BLAND_STALL_THRESHOLD:
                    bland = True
            else:
                stall = 0
            xval[basis] -= sigma * t * w
            leaving = basis[r]
            xval[leaving] = lb[leaving] if sw[r] > 0 else ub[leaving]
            vstat[leaving] = _AT_LB if sw[r] > 0 else _AT_UB
            xval[j] += sigma * t
            basis[r] = j
            vstat[j] = _BASIC
            piv = w[r]
            Binv[r, :] /= piv
            factor = w.copy()
            factor[r] = 0.0
            Binv[:, :] -= np.outer(factor, Binv[r, :])

    cleanup_needed = bool(art_cols)
    if cleanup_needed:
        phase1 = np.zeros(N)
        phase1[art_cols] = 1.0
        outcome = run_phase(phase1)
        if outcome == "limit":
            _reset_artificials(A, n, m)
            return SolveStatus.ITERATION_LIMIT, None, iters
        if float(phase1 @ xval) > 1e-6:
            _reset_artificials(A, n, m)
            return SolveStatus.INFEASIBLE, None, iters
        ub[art_cols] = 0.0
        xval[art_cols] = np.minimum(xval[art_cols], 0.0)
        movable[art_cols] = False

    phase2 = np.zeros(N)
    phase2[:n] = std.c
    outcome = run_phase(phase2)
    if cleanup_needed:
        _reset_artificials(A, n, m)
    if outcome == "limit":
        return SolveStatus.ITERATION_LIMIT, None, iters
    if outcome == "unbounded":
        return SolveStatus.UNBOUNDED, None, iters
    x = xval[:n].copy()
    np.clip(x, lb_struct, ub_struct, out=x)
    return SolveStatus.OPTIMAL, x, iters


def _reset_artificials(A: np.ndarray, n: int, m: int) -> None:
    A[:, n + m:] = 0.0


# ---------------------------------------------------------------------------
# public solves


def _relaxed_bounds(std: _Standard, fixed: dict[int, int] | None = None):
    lb = std.lb.copy()
    ub = std.ub.copy()
    if fixed:
        for idx, val in fixed.items():
            lb[idx] = ub[idx] = float(val)
    return lb, ub


def _solve_bounds(std: _Standard, lb, ub, engine: str, max_iterations):
    if engine == "highs" or (engine == "auto" and std.use_highs):
        status, x, iters = _solve_highs(std, lb, ub, max_iterations)
    else:
        status, x, iters = _solve_simplex(std, lb, ub, max_iterations)
    if status is SolveStatus.OPTIMAL:
        worst = std.residual_violation(x, lb, ub)
        if worst > RESIDUAL_TOL:
            raise SolverError(f"engine returned an infeasible 'optimal' point "
                              f"(residual {worst:.3e})")
    return status, x, iters


def solve_lp(model: LinearProgram, *, engine: str = "auto",
             max_iterations: int | None = None) -> MilpSolution:
    """Solve the LP relaxation (binaries treated as continuous in [0, 1])."""
    std = model if isinstance(model, _Standard) else _Standard(model)
    lb, ub = _relaxed_bounds(std)
    status, x, iters = _solve_bounds(std, lb, ub, engine, max_iterations)
    obj = float(std.c @ x + std.offset) if status is SolveStatus.OPTIMAL else None
    return MilpSolution(status=status, objective=obj, values=x,
                        names=std.names, node_count=0, iterations=iters)


def _fractionality(x: np.ndarray, binaries: np.ndarray) -> tuple[float, int]:
    """Max distance to integrality over the binaries, and its arg (model index)."""
    if binaries.size == 0:
        return 0.0, -1
    vals = x[binaries]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))
    return float(frac[k]), int(binaries[k])


def _repair_binaries(std: _Standard, x: np.ndarray, lb: np.ndarray,
                     ub: np.ndarray) -> np.ndarray:
    """Flip fractional binaries to whichever integer keeps their rows feasible.

    Dispatch models carry many binaries (mode flags, start/stop commands)
    whose integer value is free or one-sidedly constrained at the relaxation
    optimum; flipping them costs nothing and needs no branching. Flips are
    accepted only if every constraint row touching the variable stays
    satisfied, so the result is feasible whenever it is fully integral.
    """
    xr = x.copy()
    if std.binaries.size == 0:
        return xr
    near = np.abs(xr[std.binaries] - np.round(xr[std.binaries])) <= INTEGRALITY_TOL
    snap = std.binaries[near]
    xr[snap] = np.round(xr[snap])
    if std.m == 0:
        xr[std.binaries] = np.round(xr[std.binaries])
        return xr

    csc = std.csc()
    csr = std.rows
    rels, rhs = std.rels, std.rhs

    def rows_ok(row_ids) -> bool:
        for r in row_ids:
            lo, hi = csr.indptr[r], csr.indptr[r + 1]
            val = float(csr.data[lo:hi] @ xr[csr.indices[lo:hi]])
            rel = rels[r]
            if rel == LE:
                if val > rhs[r] + RESIDUAL_TOL:
                    return False
            elif rel == GE:
                if val < rhs[r] - RESIDUAL_TOL:
                    return False
            elif abs(val - rhs[r]) > RESIDUAL_TOL:
                return False
        return True

    for _ in range(3):
        changed = False
        for j in std.binaries:
            v = xr[j]
            if abs(v - round(v)) <= INTEGRALITY_TOL:
                continue
            touched = csc.indices[csc.indptr[j]:csc.indptr[j + 1]]
            order = (1.0, 0.0) if std.c[j] <= 0 else (0.0, 1.0)
            for target in order:
                if not (lb[j] - 1e-12 <= target <= ub[j] + 1e-12):
                    continue
                xr[j] = target
                if rows_ok(touched):
                    changed = True
                    break
                xr[j] = v
        if not changed:
            break
    return xr


def _solve_milp_highs(std: _Standard, node_limit: int) -> MilpSolution:
    """HiGHS branch-and-cut for dispatch-scale models, exact gap settings."""
    constraints = []
    if std.m:
        row_lb = np.where(std.rels == GE, std.rhs,
                          np.where(std.rels == EQ, std.rhs, -np.inf))
        row_ub = np.where(std.rels == LE, std.rhs,
                          np.where(std.rels == EQ, std.rhs, np.inf))
        constraints = LinearConstraint(std.rows, row_lb, row_ub)
    integrality = np.zeros(std.n)
    integrality[std.binaries] = 1
    options = {"mip_rel_gap": 0.0, "node_limit": node_limit, "presolve": True,
               "primal_feasibility_tolerance": 1e-9,
               "dual_feasibility_tolerance": 1e-9,
               "mip_feasibility_tolerance": 1e-9}
    with warnings.catch_warnings():
        # scipy forwards the HiGHS tolerance options verbatim but warns; that
        # pass-through is exactly what we want
        warnings.filterwarnings("ignore", message="Unrecognized options",
                                category=RuntimeWarning)
        res = scipy_milp(c=std.c, constraints=constraints, integrality=integrality,
                         bounds=Bounds(std.lb, std.ub), options=options)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        x[std.binaries] = np.round(x[std.binaries])
        np.clip(x, std.lb, std.ub, out=x)
        worst = std.residual_violation(x, std.lb, std.ub)
        if worst > RESIDUAL_TOL:
            raise SolverError(f"MIP engine returned an infeasible point "
                              f"(residual {worst:.3e})")
        return MilpSolution(status=SolveStatus.OPTIMAL,
                            objective=float(std.c @ x + std.offset), values=x,
                            names=std.names, node_count=nodes, iterations=0)
    status = {2: SolveStatus.INFEASIBLE, 3: SolveStatus.UNBOUNDED}.get(
        res.status, SolveStatus.ITERATION_LIMIT)
    return MilpSolution(status=status, objective=None, values=None,
                        names=std.names, node_count=nodes, iterations=0)


def solve_milp(model: LinearProgram, *, engine: str = "auto",
               node_limit: int = DEFAULT_NODE_LIMIT,
               max_iterations: int | None = None,
               absolute_gap: float = 1e-9) -> MilpSolution:
    """Best-first branch-and-bound over the LP relaxation.

    Branches on the most fractional binary (lowest index on ties). A
    zero-cost repair pass resolves the many slack mode/flag binaries of
    dispatch models without branching, and a round-and-fix heuristic at the
    root usually supplies an incumbent immediately, after which the
    best-first queue proves optimality. Models past `BNB_BINARY_LIMIT`
    binaries route to HiGHS's branch-and-cut (same contract, proven-exact
    gap). Results are deterministic for a given model.
    """
    std = _Standard(model)
    if engine != "simplex" and std.binaries.size > BNB_BINARY_LIMIT:
        return _solve_milp_highs(std, node_limit)
    total_iters = 0
    nodes = 0
    incumbent_x = None
    incumbent_obj = np.inf

    def node_solve(fixed):
        nonlocal total_iters, nodes
        lb, ub = _relaxed_bounds(std, fixed)
        status, x, iters = _solve_bounds(std, lb, ub, engine, max_iterations)
        total_iters += iters
        nodes += 1
        obj = float(std.c @ x + std.offset) if status is SolveStatus.OPTIMAL else None
        return status, x, obj, lb, ub

    def record(xi, lb, ub):
        nonlocal incumbent_x, incumbent_obj
        xi = xi.copy()
        xi[std.binaries] = np.round(xi[std.binaries])
        if std.residual_violation(xi, lb, ub) <= RESIDUAL_TOL:
            obj_i = float(std.c @ xi + std.offset)
            if obj_i < incumbent_obj:
                incumbent_x, incumbent_obj = xi, obj_i
            return obj_i
        return None

    def examine(x, obj, lb, ub, fixed):
        """Harvest incumbents from the node point; -1 means the node is closed.

        A zero-cost repair that lands integral attains the node's own LP
        bound, so the node is solved exactly and needs no children; a costed
        repair still yields an incumbent but leaves the node open. Branching
        always happens on a binary that is fractional in the unrepaired node
        solution, so children genuinely shrink the feasible box.
        """
        closed = False
        xr = _repair_binaries(std, x, lb, ub)
        frac_r, _ = _fractionality(xr, std.binaries)
        if frac_r <= INTEGRALITY_TOL:
            obj_r = record(xr, lb, ub)
            if obj_r is not None and obj_r <= obj + absolute_gap:
                closed = True
        branch_var = -1
        worst = INTEGRALITY_TOL
        for j in std.binaries:
            if fixed and int(j) in fixed:
                continue
            f = abs(x[j] - round(x[j]))
            if f > worst:
                branch_var, worst = int(j), f
        if branch_var < 0 and not closed:
            # free binaries integral at the node optimum: attained exactly
            record(x, lb, ub)
            closed = True
        return -1 if closed else branch_var

    status, x, obj, lb, ub = node_solve(None)
    if status is not SolveStatus.OPTIMAL:
        return MilpSolution(status=status, objective=None, values=None,
                            names=std.names, node_count=nodes, iterations=total_iters)

    heap: list[tuple[float, int, dict[int, int]]] = []
    seq = 0
    branch_var = examine(x, obj, lb, ub, None)
    if branch_var >= 0:
        # round-and-fix fallback incumbent before the search starts
        xr = _repair_binaries(std, x, lb, ub)
        fixed_all = {int(i): int(round(xr[i])) for i in std.binaries}
        h_status, h_x, h_obj, h_lb, h_ub = node_solve(fixed_all)
        if h_status is SolveStatus.OPTIMAL:
            record(h_x, h_lb, h_ub)
        for val in (0, 1):
            heapq.heappush(heap, (obj, seq, {branch_var: val}))
            seq += 1

    limit_hit = False
    while heap:
        bound, _, fixed = heapq.heappop(heap)
        if bound >= incumbent_obj - absolute_gap:
            continue
        if nodes >= node_limit:
            limit_hit = True
            break
        status, x, obj, lb, ub = node_solve(fixed)
        if status is SolveStatus.ITERATION_LIMIT:
            limit_hit = True
            break
        if status is not SolveStatus.OPTIMAL:
            continue
        if obj >= incumbent_obj - absolute_gap:
            continue
        branch_var = examine(x, obj, lb, ub, fixed)
        if branch_var < 0:
            continue
        for val in (0, 1):
            child = dict(fixed)
            child[branch_var] = val
            heapq.heappush(heap, (obj, seq, child))
            seq += 1

    if incumbent_x is None:
        status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.INFEASIBLE
        return MilpSolution(status=status, objective=None, values=None,
                            names=std.names, node_count=nodes, iterations=total_iters)

    x = incumbent_x.copy()
    x[std.binaries] = np.round(x[std.binaries])
    status = SolveStatus.ITERATION_LIMIT if limit_hit else SolveStatus.OPTIMAL
    return MilpSolution(status=status, objective=float(incumbent_obj), values=x,
                        names=std.names, node_count=nodes, iterations=total_iters)


# ---------------------------------------------------------------------------
# textual dump (round-trippable)
#
# Grammar, one declaration per line; '#' starts a comment:
#   minimize: <term> {<term>} [offset <float>] ;
#   row: <term> {<term>} (<=|>=|=) <float> ;
#   var: <name> in [<float>, <float>] ;
#   binary: <name> ;
# where <term> is '+ <float> <name>' or '- <float> <name>' (sign always
# explicit, coefficient always present). Variable declarations precede use.


def dump_lp(model: LinearProgram) -> str:
    def terms(pairs):
        chunks = []
        for idx, coef in pairs:
            sign = "-" if coef < 0 else "+"
            chunks.append(f"{sign} {abs(coef):.12g} {model.names[idx]}")
        return " ".join(chunks) if chunks else "+ 0 _zero_"

    lines = []
    for i, name in enumerate(model.names):
        if model.is_binary[i]:
            lines.append(f"binary: {name} ;")
        else:
            lines.append(f"var: {name} in [{model.lower[i]:.12g}, {model.upper[i]:.12g}] ;")
    obj = sorted(model.objective.items())
    offset = f" offset {model.objective_offset:.12g}" if model.objective_offset else ""
    lines.append(f"minimize: {terms(obj)}{offset} ;")
    for row_terms, rel, rhs in model.rows:
        lines.append(f"row: {terms(row_terms)} {rel} {rhs:.12g} ;")
    return "\n".join(lines) + "\n"


def parse_lp(text: str) -> LinearProgram:
    model = LinearProgram()

    def parse_terms(tokens):
        pairs = []
        i = 0
        while i < len(tokens):
            sign, coef, name = tokens[i], tokens[i + 1], tokens[i + 2]
            if sign not in "+-":
                raise SolverError(f"expected sign, got {sign!r}")
            value = float(coef) * (-1.0 if sign == "-" else 1.0)
            if name != "_zero_":
                pairs.append((model.index(name), value))
            i += 3
        return pairs

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not line.endswith(";"):
            raise SolverError(f"line {lineno}: missing ';'")
        head, _, body = line[:-1].partition(":")
        tokens = body.split()
        kind = head.strip()
        try:
            if kind == "var":
                name = tokens[0]
                lo = float(tokens[2].strip("[,"))
                hi = float(tokens[3].strip("],"))
                model.add_var(name, lo, hi)
            elif kind == "binary":
                model.add_binary(tokens[0])
            elif kind == "minimize":
                if len(tokens) >= 2 and tokens[-2] == "offset":
                    model.objective_offset = float(tokens[-1])
                    tokens = tokens[:-2]
                for idx, coef in parse_terms(tokens):
                    model.set_objective(idx, coef)
            elif kind == "row":
                rel_pos = next(i for i, t in enumerate(tokens) if t in _RELS)
                pairs = parse_terms(tokens[:rel_pos])
                model.add_row(pairs, tokens[rel_pos], float(tokens[rel_pos + 1]))
            else:
                raise SolverError(f"unknown declaration {kind!r}")
        except (IndexError, ValueError, KeyError) as exc:
            raise SolverError(f"line {lineno}: {exc}") from exc
    return model
