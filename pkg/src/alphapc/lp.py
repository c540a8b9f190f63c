"""Bounded-variable linear programs.

Three ways to solve them:

* ``solve_lp(lp)`` runs the in-house bounded-variable primal simplex
  (dense basis inverse, Dantzig pricing with a Bland fallback).
* ``solve_lp(lp, backend="highs")`` hands the same program to HiGHS via scipy.
* ``LpSession`` keeps a HiGHS model alive between solves so that rows and
  bounds can be changed incrementally and the simplex warm-starts.  The tree
  search uses it; it can also be told to rebuild and re-solve from scratch
  with the in-house simplex, which is handy for cross-checking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9
REFACTOR_EVERY = 100
BLAND_AFTER = 1000

INF = math.inf


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class LpError(RuntimeError):
    pass


@dataclass(frozen=True)
class Row:
    idx: tuple
    coef: tuple
    sense: str  # "<=", ">=", "="
    rhs: float

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "="):
            raise ValueError(f"bad relation {self.sense!r}")
        if len(self.idx) != len(self.coef):
            raise ValueError("index/coefficient length mismatch")

    @classmethod
    def of(cls, terms: dict, sense: str, rhs: float) -> "Row":
        items = sorted((int(k), float(v)) for k, v in terms.items() if v != 0.0)
        return cls(tuple(k for k, _ in items), tuple(v for _, v in items), sense, float(rhs))

    def activity(self, x: np.ndarray) -> float:
        return float(np.dot(np.asarray(self.coef), x[list(self.idx)])) if self.idx else 0.0

    def violation(self, x: np.ndarray) -> float:
        """Positive amount by which x violates the row (0 when satisfied)."""
        a = self.activity(x)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)

    def bounds(self) -> tuple[float, float]:
        if self.sense == "<=":
            return -INF, self.rhs
        if self.sense == ">=":
            return self.rhs, INF
        return self.rhs, self.rhs


@dataclass
class LinearProgram:
    num_vars: int
    lower: np.ndarray
    upper: np.ndarray
    objective: np.ndarray
    rows: list = field(default_factory=list)
    offset: float = 0.0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()
        self.objective = np.asarray(self.objective, dtype=float).copy()
        for a in (self.lower, self.upper, self.objective):
            if a.shape != (self.num_vars,):
                raise ValueError("bound/objective vectors must have num_vars entries")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        for r in self.rows:
            if r.idx and (min(r.idx) < 0 or max(r.idx) >= self.num_vars):
                raise ValueError("row references an unknown variable")

    def add(self, row: Row):
        if row.idx and (min(row.idx) < 0 or max(row.idx) >= self.num_vars):
            raise ValueError("row references an unknown variable")
        self.rows.append(row)

    def copy(self) -> "LinearProgram":
        return LinearProgram(self.num_vars, self.lower, self.upper, self.objective,
                             list(self.rows), self.offset)

    def dense(self) -> np.ndarray:
        A = np.zeros((len(self.rows), self.num_vars))
        for r, row in enumerate(self.rows):
            A[r, list(row.idx)] = row.coef
        return A

    def max_residual(self, x: np.ndarray) -> float:
        worst = 0.0
        if len(x):
            worst = max(float(np.max(self.lower - x, initial=0.0)),
                        float(np.max(x - self.upper, initial=0.0)))
        for row in self.rows:
            worst = max(worst, row.violation(x))
        return worst


@dataclass
class LpSolution:
    status: LpStatus
    value: float
    primal: np.ndarray
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def dump_lp(lp: LinearProgram, names: Sequence[str] | None = None) -> str:
    """Plain-text listing of an LP for cross-checking with other tools."""
    nm = list(names) if names is not None else [f"v{k}" for k in range(lp.num_vars)]

    def term(c, k):
        return f"{'+' if c >= 0 else '-'} {abs(c):.17g} {nm[k]}"

    out = ["objective", "  min " + " ".join(
        term(c, k) for k, c in enumerate(lp.objective) if c != 0) + f" + {lp.offset:.17g}",
        "rows"]
    for r, row in enumerate(lp.rows):
        lhs = " ".join(term(c, k) for k, c in zip(row.idx, row.coef)) or "0"
        out.append(f"  r{r}: {lhs} {row.sense} {row.rhs:.17g}")
    out.append("bounds")
    for k in range(lp.num_vars):
        out.append(f"  {lp.lower[k]:.17g} <= {nm[k]} <= {lp.upper[k]:.17g}")
    out.append("end")
    return "\n".join(out) + "\n"


def solve_lp(lp: LinearProgram, backend: str = "native") -> LpSolution:
    if backend == "native":
        return _simplex(lp)
    if backend == "highs":
        return _scipy_highs(lp)
    raise ValueError(f"unknown LP backend {backend!r}")


# ---------------------------------------------------------------- native simplex

def _simplex(lp: LinearProgram) -> LpSolution:
    n = lp.num_vars
    rows = []
    for row in lp.rows:
        if not row.idx:
            lo, hi = row.bounds()
            if lo > FEAS_TOL or hi < -FEAS_TOL:
                return LpSolution(LpStatus.INFEASIBLE, math.nan, np.full(n, math.nan), 0)
            continue
        rows.append(row)
    m = len(rows)
    if m == 0:
        x = np.where(lp.objective > 0, lp.lower, np.where(lp.objective < 0, lp.upper, lp.lower))
        x = np.where(np.isfinite(x), x, 0.0)
        if np.any(~np.isfinite(lp.lower) & (lp.objective > 0)) or \
                np.any(~np.isfinite(lp.upper) & (lp.objective < 0)):
            return LpSolution(LpStatus.UNBOUNDED, -INF, x, 0)
        return LpSolution(LpStatus.OPTIMAL, float(lp.objective @ x) + lp.offset, x, 0)

    A = np.zeros((m, n))
    b = np.empty(m)
    for r, row in enumerate(rows):
        A[r, list(row.idx)] = row.coef
        b[r] = row.rhs
    slack_lo = np.array([0.0 if r.sense != ">=" else -INF for r in rows])
    slack_hi = np.array([INF if r.sense == "<=" else 0.0 for r in rows])

    # structural + slack columns; row r reads A x + s_r = b_r
    lo = np.concatenate([lp.lower, slack_lo])
    hi = np.concatenate([lp.upper, slack_hi])
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    resid = b - A @ x[:n]

    basis = np.empty(m, dtype=np.int64)
    art_sign, art_rows = [], []
    for r in range(m):
        s = n + r
        if slack_lo[r] - FEAS_TOL <= resid[r] <= slack_hi[r] + FEAS_TOL:
            basis[r] = s
            x[s] = resid[r]
        else:
            x[s] = slack_lo[r] if resid[r] < slack_lo[r] else slack_hi[r]
            gap = resid[r] - x[s]
            art_rows.append(r)
            art_sign.append(1.0 if gap > 0 else -1.0)
    na = len(art_rows)
    N = n + m + na
    M = np.zeros((m, N))
    M[:, :n] = A
    M[:, n:n + m] = np.eye(m)
    for k, (r, sg) in enumerate(zip(art_rows, art_sign)):
        M[r, n + m + k] = sg
        basis[r] = n + m + k
    lo = np.concatenate([lo, np.zeros(na)])
    hi = np.concatenate([hi, np.full(na, INF)])
    x = np.concatenate([x, np.zeros(na)])
    for k, r in enumerate(art_rows):
        x[n + m + k] = abs(resid[r] - x[n + r])

    state = _Tableau(M, b, lo, hi, x, basis)
    iters = 0
    if na:
        c1 = np.zeros(N)
        c1[n + m:] = 1.0
        status, it = state.run(c1)
        iters += it
        infeas = float(state.x[n + m:].sum())
        if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, math.nan, np.full(n, math.nan), iters)
        state.hi[n + m:] = 0.0
        state.x[n + m:] = np.clip(state.x[n + m:], 0.0, 0.0)
        state.refactor()
    c2 = np.concatenate([lp.objective, np.zeros(m + na)])
    status, it = state.run(c2)
    iters += it
    xs = state.x[:n].copy()
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, -INF, xs, iters)
    xs = np.clip(xs, lp.lower, lp.upper)
    return LpSolution(LpStatus.OPTIMAL, float(lp.objective @ xs) + lp.offset, xs, iters)


class _Tableau:
    """Revised bounded-variable primal simplex state with a dense B^-1."""

    def __init__(self, M, b, lo, hi, x, basis):
        self.M, self.b, self.lo, self.hi, self.x = M, b, lo, hi, x
        self.basis = basis
        self.m, self.N = M.shape
        self.bland = False
        self.degenerate = 0
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.M[:, self.basis])
        nb = np.ones(self.N, dtype=bool)
        nb[self.basis] = False
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def run(self, c):
        it = 0
        is_basic = np.zeros(self.N, dtype=bool)
        while True:
            is_basic[:] = False
            is_basic[self.basis] = True
            pi = c[self.basis] @ self.Binv
            d = c - pi @ self.M
            xv, lo, hi = self.x, self.lo, self.hi
            at_lo = xv <= lo + FEAS_TOL
            at_hi = xv >= hi - FEAS_TOL
            can_up = ~is_basic & ~at_hi & (d < -DUAL_TOL)
            can_dn = ~is_basic & ~at_lo & (d > DUAL_TOL)
            # fixed variables never enter
            fixed = hi - lo <= 0.0
            cand = (can_up | can_dn) & ~fixed
            if not cand.any():
                return LpStatus.OPTIMAL, it
            if self.bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0 if can_up[j] else -1.0
            col = self.Binv @ self.M[:, j]
            change = -direction * col  # d x_B / d t
            xb = xv[self.basis]
            lb, ub = lo[self.basis], hi[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dn = np.where(change < -1e-11, (xb - lb) / -change, INF)
                t_up = np.where(change > 1e-11, (ub - xb) / change, INF)
            t_row = np.maximum(np.minimum(t_dn, t_up), 0.0)
            t_flip = hi[j] - lo[j]
            t_min = float(t_row.min()) if self.m else INF
            if t_flip <= t_min:
                if not math.isfinite(t_flip):
                    return LpStatus.UNBOUNDED, it
                xv[j] = hi[j] if direction > 0 else lo[j]
                xv[self.basis] = xb + t_flip * change
                it += 1
                continue
            if not math.isfinite(t_min):
                return LpStatus.UNBOUNDED, it
            ties = np.flatnonzero(t_row <= t_min + 1e-12)
            if self.bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(col[ties]))])
            leave = int(self.basis[r])
            xv[self.basis] = xb + t_min * change
            xv[j] = xv[j] + direction * t_min
            xv[leave] = lo[leave] if change[r] < 0 else hi[leave]
            if not math.isfinite(xv[leave]):
                xv[leave] = 0.0
            self.basis[r] = j
            piv = col[r]
            e = -col / piv
            e[r] = 1.0 / piv
            row_r = self.Binv[r].copy()
            self.Binv += np.outer(e, row_r)
            self.Binv[r] = e[r] * row_r
            it += 1
            if t_min <= 1e-12:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    self.bland = True
            self.since_refactor += 1
            if self.since_refactor >= REFACTOR_EVERY:
                self.refactor()


# ---------------------------------------------------------------- HiGHS

def _scipy_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    ub_rows, eq_rows = [], []
    for row in lp.rows:
        (eq_rows if row.sense == "=" else ub_rows).append(row)

    def assemble(rows, flip):
        if not rows:
            return None, None
        data, ri, ci, rhs = [], [], [], []
        for r, row in enumerate(rows):
            s = -1.0 if (flip and row.sense == ">=") else 1.0
            data.extend(s * c for c in row.coef)
            ri.extend([r] * len(row.idx))
            ci.extend(row.idx)
            rhs.append(s * row.rhs)
        return csr_matrix((data, (ri, ci)), shape=(len(rows), lp.num_vars)), np.array(rhs)

    A_ub, b_ub = assemble(ub_rows, True)
    A_eq, b_eq = assemble(eq_rows, False)
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(u) else u)
              for l, u in zip(lp.lower, lp.upper)]
    res = linprog(lp.objective, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, math.nan, np.full(lp.num_vars, math.nan), iters)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, -INF, np.full(lp.num_vars, math.nan), iters)
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    x = np.clip(res.x, lp.lower, lp.upper)
    return LpSolution(LpStatus.OPTIMAL, float(lp.objective @ x) + lp.offset, x, iters)


class LpSession:
    """A mutable LP kept warm between solves.

    Rows carry hashable keys so callers can remove them later without
    tracking positions.  With ``backend="highs"`` the model lives in a
    ``highspy.Highs`` object; any other backend name rebuilds a
    ``LinearProgram`` and calls ``solve_lp`` on every solve.
    """

    def __init__(self, lower, upper, cost, offset: float = 0.0, backend: str = "highs"):
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        self.cost = np.asarray(cost, dtype=float).copy()
        self.offset = float(offset)
        self.n = len(self.cost)
        self.backend = backend
        self.keys: list = []
        self.rows: list = []
        self.where: dict = {}
        self.iterations = 0
        self._h = None
        if backend == "highs":
            import highspy
            self._hs = highspy
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.setOptionValue("random_seed", 0)
            h.addVars(self.n, _hinf(self.lower), _hinf(self.upper))
            h.changeColsCost(self.n, np.arange(self.n, dtype=np.int32), self.cost)
            self._h = h

    def __contains__(self, key) -> bool:
        return key in self.where

    @property
    def num_rows(self) -> int:
        return len(self.keys)

    def add_rows(self, keyed_rows):
        keyed_rows = [(k, r) for k, r in keyed_rows if k not in self.where]
        if not keyed_rows:
            return
        for k, r in keyed_rows:
            self.where[k] = len(self.keys)
            self.keys.append(k)
            self.rows.append(r)
        if self._h is not None:
            lo = np.empty(len(keyed_rows))
            hi = np.empty(len(keyed_rows))
            starts, idx, val = [], [], []
            for t, (_, r) in enumerate(keyed_rows):
                lo[t], hi[t] = r.bounds()
                starts.append(len(idx))
                idx.extend(r.idx)
                val.extend(r.coef)
            self._h.addRows(len(keyed_rows), _hinf(lo), _hinf(hi), len(idx),
                            np.array(starts, dtype=np.int32), np.array(idx, dtype=np.int32),
                            np.array(val, dtype=float))

    def remove_rows(self, keys):
        pos = sorted({self.where[k] for k in keys if k in self.where})
        if not pos:
            return
        if self._h is not None:
            self._h.deleteRows(len(pos), np.array(pos, dtype=np.int32))
        drop = set(pos)
        self.keys = [k for t, k in enumerate(self.keys) if t not in drop]
        self.rows = [r for t, r in enumerate(self.rows) if t not in drop]
        self.where = {k: t for t, k in enumerate(self.keys)}

    def set_bounds(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        changed = np.flatnonzero((lower != self.lower) | (upper != self.upper))
        if len(changed) == 0:
            return
        self.lower[changed] = lower[changed]
        self.upper[changed] = upper[changed]
        if self._h is not None:
            self._h.changeColsBounds(len(changed), changed.astype(np.int32),
                                     _hinf(self.lower[changed]), _hinf(self.upper[changed]))

    def row_activity(self, keys) -> np.ndarray:
        """Row activities at the last solution for the given row keys."""
        pos = [self.where[k] for k in keys]
        if self._h is not None:
            return self._row_values[pos]
        x = self._last_x
        return np.array([self.rows[t].activity(x) for t in pos])

    def to_lp(self) -> LinearProgram:
        return LinearProgram(self.n, self.lower, self.upper, self.cost, list(self.rows), self.offset)

    def solve(self) -> LpSolution:
        if self._h is None:
            sol = solve_lp(self.to_lp(), self.backend)
            self.iterations += sol.iterations
            self._last_x = sol.primal
            return sol
        h, hs = self._h, self._hs
        h.run()
        st = h.getModelStatus()
        it = int(h.getInfo().simplex_iteration_count)
        self.iterations += it
        if st == hs.HighsModelStatus.kOptimal:
            return self._optimal(it)
        if st == hs.HighsModelStatus.kInfeasible:
            return LpSolution(LpStatus.INFEASIBLE, math.nan, np.full(self.n, math.nan), it)
        if st in (hs.HighsModelStatus.kUnbounded, hs.HighsModelStatus.kUnboundedOrInfeasible):
            # resolve the ambiguity from scratch
            h.clearSolver()
            h.run()
            st = h.getModelStatus()
            if st == hs.HighsModelStatus.kInfeasible:
                return LpSolution(LpStatus.INFEASIBLE, math.nan, np.full(self.n, math.nan), it)
            return LpSolution(LpStatus.UNBOUNDED, -INF, np.full(self.n, math.nan), it)
        # numerical trouble: retry cold once
        h.clearSolver()
        h.run()
        if h.getModelStatus() == hs.HighsModelStatus.kOptimal:
            return self._optimal(it)
        raise LpError(f"HiGHS returned {h.modelStatusToString(st)}")


    def _optimal(self, it) -> LpSolution:
        hsol = self._h.getSolution()
        x = np.clip(np.array(hsol.col_value), self.lower, self.upper)
        self._row_values = np.array(hsol.row_value)
        return LpSolution(LpStatus.OPTIMAL, float(self.cost @ x) + self.offset, x, it)


def _hinf(a):
    a = np.asarray(a, dtype=float).copy()
    a[a == INF] = 1e30
    a[a == -INF] = -1e30
    return a
