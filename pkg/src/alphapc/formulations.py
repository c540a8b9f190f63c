"""The two integer programs and every inequality family / fixing defined over them.

Variable layouts
  assignment model:  y_j -> j,  x_ij -> n + i(n-1) + j - [j > i],  z -> n + n(n-1)
  threshold model:   y_j -> j,  u_t -> n + t - 1 for ladder index t = 1..K-1
                     (ladder index t is the (t+1)-th smallest distance)

Separation routines take a point ``v`` (a full primal vector) and return the
violated members of a family as ``Cut`` objects, most violated first.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .instance import DistanceLadder, Instance, build_ladder, sigma_order
from .lp import LinearProgram, Row

VIOL_TOL = 1e-6
GLOBAL, LOCAL = "global", "local"


@dataclass(frozen=True)
class Cut:
    row: Row
    family: str
    key: tuple
    scope: str = GLOBAL
    level: float = 0.0  # LB (lifted families) or UB (13b) the cut was derived from
    violation: float = field(default=0.0, compare=False)

    def with_scope(self, scope: str) -> "Cut":
        return Cut(self.row, self.family, self.key, scope, self.level, self.violation)


def _by_violation(cuts):
    return sorted(cuts, key=lambda c: -c.violation)


# ====================================================================== APC1

@dataclass(eq=False)
class Apc1Model:
    inst: Instance
    full: bool
    num_init: int | None
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    rows: list
    xidx: np.ndarray  # n x n, -1 on the diagonal

    @property
    def n(self) -> int:
        return self.inst.n

    @property
    def alpha(self) -> int:
        return self.inst.alpha

    @property
    def num_vars(self) -> int:
        return len(self.cost)

    @property
    def z(self) -> int:
        return self.num_vars - 1

    def y(self, j: int) -> int:
        return j

    def x(self, i: int, j: int) -> int:
        if i == j:
            raise KeyError("no x variable on the diagonal")
        return int(self.xidx[i, j])

    def unpack(self, v):
        """(y, X, z) with X[i, j] = x_ij and zero diagonal."""
        v = np.asarray(v, dtype=float)
        X = np.where(self.xidx >= 0, v[np.maximum(self.xidx, 0)], 0.0)
        return v[:self.n], X, float(v[self.z])

    def pack(self, y, X, z) -> np.ndarray:
        v = np.zeros(self.num_vars)
        v[:self.n] = y
        off = self.xidx >= 0
        v[self.xidx[off]] = np.asarray(X, dtype=float)[off]
        v[self.z] = z
        return v

    def relaxation(self, extra=()) -> LinearProgram:
        return LinearProgram(self.num_vars, self.lower, self.upper, self.cost,
                             [c.row for c in self.rows] + [c.row for c in extra])

    def integer_vars(self) -> np.ndarray:
        return np.arange(self.z)


def build_apc1(inst: Instance, full: bool = True, num_init: int | None = None,
               z_lower: float | None = None) -> Apc1Model:
    """Assignment model.  With ``full=False`` the linking rows x_ij <= y_j and
    d_ij x_ij <= z are only created for the ``num_init`` nearest j of each i."""
    n = inst.n
    xidx = -np.ones((n, n), dtype=np.int64)
    k = n
    for i in range(n):
        for j in range(n):
            if i != j:
                xidx[i, j] = k
                k += 1
    nv = k + 1
    lower = np.zeros(nv)
    upper = np.ones(nv)
    off = ~np.eye(n, dtype=bool)
    lower[-1] = float(inst.dist[off].min()) if z_lower is None else z_lower
    upper[-1] = np.inf
    cost = np.zeros(nv)
    cost[-1] = 1.0
    m = Apc1Model(inst, full, num_init, lower, upper, cost, [], xidx)
    m.rows.append(row_2b(m))
    m.rows.extend(row_2c(m, i) for i in range(n))
    for i in range(n):
        targets = sigma_order(inst, i)
        if not full:
            targets = targets[:num_init if num_init is not None else 10]
        m.rows.extend(row_2d(m, i, j) for j in targets)
        m.rows.extend(row_2e(m, i, j) for j in targets)
    return m


def row_2b(m) -> Cut:
    return Cut(Row(tuple(range(m.n)), (1.0,) * m.n, "=", float(m.inst.p)), "2b", ("2b",))


def row_2c(m: Apc1Model, i: int) -> Cut:
    terms = {m.x(i, j): 1.0 for j in range(m.n) if j != i}
    terms[m.y(i)] = float(m.alpha)
    return Cut(Row.of(terms, "=", m.alpha), "2c", ("2c", i))


def row_2d(m: Apc1Model, i: int, j: int) -> Cut:
    return Cut(Row.of({m.x(i, j): 1.0, m.y(j): -1.0}, "<=", 0.0), "2d", ("2d", i, j))


def row_2e(m: Apc1Model, i: int, j: int) -> Cut:
    return Cut(Row.of({m.x(i, j): float(m.inst.dist[i, j]), m.z: -1.0}, "<=", 0.0),
               "2e", ("2e", i, j))


def row_9(m: Apc1Model, i: int) -> Cut:
    terms = {m.x(i, j): float(m.inst.dist[i, j]) for j in range(m.n) if j != i}
    terms[m.z] = -float(m.alpha)
    return Cut(Row.of(terms, "<=", 0.0), "9", ("9", i))


def row_10(m: Apc1Model, i: int, j: int) -> Cut:
    return Cut(Row.of({m.y(i): 1.0, m.x(i, j): 1.0}, "<=", 1.0), "10", ("10", i, j))


def row_11a(m: Apc1Model, i: int, j: int, LB: float, scope=GLOBAL) -> Cut:
    terms = {m.y(i): LB, m.x(i, j): max(LB, float(m.inst.dist[i, j])), m.z: -1.0}
    return Cut(Row.of(terms, "<=", 0.0), "11a", ("11a", i, j), scope, LB)


def row_11b(m: Apc1Model, i: int, j: int, LB: float, scope=GLOBAL) -> Cut:
    terms = {m.x(i, j): max(LB, float(m.inst.dist[i, j])), m.z: -1.0}
    return Cut(Row.of(terms, "<=", 0.0), "11b", ("11b", i, j), scope, LB)


def row_11c(m: Apc1Model, i: int, LB: float, scope=GLOBAL) -> Cut:
    a = float(m.alpha)
    terms = {m.x(i, j): max(LB, float(m.inst.dist[i, j])) for j in range(m.n) if j != i}
    terms[m.y(i)] = a * LB
    terms[m.z] = -a
    return Cut(Row.of(terms, "<=", 0.0), "11c", ("11c", i), scope, LB)


def row_13b(m: Apc1Model, i: int, UB: float) -> Cut:
    terms = {m.y(j): 1.0 for j in range(m.n) if j != i and m.inst.dist[i, j] <= UB}
    terms[m.y(i)] = terms.get(m.y(i), 0.0) + float(m.alpha)
    return Cut(Row.of(terms, ">=", m.alpha), "13b", ("13b", i), GLOBAL, UB)


def row_13a(m: Apc1Model, i: int, n_alpha, X) -> Cut:
    terms = {m.y(j): 1.0 for j in n_alpha}
    for j in X:
        terms[m.x(i, j)] = terms.get(m.x(i, j), 0.0) + 1.0
    return Cut(Row.of(terms, "<=", m.alpha), "13a",
               ("13a", i, tuple(sorted(n_alpha)), tuple(sorted(X))))


def _violated(cands, tol=VIOL_TOL):
    return _by_violation([c for c in cands if c.violation > tol])


def _attach(cut: Cut, v) -> Cut:
    return Cut(cut.row, cut.family, cut.key, cut.scope, cut.level, cut.row.violation(v))


def apc1_core_cuts(m: Apc1Model, v, families=("2d", "2e"), tol=VIOL_TOL) -> list:
    """Violated linking rows x_ij <= y_j and d_ij x_ij <= z (exhaustive)."""
    y, X, z = m.unpack(v)
    D = m.inst.dist
    out = []
    if "2e" in families:
        for i, j in zip(*np.nonzero((D * X - z > tol) & (m.xidx >= 0))):
            out.append(_attach(row_2e(m, int(i), int(j)), v))
    if "2d" in families:
        for i, j in zip(*np.nonzero((X - y[None, :] > tol) & (m.xidx >= 0))):
            out.append(_attach(row_2d(m, int(i), int(j)), v))
    return _violated(out, tol)


def apc1_valid_cuts(m: Apc1Model, v, families=("9", "10"), tol=VIOL_TOL) -> list:
    y, X, z = m.unpack(v)
    D = m.inst.dist
    out = []
    if "9" in families:
        for i in np.flatnonzero((D * X).sum(axis=1) - m.alpha * z > tol):
            out.append(_attach(row_9(m, int(i)), v))
    if "10" in families:
        for i, j in zip(*np.nonzero((y[:, None] + X - 1.0 > tol) & (m.xidx >= 0))):
            out.append(_attach(row_10(m, int(i), int(j)), v))
    return _violated(out, tol)


def apc1_lifted_cuts(m: Apc1Model, v, LB: float, families=("11a", "11c"),
                     scope=GLOBAL, tol=VIOL_TOL) -> list:
    y, X, z = m.unpack(v)
    W = np.maximum(LB, m.inst.dist)
    off = m.xidx >= 0
    out = []
    if "11a" in families:
        for i, j in zip(*np.nonzero((LB * y[:, None] + W * X - z > tol) & off)):
            out.append(_attach(row_11a(m, int(i), int(j), LB, scope), v))
    if "11b" in families:
        for i, j in zip(*np.nonzero((W * X - z > tol) & off)):
            out.append(_attach(row_11b(m, int(i), int(j), LB, scope), v))
    if "11c" in families:
        lhs = m.alpha * LB * y + np.where(off, W * X, 0.0).sum(axis=1) - m.alpha * z
        for i in np.flatnonzero(lhs > tol):
            out.append(_attach(row_11c(m, int(i), LB, scope), v))
    return _violated(out, tol)


def separate_13a_heuristic(m: Apc1Model, v, i: int, order=None, tol=VIOL_TOL):
    """Grow X from the far end of i's order; pick the alpha largest-y points
    strictly ahead of X as N_alpha; return the first violated cut or None."""
    y, X, _ = m.unpack(v)
    order = sigma_order(m.inst, i) if order is None else order
    a = m.alpha
    xsum = 0.0
    for cut_pos in range(len(order) - 1, -1, -1):
        xsum += X[i, order[cut_pos]]
        cands = order[:cut_pos]
        if len(cands) < a:
            return None
        ys = np.array([y[j] for j in cands])
        pick = np.argsort(-ys, kind="stable")[:a]
        n_alpha = [cands[k] for k in pick]
        lhs = float(ys[pick].sum()) + xsum
        if lhs - a > tol:
            return _attach(row_13a(m, i, n_alpha, order[cut_pos:]), v)
    return None


def enumerate_13a(m: Apc1Model) -> list:
    """Every member of the assigned-to-later family (small instances only).

    N_alpha ranges over all alpha-subsets of N; i itself sorts by (0, i).
    """
    n, a = m.n, m.alpha
    out = []
    for i in range(n):
        key = {j: (float(m.inst.dist[i, j]) if j != i else 0.0, j) for j in range(n)}
        for n_alpha in itertools.combinations(range(n), a):
            top = max(key[j] for j in n_alpha)
            X = [j for j in range(n) if j != i and key[j] > top]
            out.append(row_13a(m, i, n_alpha, X))
    return out


def apc1_optimality_cuts(m: Apc1Model, v, UB: float, mode: str = "heuristic",
                         families=("13b", "13a"), tol=VIOL_TOL) -> list:
    y, _, _ = m.unpack(v)
    out = []
    if "13b" in families:
        for i in range(m.n):
            c = _attach(row_13b(m, i, UB), v)
            if c.violation > tol:
                out.append(c)
    if "13a" in families:
        if mode == "enumerate_small":
            if m.n > 10:
                raise ValueError("full enumeration of the assigned-to-later family needs n <= 10")
            out.extend(c for c in (_attach(c, v) for c in enumerate_13a(m)) if c.violation > tol)
        elif mode == "heuristic":
            for i in range(m.n):
                c = separate_13a_heuristic(m, v, i, tol=tol)
                if c is not None:
                    out.append(c)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return _violated(out, tol)


def apc1_fix_by_ub(m: Apc1Model, UB: float, tol: float = 1e-9) -> list:
    """(variable, lower, upper) fixings x_ij = 0 for d_ij > UB."""
    D = m.inst.dist
    return [(int(m.xidx[i, j]), 0.0, 0.0)
            for i, j in zip(*np.nonzero((D > UB + tol) & (m.xidx >= 0)))]


# ====================================================================== APC2

@dataclass(eq=False)
class Apc2Model:
    inst: Instance
    ladder: DistanceLadder
    full: bool
    num_init: int | None
    replace15: bool
    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    offset: float
    rows: list
    closer: list  # closer[i][t] = #{j != i : d_ij < values[t]}
    dsorted: list  # dsorted[i] = (sorted distances from i, matching point order)

    @property
    def n(self) -> int:
        return self.inst.n

    @property
    def alpha(self) -> int:
        return self.inst.alpha

    @property
    def K(self) -> int:
        return self.ladder.K

    @property
    def num_vars(self) -> int:
        return len(self.cost)

    def y(self, j: int) -> int:
        return j

    def u(self, t: int) -> int:
        if not 1 <= t < self.K:
            raise KeyError(f"no u variable for ladder index {t}")
        return self.n + t - 1

    def u_values(self, v) -> np.ndarray:
        """u as an array indexed by ladder position (entry 0 is unused, set to 1)."""
        return np.concatenate([[1.0], np.asarray(v, dtype=float)[self.n:]])

    def objective_of(self, v) -> float:
        return float(self.cost @ np.asarray(v, dtype=float)) + self.offset

    def is_replaced(self, i: int, t: int) -> bool:
        return self.replace15 and self.closer[i][t] < self.alpha

    def relaxation(self, extra=()) -> LinearProgram:
        return LinearProgram(self.num_vars, self.lower, self.upper, self.cost,
                             [c.row for c in self.rows] + [c.row for c in extra], self.offset)

    def integer_vars(self) -> np.ndarray:
        return np.arange(self.num_vars)


def build_apc2(inst: Instance, ladder: DistanceLadder | None = None, full: bool = True,
               num_init: int | None = None, replace15: bool = False) -> Apc2Model:
    """Threshold model.  ``full=False`` keeps only the covering rows whose
    threshold is among the ``num_init`` smallest ladder values above d_1."""
    ladder = build_ladder(inst) if ladder is None else ladder
    n, K = inst.n, ladder.K
    vals = ladder.values
    nv = n + K - 1
    cost = np.zeros(nv)
    cost[n:] = np.diff(vals)
    closer, dsorted = [], []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        d = inst.dist[i, others]
        order = np.argsort(d, kind="stable")
        ds = d[order]
        dsorted.append((ds, np.array(others)[order]))
        closer.append({t: int(np.searchsorted(ds, vals[t], side="left"))
                       for t in ladder.per_point[i]})
    m = Apc2Model(inst, ladder, full, num_init, replace15, np.zeros(nv), np.ones(nv),
                  cost, float(vals[0]), [], closer, dsorted)
    m.rows.append(Cut(Row(tuple(range(n)), (1.0,) * n, "=", float(inst.p)), "6b", ("6b",)))
    for t in range(2, K):
        m.rows.append(Cut(Row.of({m.u(t - 1): 1.0, m.u(t): -1.0}, ">=", 0.0), "6c", ("6c", t)))
    limit = K if full else 1 + (num_init if num_init is not None else 100)
    for i in range(n):
        for t in ladder.per_point[i]:
            if m.is_replaced(i, t):
                m.rows.append(row_15(m, i, t))
            elif t < limit:
                m.rows.append(row_6d(m, i, t))
    return m


def row_6d(m: Apc2Model, i: int, t: int) -> Cut:
    ds, js = m.dsorted[i]
    c = m.closer[i][t]
    terms = {int(j): 1.0 for j in js[:c]}
    terms[m.y(i)] = float(m.alpha)
    terms[m.u(t)] = float(m.alpha)
    return Cut(Row.of(terms, ">=", m.alpha), "6d", ("6d", i, t))


def row_15(m: Apc2Model, i: int, t: int) -> Cut:
    return Cut(Row.of({m.u(t): 1.0, m.y(i): 1.0}, ">=", 1.0), "15", ("15", i, t))


def apc2_violations(m: Apc2Model, v, i: int):
    """(ladder indices, violation values) of the covering rows for point i,
    using the sign convention alpha*u + sum y - alpha*(1-y_i) (negative = violated)."""
    y = np.asarray(v, dtype=float)[:m.n]
    u = m.u_values(v)
    ts = np.array(m.ladder.per_point[i], dtype=np.int64)
    if len(ts) == 0:
        return ts, np.zeros(0)
    ds, js = m.dsorted[i]
    pref = np.concatenate([[0.0], np.cumsum(y[js])])
    cnt = np.array([m.closer[i][t] for t in ts])
    viol = m.alpha * u[ts] + pref[cnt] - m.alpha * (1.0 - y[i])
    if m.replace15:
        keep = cnt >= m.alpha
        ts, viol = ts[keep], viol[keep]
    return ts, viol


def separate_apc2_row(m: Apc2Model, v, i: int, tol=VIOL_TOL):
    """Most valuable violated covering row for i: score = -violation * d_k,
    ties to the smaller k."""
    ts, viol = apc2_violations(m, v, i)
    bad = viol < -tol
    if not bad.any():
        return None
    ts, viol = ts[bad], viol[bad]
    score = -viol * m.ladder.values[ts]
    best = np.flatnonzero(score >= score.max() - 1e-12 * max(1.0, abs(score.max())))
    t = int(ts[best[0]])
    cut = row_6d(m, i, t)
    return Cut(cut.row, cut.family, cut.key, cut.scope, cut.level, float(-viol[best[0]]))


def apc2_core_cuts(m: Apc2Model, v, tol=VIOL_TOL) -> list:
    """Every violated covering row (exhaustive; used on integer candidates)."""
    out = []
    for i in range(m.n):
        ts, viol = apc2_violations(m, v, i)
        for t, val in zip(ts[viol < -tol], viol[viol < -tol]):
            c = row_6d(m, i, int(t))
            out.append(Cut(c.row, c.family, c.key, c.scope, c.level, float(-val)))
    return _by_violation(out)


def apc2_valid_cuts(m: Apc2Model, v, tol=VIOL_TOL) -> list:
    if m.replace15:
        return []
    y = np.asarray(v, dtype=float)[:m.n]
    u = m.u_values(v)
    out = []
    for i in range(m.n):
        for t, c in m.closer[i].items():
            if c < m.alpha and 1.0 - u[t] - y[i] > tol:
                cut = row_15(m, i, t)
                out.append(Cut(cut.row, cut.family, cut.key, cut.scope, cut.level,
                               1.0 - u[t] - y[i]))
    return _by_violation(out)


def apc2_fixings(m: Apc2Model, LB: float, UB: float, tol: float = 1e-9) -> list:
    """(variable, lower, upper) fixings: u_t = 1 for d_t <= LB, u_t = 0 for d_t > UB."""
    if LB > UB + tol:
        raise ValueError(f"lower bound {LB} exceeds upper bound {UB}")
    out = []
    for t in range(1, m.K):
        d = m.ladder.values[t]
        if d <= LB + tol:
            out.append((m.u(t), 1.0, 1.0))
        elif d > UB + tol:
            out.append((m.u(t), 0.0, 0.0))
    return out


def apply_fixings(lp: LinearProgram, fixings) -> LinearProgram:
    lp = lp.copy()
    for var, lo, hi in fixings:
        lp.lower[var] = max(lp.lower[var], lo)
        lp.upper[var] = min(lp.upper[var], hi)
    return lp
