"""Lower-bound procedures and their set-cover certificates.

* ``eval_L`` solves the lifted assignment relaxation for a given lower bound.
* ``fixpoint_bound`` iterates it along the distance ladder until it stalls.
* ``semi_relaxation`` solves the threshold model with binary u and fractional y
  by repeated prefix fixing of u.
* ``afsc_min_cover`` / ``extended_cover_feasible`` are the fractional cover
  LPs that characterize when the iterations stall, and ``cover_radius`` is the
  smallest ladder radius whose cover fits in p facilities.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .formulations import (apply_fixings, build_apc1, build_apc2, enumerate_13a, row_10,
                           row_11a, row_11b, row_11c, row_13b)
from .instance import DistanceLadder, Instance, build_ladder
from .lp import LinearProgram, LpError, Row, solve_lp

COVER_TOL = 1e-7
LB_SHARP, LB_SHARP_PRIME, SEMI_RELAX, COVER_RADIUS = (
    "LBsharp", "LBsharpPrime", "SemiRelax", "CoverRadius")


@dataclass
class BoundReport:
    kind: str
    value: float
    iterations: int
    trace: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _tol(v: float) -> float:
    return 1e-9 * max(1.0, abs(v))


def _require(sol, what):
    if not sol.optimal:
        raise LpError(f"{what}: LP ended with status {sol.status.value}")
    return sol


def apclb_lp(inst: Instance, LB: float, variant: str = "full",
             optimality_ub: float | None = None) -> LinearProgram:
    """The lifted relaxation for a given LB.

    ``full`` keeps x_ij <= y_j, y_i + x_ij <= 1 and both lifted families;
    ``prime`` drops y_i + x_ij <= 1 and uses the weaker single-arc lifting.
    With ``optimality_ub`` the assigned-to-later family is added in full
    together with the UB covering rows.
    """
    if variant not in ("full", "prime"):
        raise ValueError(f"unknown variant {variant!r}")
    m = build_apc1(inst, full=True, z_lower=LB)
    rows = [c for c in m.rows if c.family in ("2b", "2c", "2d")]
    n = inst.n
    for i in range(n):
        rows.append(row_11c(m, i, LB))
        for j in range(n):
            if i == j:
                continue
            if variant == "full":
                rows.append(row_10(m, i, j))
                rows.append(row_11a(m, i, j, LB))
            else:
                rows.append(row_11b(m, i, j, LB))
    if optimality_ub is not None:
        rows.extend(enumerate_13a(m))
        rows.extend(row_13b(m, i, optimality_ub) for i in range(n))
    upper = m.upper.copy()
    upper[n:m.z] = np.inf  # x >= 0 only
    return LinearProgram(m.num_vars, m.lower, upper, m.cost, [c.row for c in rows])


def eval_L(inst: Instance, LB: float, variant: str = "full", backend: str = "highs",
           optimality_ub: float | None = None) -> float:
    sol = _require(solve_lp(apclb_lp(inst, LB, variant, optimality_ub), backend), "eval_L")
    return max(sol.value, LB)


def fixpoint_bound(inst: Instance, variant: str = "full", ladder: DistanceLadder | None = None,
                   backend: str = "highs") -> BoundReport:
    ladder = build_ladder(inst) if ladder is None else ladder
    LB = float(ladder.values[0])
    trace = []
    while True:
        val = eval_L(inst, LB, variant, backend)
        trace.append((LB, val))
        if val <= LB + _tol(LB):
            break
        nxt = ladder.ceil(val, _tol(val))
        if not math.isfinite(nxt) or nxt <= LB:
            raise LpError(f"fixpoint iteration left the ladder at {val}")
        LB = nxt
    kind = LB_SHARP if variant == "full" else LB_SHARP_PRIME
    return BoundReport(kind, LB, len(trace), trace)


def semi_relaxation(inst: Instance, ladder: DistanceLadder | None = None,
                    backend: str = "highs") -> BoundReport:
    """Threshold model with y in [0,1] and u binary, by prefix fixing of u."""
    ladder = build_ladder(inst) if ladder is None else ladder
    m = build_apc2(inst, ladder, full=True)
    base = m.relaxation()
    vals = ladder.values
    fixed = 0  # u_t = 1 for 1 <= t <= fixed
    trace = []
    while True:
        lp = apply_fixings(base, [(m.u(t), 1.0, 1.0) for t in range(1, fixed + 1)])
        sol = _require(solve_lp(lp, backend), "semi_relaxation")
        u = m.u_values(sol.primal)
        trace.append((float(vals[fixed]), sol.value))
        frac = np.flatnonzero((u > COVER_TOL) & (u < 1.0 - COVER_TOL))
        if len(frac) == 0:
            ones = np.flatnonzero(u >= 1.0 - COVER_TOL)
            return BoundReport(SEMI_RELAX, float(vals[ones.max()]), len(trace), trace)
        cert = ladder.ceil(sol.value, _tol(sol.value))
        fast = [t for t in frac if vals[t] <= cert + _tol(cert)]
        nxt = int(max(fast)) if fast else int(frac.min())
        if nxt <= fixed:
            raise LpError("prefix fixing made no progress")
        fixed = nxt


def afsc_lp(inst: Instance, delta: float) -> LinearProgram:
    n, a = inst.n, inst.alpha
    rows = []
    for i in range(n):
        terms = {j: 1.0 for j in range(n) if j != i and inst.dist[i, j] <= delta}
        terms[i] = float(a)
        rows.append(Row.of(terms, ">=", a))
    return LinearProgram(n, np.zeros(n), np.ones(n), np.ones(n), rows)


def afsc_min_cover(inst: Instance, delta: float, backend: str = "highs") -> float:
    if delta < 0:
        raise ValueError("radius must be nonnegative")
    return _require(solve_lp(afsc_lp(inst, delta), backend), "afsc").value


def _reduced_rows(inst: Instance, LB: float, y: np.ndarray, tol: float):
    """Violated members of the extended cover family at y, one per (i, beta):
    the beta covered neighbours of largest y are the ones left out."""
    n, a = inst.n, inst.alpha
    out = []
    for i in range(n):
        cov = [j for j in range(n) if j != i and inst.dist[i, j] <= LB]
        cov.sort(key=lambda j: (-y[j], j))
        total = sum(y[j] for j in cov)
        for beta in range(1, a):
            drop = cov[:beta]
            keep = cov[beta:]
            lhs = total - sum(y[j] for j in drop) + (a - beta) * y[i]
            if lhs < (a - beta) - tol:
                terms = {j: 1.0 for j in keep}
                terms[i] = float(a - beta)
                out.append(((i, beta, tuple(drop)), Row.of(terms, ">=", a - beta)))
    return out


def extended_cover_value(inst: Instance, LB: float, backend: str = "highs") -> float:
    lp = afsc_lp(inst, LB)
    seen = set()
    while True:
        sol = _require(solve_lp(lp, backend), "extended cover")
        new = [(k, r) for k, r in _reduced_rows(inst, LB, sol.primal, 1e-9) if k not in seen]
        if not new:
            return sol.value
        for k, r in new:
            seen.add(k)
            lp.add(r)


def extended_cover_feasible(inst: Instance, LB: float, backend: str = "highs") -> bool:
    if LB < 0:
        raise ValueError("LB must be nonnegative")
    return extended_cover_value(inst, LB, backend) <= inst.p + COVER_TOL


def cover_radius(inst: Instance, ladder: DistanceLadder | None = None,
                 backend: str = "highs") -> BoundReport:
    ladder = build_ladder(inst) if ladder is None else ladder
    lo, hi = 0, ladder.K - 1  # hi is always feasible
    trace = []
    while lo < hi:
        mid = (lo + hi) // 2
        v = afsc_min_cover(inst, float(ladder.values[mid]), backend)
        trace.append((float(ladder.values[mid]), v))
        if v <= inst.p + COVER_TOL:
            hi = mid
        else:
            lo = mid + 1
    return BoundReport(COVER_RADIUS, float(ladder.values[lo]), len(trace), trace)


def all_bounds(inst: Instance, backend: str = "highs") -> dict:
    ladder = build_ladder(inst)
    reps = [fixpoint_bound(inst, "full", ladder, backend),
            fixpoint_bound(inst, "prime", ladder, backend),
            semi_relaxation(inst, ladder, backend),
            cover_radius(inst, ladder, backend)]
    return {r.kind: r for r in reps}
