"""LP-based branch-and-cut over either formulation.

Search: best-bound node selection with depth-first plunging.  Branching always
prefers fractional y (most fractional, lowest index); x or u are branched on
only when every y is integral.  Node bounds are rounded up to the next
distance ladder value, since every optimum is a ladder value.

Cuts live either in a global pool (added to the shared LP, aged out after a
run of inactive LPs, re-screened before each separation round) or locally on
a node, in which case they are inherited by its descendants only.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .formulations import (GLOBAL, LOCAL, VIOL_TOL, Cut, apc1_core_cuts, apc1_fix_by_ub,
                           apc1_lifted_cuts, apc1_optimality_cuts, apc1_valid_cuts,
                           apc2_core_cuts, apc2_fixings, build_apc1, build_apc2,
                           separate_13a_heuristic, separate_apc2_row)
from .heuristics import greedy_start, rounding_heuristic
from .instance import Instance, Solution, build_ladder, objective, sigma_order
from .lp import LpSession

INT_TOL = 1e-6
AGE_LIMIT = 50

APC1_SETTINGS = ("1", "1H", "1HS", "1HSV", "1HSVL", "1HSVLO")
APC2_SETTINGS = ("2", "2H", "2HV", "2HVS", "2HVSL")
OPTIMAL, TIME_LIMIT = "Optimal", "TimeLimit"


def default_time_limit() -> float:
    return float(os.environ.get("ALPHAPC_TIME_LIMIT", "1800"))


@dataclass
class BncConfig:
    setting: str = "2HVSL"
    start_heur: int = 10
    max_ineqs_root: int = 50
    max_ineqs_tree: int = 20
    max_sep_root: int = 100
    max_sep_tree: int = 1
    num_init_apc1: int = 10
    num_init_apc2: int = 100
    time_limit: float = field(default_factory=default_time_limit)
    seed: int = 0
    backend: str = "highs"

    def __post_init__(self):
        if self.setting not in APC1_SETTINGS + APC2_SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")

    @property
    def formulation(self) -> str:
        return "APC1" if self.setting.startswith("1") else "APC2"

    def has(self, flag: str) -> bool:
        return flag in self.setting[1:]


@dataclass
class SolveReport:
    status: str
    UB: float
    LB: float
    incumbent: Solution | None
    nodes: int
    cuts: dict
    seconds: float
    seed: int
    setting: str = ""
    lp_iterations: int = 0

    @property
    def time_limit_hit(self) -> bool:
        return self.status == TIME_LIMIT

    def to_dict(self, inst: Instance | None = None) -> dict:
        d = {"status": self.status, "UB": self.UB, "LB": self.LB, "nodes": self.nodes,
             "cuts": self.cuts, "seconds": self.seconds, "seed": self.seed,
             "setting": self.setting, "lp_iterations": self.lp_iterations,
             "open": None if self.incumbent is None else [j + 1 for j in self.incumbent.open]}
        if inst is not None:
            d.update(instance=inst.name, n=inst.n, p=inst.p, alpha=inst.alpha)
        return d

    def to_json(self, inst: Instance | None = None) -> str:
        return json.dumps(self.to_dict(inst))

    def csv_row(self, inst: Instance) -> list:
        t = "TL" if self.time_limit_hit else f"{self.seconds:.2f}"
        return [inst.name, inst.n, inst.p, inst.alpha, _fmt(self.UB), _fmt(self.LB), t, self.nodes]


CSV_HEADER = ["name", "|N|", "p", "alpha", "UB", "LB", "t", "nBC"]


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        return "inf"
    return str(int(v)) if float(v).is_integer() else f"{v:.2f}"


@dataclass
class NodeState:
    bounds: dict  # var -> (lo, hi) overrides relative to the global bounds
    local_cuts: tuple  # Cut objects valid in this subtree
    lb: float
    depth: int
    history: tuple = ()  # (var, "down"/"up") decisions from the root


class _TimeUp(Exception):
    pass


class Engine:
    """One branch-and-cut run.  ``solve`` drives it; tests may poke at
    ``separate_round`` and ``check_integer_candidate`` directly."""

    def __init__(self, inst: Instance, cfg: BncConfig):
        self.inst, self.cfg = inst, cfg
        self.ladder = build_ladder(inst)
        self.vals = self.ladder.values
        self.apc1 = cfg.formulation == "APC1"
        s = cfg.setting
        self.heur = cfg.has("H")
        self.sep = cfg.has("S")
        self.valid = cfg.has("V")
        self.lifted = cfg.has("L")
        self.optcuts = cfg.has("O")
        if self.apc1:
            self.m = build_apc1(inst, full=not self.sep, num_init=cfg.num_init_apc1)
            self.int_vars = self.m.integer_vars()
            self.orders = [sigma_order(inst, i) for i in range(inst.n)]
        else:
            self.m = build_apc2(inst, self.ladder, full=not self.sep,
                                num_init=cfg.num_init_apc2, replace15=self.valid)
            self.int_vars = self.m.integer_vars()
        offset = 0.0 if self.apc1 else self.m.offset
        self.glo = self.m.lower.copy()
        self.ghi = self.m.upper.copy()
        self.lp = LpSession(self.glo, self.ghi, self.m.cost, offset, cfg.backend)
        self.lp.add_rows((c.key, c.row) for c in self.m.rows)
        self.core_keys = {c.key for c in self.m.rows}
        self.pool = {}  # key -> Cut (global, separated)
        self.age = {}  # key -> consecutive inactive LPs
        self.retired = {}  # key -> Cut removed from the LP but kept for screening
        self.local_in_lp = {}  # session key -> Cut
        self.UB = math.inf
        self.incumbent = None
        self.global_lb = float(self.vals[0])
        self.cut_count = {}
        self.nodes = 0
        self.t0 = time.monotonic()
        self.timed_out = False

    # ------------------------------------------------------------ utilities
    def elapsed(self) -> float:
        return time.monotonic() - self.t0

    def ceil(self, v: float) -> float:
        """Smallest ladder value not below v (with a relative tolerance)."""
        return self.ladder.ceil(v, 1e-7 * max(1.0, abs(v)))

    def _count(self, cut: Cut):
        self.cut_count[cut.family] = self.cut_count.get(cut.family, 0) + 1

    def offer(self, sol: Solution) -> bool:
        """Accept a candidate solution if it improves the incumbent."""
        if sol.objective < self.UB - 1e-12:
            self.incumbent, self.UB = sol, sol.objective
            if self.heur:
                self._ub_fixings()
            return True
        return False

    def _ub_fixings(self):
        fix = (apc1_fix_by_ub(self.m, self.UB) if self.apc1
               else [f for f in apc2_fixings(self.m, self.vals[0], self.UB) if f[2] == 0.0])
        for var, lo, hi in fix:
            self.ghi[var] = min(self.ghi[var], hi)

    def add_global(self, cuts):
        rows = []
        for c in cuts:
            c = c.with_scope(GLOBAL)
            old = self.pool.get(c.key)
            if c.key in self.core_keys:
                continue
            if old is not None:
                if c.level <= old.level + 1e-12:
                    continue
                self.lp.remove_rows([c.key])  # dominated predecessor
            self.retired.pop(c.key, None)
            self.pool[c.key] = c
            self.age[c.key] = 0
            rows.append((c.key, c.row))
            self._count(c)
        self.lp.add_rows(rows)

    # ------------------------------------------------------------ node LP
    def _node_bounds(self, node: NodeState):
        lo, hi = self.glo.copy(), self.ghi.copy()
        for var, (a, b) in node.bounds.items():
            lo[var] = max(lo[var], a)
            hi[var] = min(hi[var], b)
        return lo, hi

    def _sync_local(self, node: NodeState):
        target = {("L",) + c.key + (c.level,): c for c in node.local_cuts}
        gone = [k for k in self.local_in_lp if k not in target]
        self.lp.remove_rows(gone)
        for k in gone:
            del self.local_in_lp[k]
        new = [(k, c.row) for k, c in target.items() if k not in self.local_in_lp]
        self.lp.add_rows(new)
        for k, _ in new:
            self.local_in_lp[k] = target[k]

    def _solve_lp(self, node: NodeState):
        if self.elapsed() > self.cfg.time_limit:
            raise _TimeUp
        lo, hi = self._node_bounds(node)
        if np.any(lo > hi + 1e-12):
            return None
        self.lp.set_bounds(lo, hi)
        self._sync_local(node)
        sol = self.lp.solve()
        if not sol.optimal:
            return None
        self._age_pool()
        return sol

    def _age_pool(self):
        if not self.pool:
            return
        keys = list(self.pool)
        act = self.lp.row_activity(keys)
        lo = np.array([self.pool[k].row.bounds()[0] for k in keys])
        hi = np.array([self.pool[k].row.bounds()[1] for k in keys])
        slack = np.minimum(act - lo, hi - act)
        stale = []
        for k, s in zip(keys, slack):
            if s > VIOL_TOL:
                self.age[k] += 1
                if self.age[k] >= AGE_LIMIT:
                    stale.append(k)
            else:
                self.age[k] = 0
        if stale:
            self.lp.remove_rows(stale)
            for k in stale:
                self.retired[k] = self.pool.pop(k)
                del self.age[k]

    # ------------------------------------------------------------ separation
    def node_lb(self, node: NodeState, lpval: float) -> float:
        return max(node.lb, self.ceil(lpval))

    def separate_round(self, v, root: bool, lb: float | None = None):
        """Violated cuts for the point v, at most one round's budget, in the
        prescribed family order.  Returns a list of Cut (scope set)."""
        budget = self.cfg.max_ineqs_root if root else self.cfg.max_ineqs_tree
        lb = self.global_lb if lb is None else lb
        scope = GLOBAL if lb <= self.global_lb + 1e-12 else LOCAL
        out = []

        def take(cuts):
            for c in cuts:
                if len(out) >= budget:
                    return
                out.append(c)

        take(sorted((c for c in self.retired.values() if c.row.violation(v) > VIOL_TOL),
                    key=lambda c: -c.row.violation(v)))
        if self.apc1:
            m = self.m
            if self.valid:
                take(apc1_lifted_cuts(m, v, lb, ("11c",), scope) if self.lifted
                     else apc1_valid_cuts(m, v, ("9",)))
            if self.sep:
                take(apc1_lifted_cuts(m, v, lb, ("11a",), scope) if self.lifted
                     else apc1_core_cuts(m, v, ("2e",)))
                take(apc1_core_cuts(m, v, ("2d",)))
            if self.valid:
                take(apc1_valid_cuts(m, v, ("10",)))
            if self.optcuts and math.isfinite(self.UB):
                take(apc1_optimality_cuts(m, v, self.UB, "heuristic", ("13b",)))
                if len(out) < budget:
                    found = []
                    for i in range(m.n):
                        c = separate_13a_heuristic(m, v, i, self.orders[i])
                        if c is not None:
                            found.append(c)
                    take(sorted(found, key=lambda c: -c.violation))
        elif self.sep:
            found = [c for c in (separate_apc2_row(self.m, v, i) for i in range(self.m.n))
                     if c is not None]
            scores = [c.violation * self.vals[c.key[2]] for c in found]
            order = sorted(range(len(found)), key=lambda k: (-scores[k], found[k].key[2]))
            take([found[k] for k in order])
        return out

    def _lb_fixing(self, node: NodeState, v, lb: float):
        """u prefix fixing from the node bound: the largest fractional u whose
        distance is certified, else the first fractional u."""
        u = self.m.u_values(v)
        frac = np.flatnonzero((u > INT_TOL) & (u < 1.0 - INT_TOL))
        if len(frac) == 0:
            return False
        cert = [t for t in frac if self.vals[t] <= lb + 1e-12]
        t = int(max(cert)) if cert else int(frac.min())
        changed = False
        for s in range(1, t + 1):
            var = self.m.u(s)
            if node.bounds.get(var, (0.0, 1.0))[0] < 1.0 and self.glo[var] < 1.0:
                node.bounds[var] = (1.0, node.bounds.get(var, (0.0, 1.0))[1])
                changed = True
        if changed:
            self.cut_count["ufix"] = self.cut_count.get("ufix", 0) + 1
        return changed

    def check_integer_candidate(self, v):
        """Exhaustive check of the model rows that separation may have left out.
        Empty list means the point is a genuine solution."""
        if self.apc1:
            return apc1_core_cuts(self.m, v, ("2e", "2d"))
        return apc2_core_cuts(self.m, v)

    def _integral(self, v) -> bool:
        w = v[self.int_vars]
        return bool(np.all(np.abs(w - np.round(w)) <= INT_TOL))

    # ------------------------------------------------------------ node
    def process(self, node: NodeState):
        """Solve and cut a node.  Returns (children or None, final LP point)."""
        root = node.depth == 0
        rounds = self.cfg.max_sep_root if root else self.cfg.max_sep_tree
        used = 0
        while True:
            sol = self._solve_lp(node)
            if sol is None:
                return None
            v = sol.primal
            lb = self.node_lb(node, sol.value)
            node.lb = lb
            if root:
                self.global_lb = max(self.global_lb, lb)
            if self.heur:
                self.offer(rounding_heuristic(self.inst, v[:self.inst.n]))
            if lb >= self.UB - 1e-12:
                return None
            if self._integral(v):
                lazy = self.check_integer_candidate(v)
                if lazy:
                    self.add_global(lazy)
                    continue
                P = np.flatnonzero(v[:self.inst.n] > 0.5)
                self.offer(Solution(tuple(int(j) for j in P), objective(self.inst, P)))
                return None
            if used >= rounds:
                break
            used += 1
            progressed = False
            if not self.apc1 and self.lifted:
                progressed = self._lb_fixing(node, v, lb)
            cuts = self.separate_round(v, root, lb)
            if cuts:
                glob = [c for c in cuts if c.scope == GLOBAL]
                loc = [c for c in cuts if c.scope == LOCAL]
                self.add_global(glob)
                if loc:
                    keep = {c.key: c for c in node.local_cuts}
                    for c in loc:
                        if c.key not in keep or keep[c.key].level < c.level:
                            keep[c.key] = c
                            self._count(c)
                    node.local_cuts = tuple(keep.values())
                progressed = True
            if not progressed:
                break
        return self._branch(node, v)

    def _branch(self, node: NodeState, v):
        n = self.inst.n
        y = v[:n]
        fy = np.abs(y - np.round(y))
        if fy.max() > INT_TOL:
            var = int(np.argmax(np.round(fy, 12)))
        else:
            rest = self.int_vars[n:]
            w = v[rest]
            fw = np.abs(w - np.round(w))
            var = int(rest[int(np.argmax(np.round(fw, 12)))])
        val = v[var]
        down = NodeState(dict(node.bounds), node.local_cuts, node.lb, node.depth + 1,
                         node.history + ((var, "down"),))
        up = NodeState(dict(node.bounds), node.local_cuts, node.lb, node.depth + 1,
                       node.history + ((var, "up"),))
        lo, hi = node.bounds.get(var, (self.glo[var], self.ghi[var]))
        down.bounds[var] = (lo, 0.0)
        up.bounds[var] = (1.0, hi)
        return (up, down) if val >= 0.5 else (down, up)

    # ------------------------------------------------------------ driver
    def run(self) -> SolveReport:
        cfg = self.cfg
        if self.heur:
            self.offer(greedy_start(self.inst, cfg.seed, cfg.start_heur))
        seq = itertools.count()
        heap = []
        dive = NodeState({}, (), float(self.vals[0]), 0)
        try:
            while True:
                if dive is None:
                    while heap and heap[0][0] >= self.UB - 1e-12:
                        heapq.heappop(heap)
                    if not heap:
                        break
                    dive = heapq.heappop(heap)[2]
                node, dive = dive, None
                if node.lb >= self.UB - 1e-12:
                    continue
                self.nodes += 1
                children = self.process(node)
                if children:
                    first, second = children
                    heapq.heappush(heap, (second.lb, next(seq), second))
                    dive = first
                if heap or dive is not None:
                    open_lb = min([h[0] for h in heap] + ([dive.lb] if dive else []))
                    self.global_lb = max(self.global_lb, min(open_lb, self.UB))
                if math.isfinite(self.UB) and self.UB - self.global_lb <= 1e-6 * max(1.0, abs(self.UB)):
                    break
        except _TimeUp:
            self.timed_out = True
            open_lbs = [h[0] for h in heap] + [node.lb] + ([dive.lb] if dive else [])
            self.global_lb = max(self.global_lb, min(open_lbs))
        if not self.timed_out:
            self.global_lb = self.UB
        lb = min(self.global_lb, self.UB)
        return SolveReport(TIME_LIMIT if self.timed_out else OPTIMAL, self.UB, lb,
                           self.incumbent, self.nodes, dict(self.cut_count),
                           self.elapsed(), cfg.seed, cfg.setting, self.lp.iterations)


def solve(inst: Instance, cfg: BncConfig | None = None) -> SolveReport:
    return Engine(inst, cfg or BncConfig()).run()


def separate_round(engine: Engine, v, root: bool = True, lb: float | None = None):
    return engine.separate_round(np.asarray(v, dtype=float), root, lb)


def check_integer_candidate(engine: Engine, v):
    return engine.check_integer_candidate(np.asarray(v, dtype=float))


def separate_assigned_to_later(engine_or_model, v, i: int):
    m = engine_or_model.m if isinstance(engine_or_model, Engine) else engine_or_model
    return separate_13a_heuristic(m, np.asarray(v, dtype=float), i)
