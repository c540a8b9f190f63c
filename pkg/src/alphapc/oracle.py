"""Brute-force ground truth for small instances."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .instance import Instance, Solution

MAX_SUBSETS = 10**6
CHUNK = 4096


class OracleSizeError(ValueError):
    pass


def _subset_objectives(inst: Instance, combos: np.ndarray) -> np.ndarray:
    """f_alpha for a batch of open sets (rows of ``combos``)."""
    # d[b, i, k] = distance from i to the k-th open point of set b
    d = inst.dist[:, combos].transpose(1, 0, 2)
    kth = np.partition(d, inst.alpha - 1, axis=2)[:, :, inst.alpha - 1]
    is_open = np.zeros((len(combos), inst.n), dtype=bool)
    np.put_along_axis(is_open, combos, True, axis=1)
    kth[is_open] = -np.inf
    return kth.max(axis=1)


def brute_force_solve(inst: Instance) -> Solution:
    """Optimal open set by enumeration; ties go to the lexicographically
    smallest set."""
    total = math.comb(inst.n, inst.p)
    if total > MAX_SUBSETS:
        raise OracleSizeError(f"C({inst.n},{inst.p}) = {total} subsets exceeds {MAX_SUBSETS}")
    best_val, best_set = math.inf, None
    it = itertools.combinations(range(inst.n), inst.p)
    while True:
        chunk = list(itertools.islice(it, CHUNK))
        if not chunk:
            break
        combos = np.array(chunk, dtype=np.int64)
        vals = _subset_objectives(inst, combos)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_set = float(vals[k]), tuple(int(j) for j in combos[k])
    return Solution(best_set, best_val)


def all_optima(inst: Instance, tol: float = 1e-9) -> list:
    """Every optimal open set (small instances only)."""
    best = brute_force_solve(inst).objective
    combos = np.array(list(itertools.combinations(range(inst.n), inst.p)), dtype=np.int64)
    vals = _subset_objectives(inst, combos)
    return [tuple(int(j) for j in c) for c, v in zip(combos, vals) if v <= best + tol]


def closest_assignment(inst: Instance, open_points) -> np.ndarray:
    """0/1 matrix X assigning each demand point to its alpha nearest open
    points in (distance, index) order."""
    P = sorted(open_points)
    X = np.zeros((inst.n, inst.n))
    for i in range(inst.n):
        if i in P:
            continue
        near = sorted(P, key=lambda j: (inst.dist[i, j], j))[:inst.alpha]
        X[i, near] = 1.0
    return X


def y_enumeration_value(inst: Instance, backend: str = "highs") -> float:
    """Minimum over all binary y with p ones of the LP in (x, z) that keeps the
    assignment model's rows plus every assigned-to-later inequality."""
    from .formulations import apply_fixings, build_apc1, enumerate_13a
    from .lp import solve_lp

    model = build_apc1(inst, full=True)
    base = model.relaxation(enumerate_13a(model))
    best = math.inf
    for P in itertools.combinations(range(inst.n), inst.p):
        fix = [(j, 1.0, 1.0) if j in P else (j, 0.0, 0.0) for j in range(inst.n)]
        sol = solve_lp(apply_fixings(base, fix), backend)
        if sol.optimal:
            best = min(best, sol.value)
    return best
