"""Starting and primal heuristics."""
from __future__ import annotations

import numpy as np

from .instance import Instance, Solution


def _greedy_run(inst: Instance, start: int) -> Solution:
    n, a = inst.n, inst.alpha
    P = [start]
    is_open = np.zeros(n, dtype=bool)
    is_open[start] = True
    while len(P) < inst.p:
        k = min(len(P), a)
        d = inst.dist[:, P]
        kth = np.partition(d, k - 1, axis=1)[:, k - 1] if len(P) > 1 else d[:, 0]
        kth = np.where(is_open, -np.inf, kth)
        j = int(np.argmax(kth))  # first maximum = lowest index
        P.append(j)
        is_open[j] = True
    return Solution.of(inst, P)


def greedy_start(inst: Instance, seed: int = 0, restarts: int = 10) -> Solution:
    """Best of ``restarts`` farthest-point runs; run r starts from a point drawn
    with seed ``seed + r``."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        start = int(np.random.default_rng(seed + r).integers(inst.n))
        sol = _greedy_run(inst, start)
        if best is None or sol.objective < best.objective:
            best = sol
    return best


def greedy_from(inst: Instance, start: int) -> Solution:
    """A single greedy run from a given start point."""
    return _greedy_run(inst, start)


def rounding_heuristic(inst: Instance, y_star) -> Solution:
    """Open the p points with the largest y*, ties to the lowest index."""
    y = np.asarray(y_star, dtype=float)
    if y.shape != (inst.n,):
        raise ValueError(f"expected {inst.n} y values")
    order = np.lexsort((np.arange(inst.n), -y))
    return Solution.of(inst, order[:inst.p])
