"""Instances of the discrete alpha-neighbor p-center problem.

Points are 0-based internally. File formats and printed reports use 1-based
indices; conversion happens at the boundary (parsers, CLI, JSON output).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class InstanceError(ValueError):
    """Raised for malformed instance files or invalid instance parameters."""


@dataclass(frozen=True, eq=False)
class Instance:
    dist: np.ndarray
    p: int
    alpha: int
    name: str = "instance"

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InstanceError("distance matrix must be square")
        n = d.shape[0]
        if not (1 <= self.alpha <= self.p < n):
            raise InstanceError(
                f"need 1 <= alpha <= p < n, got alpha={self.alpha}, p={self.p}, n={n}")
        off = ~np.eye(n, dtype=bool)
        if not np.all(np.isfinite(d[off])) or np.any(d[off] < 0):
            raise InstanceError("off-diagonal distances must be finite and nonnegative")
        np.fill_diagonal(d, 0.0)
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def with_params(self, p: int | None = None, alpha: int | None = None) -> "Instance":
        return Instance(self.dist, self.p if p is None else p,
                        self.alpha if alpha is None else alpha, self.name)

    @classmethod
    def from_points(cls, xy, p: int, alpha: int, name: str = "instance") -> "Instance":
        xy = np.asarray(xy, dtype=float)
        diff = xy[:, None, :] - xy[None, :, :]
        return cls(np.sqrt((diff ** 2).sum(axis=2)), p, alpha, name)


@dataclass(frozen=True, eq=False)
class DistanceLadder:
    """Sorted distinct off-diagonal distances and the per-point relevant sets.

    ``values[t]`` is the (t+1)-th smallest distance.  ``per_point[i]`` holds the
    ladder indices of the distances from ``i`` to the other points, excluding
    index 0 (the overall smallest distance).
    """
    values: np.ndarray
    per_point: tuple
    rank: dict = field(repr=False)

    @property
    def K(self) -> int:
        return len(self.values)

    def index_of(self, value: float) -> int:
        return self.rank[float(value)]

    def ceil_index(self, value: float, tol: float = 1e-9) -> int:
        """Smallest ladder index whose value is >= value - tol (K if none)."""
        return int(np.searchsorted(self.values, value - tol, side="left"))

    def ceil(self, value: float, tol: float = 1e-9) -> float:
        t = self.ceil_index(value, tol)
        return float(self.values[min(t, self.K - 1)]) if t < self.K else math.inf


@dataclass(frozen=True)
class Solution:
    open: tuple
    objective: float

    @classmethod
    def of(cls, inst: Instance, open_points: Iterable[int]) -> "Solution":
        P = tuple(sorted(int(j) for j in open_points))
        return cls(P, objective(inst, P))


def _number(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise InstanceError(f"line {lineno}: non-numeric value {tok!r}") from None
    if not math.isfinite(v):
        raise InstanceError(f"line {lineno}: non-finite value {tok!r}")
    return v


def parse_tsplib(text: str, p: int, alpha: int, name: str | None = None) -> Instance:
    """Read a TSPLIB NODE_COORD_SECTION document into an instance.

    Distances are plain (unrounded) Euclidean distances regardless of the
    declared EDGE_WEIGHT_TYPE.
    """
    dimension = None
    coords: dict[int, tuple[float, float]] = {}
    in_coords = False
    seen_section = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.upper() == "EOF":
            break
        if in_coords:
            parts = line.split()
            if not parts[0].lstrip("+-").isdigit():
                if parts[0].rstrip(":").isalpha() or "_" in parts[0]:
                    in_coords = False
                else:
                    raise InstanceError(f"line {lineno}: bad node index {parts[0]!r}")
            else:
                if len(parts) < 3:
                    raise InstanceError(f"line {lineno}: expected 'index x y'")
                idx = int(parts[0])
                if idx in coords:
                    raise InstanceError(f"line {lineno}: duplicate node index {idx}")
                coords[idx] = (_number(parts[1], lineno), _number(parts[2], lineno))
                continue
        if ":" in line:
            key, _, value = line.partition(":")
            key, value = key.strip().upper(), value.strip()
        else:
            key, value = line.split()[0].upper(), ""
        if key == "NAME" and name is None:
            name = value
        elif key == "DIMENSION":
            try:
                dimension = int(value)
            except ValueError:
                raise InstanceError(f"line {lineno}: bad DIMENSION {value!r}") from None
        elif key == "NODE_COORD_SECTION":
            in_coords = True
            seen_section = True
    if dimension is None:
        raise InstanceError("missing DIMENSION")
    if not seen_section:
        raise InstanceError("missing NODE_COORD_SECTION")
    if sorted(coords) != list(range(1, dimension + 1)):
        raise InstanceError(
            f"NODE_COORD_SECTION must list nodes 1..{dimension}, found {len(coords)} entries")
    xy = np.array([coords[k] for k in range(1, dimension + 1)])
    return Instance.from_points(xy, p, alpha, name or "tsplib")


def parse_pmed(text: str, alpha: int, name: str = "pmed") -> Instance:
    """Read an OR-Library p-median graph file ("n m p" then m lines "u v w").

    Distances are all-pairs shortest paths.  A repeated edge takes the weight
    of its last occurrence.
    """
    lines = [(k, ln.split()) for k, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise InstanceError("empty pmed document")
    lineno, head = lines[0]
    if len(head) < 3:
        raise InstanceError(f"line {lineno}: expected header 'n m p'")
    try:
        n, m, p = (int(t) for t in head[:3])
    except ValueError:
        raise InstanceError(f"line {lineno}: non-integer header") from None
    if len(lines) - 1 < m:
        raise InstanceError(f"expected {m} edge lines, found {len(lines) - 1}")
    w = {}
    for lineno, parts in lines[1:m + 1]:
        if len(parts) < 3:
            raise InstanceError(f"line {lineno}: expected 'u v w'")
        try:
            u, v, c = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise InstanceError(f"line {lineno}: non-integer edge entry") from None
        if not (1 <= u <= n and 1 <= v <= n) or c < 0:
            raise InstanceError(f"line {lineno}: edge ({u},{v},{c}) out of range")
        if u != v:
            w[(min(u, v) - 1, max(u, v) - 1)] = c
    rows = [a for a, b in w] + [b for a, b in w]
    cols = [b for a, b in w] + [a for a, b in w]
    vals = list(w.values()) * 2
    graph = csr_matrix((np.array(vals, dtype=float), (rows, cols)), shape=(n, n))
    # zero-weight edges vanish from csr storage; re-add them as a tiny epsilon
    zero = [(a, b) for (a, b), c in w.items() if c == 0]
    if zero:
        graph = graph.tolil()
        for a, b in zero:
            graph[a, b] = graph[b, a] = 1e-300
        graph = graph.tocsr()
    d = shortest_path(graph, method="FW", directed=False)
    if not np.all(np.isfinite(d)):
        raise InstanceError("graph is disconnected")
    d = np.rint(d)
    return Instance(d, p, alpha, name)


def build_ladder(inst: Instance) -> DistanceLadder:
    n = inst.n
    off = ~np.eye(n, dtype=bool)
    values = np.unique(inst.dist[off])
    values.setflags(write=False)
    rank = {float(v): t for t, v in enumerate(values)}
    per_point = []
    for i in range(n):
        idx = np.searchsorted(values, np.delete(inst.dist[i], i))
        per_point.append(tuple(int(t) for t in np.unique(idx) if t != 0))
    return DistanceLadder(values, tuple(per_point), rank)


def sigma_order(inst: Instance, i: int) -> list[int]:
    """Other points sorted by distance to ``i``, ties broken by index."""
    others = [j for j in range(inst.n) if j != i]
    return sorted(others, key=lambda j: (inst.dist[i, j], j))


def alpha_distance(inst: Instance, open_points: Sequence[int], i: int,
                   alpha: int | None = None) -> float:
    a = inst.alpha if alpha is None else alpha
    P = list(open_points)
    if i in P:
        raise ValueError(f"point {i + 1} is open, not a demand point")
    if len(P) < a:
        raise ValueError(f"need at least {a} open points, got {len(P)}")
    d = inst.dist[i, P]
    return float(np.partition(d, a - 1)[a - 1])


def objective(inst: Instance, open_points: Iterable[int]) -> float:
    P = sorted(set(int(j) for j in open_points))
    if len(P) != inst.p:
        raise ValueError(f"expected {inst.p} open points, got {len(P)}")
    demand = np.setdiff1d(np.arange(inst.n), P)
    sub = inst.dist[np.ix_(demand, P)]
    return float(np.partition(sub, inst.alpha - 1, axis=1)[:, inst.alpha - 1].max())


def validate_solution(inst: Instance, sol: Solution, tol: float = 1e-9) -> list[str]:
    problems = []
    P = list(sol.open)
    if len(set(P)) != len(P):
        problems.append("duplicate open points")
    bad = [j for j in P if not (0 <= j < inst.n)]
    if bad:
        problems.append(f"open points out of range: {[j + 1 for j in bad]}")
    if len(set(P)) != inst.p:
        problems.append(f"cardinality: {len(set(P))} open points, expected p={inst.p}")
    if not problems:
        true = objective(inst, P)
        if abs(true - sol.objective) > tol:
            problems.append(f"objective mismatch: stored {sol.objective}, recomputed {true}")
    return problems


def random_instance(n: int, p: int, alpha: int, seed: int, grid: int | None = None,
                    name: str | None = None) -> Instance:
    """Uniform random points in the unit square (or on an integer grid, which
    produces distance ties)."""
    rng = np.random.default_rng(seed)
    if grid:
        xy = rng.integers(0, grid, size=(n, 2)).astype(float)
    else:
        xy = rng.random((n, 2))
    return Instance.from_points(xy, p, alpha, name or f"rand{n}_{seed}")
