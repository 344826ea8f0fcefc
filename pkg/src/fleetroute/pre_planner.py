"""Fleet sizing from the giant route, balanced segmentation and a k-means allocation baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from fleetroute.giant_route import START, CostMatrix, GiantRoute
from fleetroute.plan import FleetPlan, Route
from fleetroute.scenario import Scenario

# beyond this many cut combinations the segmentation falls back to a coordinate-descent search
MAX_ENUMERATION = 3_000_000


@dataclass(frozen=True)
class Segmentation:
    cut_points: tuple[int, ...]  # segment after the q-th GR node (1-based)
    segments: tuple[tuple[int, ...], ...]  # node ids per segment, GR order
    times: tuple[float, ...]
    objective: float


def estimate_overhead(gr: GiantRoute, matrix: CostMatrix) -> float:
    """Transit start -> first GR node plus last GR node -> end."""
    first, last = gr.order[1], gr.order[-2]
    return float(matrix.transit[START, first] + matrix.transit[last, matrix.end])


def estimate_fleet_size(T0: float, overhead: float, t_max: float) -> int:
    if t_max <= overhead:
        raise ValueError(f"t_max ({t_max:g} s) does not exceed the start/end overhead ({overhead:g} s)")
    if T0 <= 0:
        raise ValueError("giant route time must be positive")
    ratio = (T0 - overhead) / (t_max - overhead)
    return max(1, math.ceil(ratio - 1e-9))


def segment_time_table(gr: GiantRoute, matrix: CostMatrix) -> np.ndarray:
    """table[a, b]: time of a vehicle serving GR nodes a..b (0-based, inclusive) from start to end."""
    idx = np.asarray(gr.order[1:-1], dtype=int)
    k = idx.size
    links = matrix.cost[idx[:-1], idx[1:]]
    prefix = np.concatenate([[0.0], np.cumsum(links)])
    inner = prefix[None, :] - prefix[:, None]  # inner[a, b] = sum of links a..b-1
    enter = matrix.cost[START, idx]  # transit to first plus its service
    leave = matrix.cost[idx, matrix.end]
    table = enter[:, None] + inner + leave[None, :]
    table[np.tril_indices(k, -1)] = np.inf
    return table


def _objective(times: np.ndarray, squared: bool) -> np.ndarray:
    dev = times - times.mean(axis=-1, keepdims=True)
    return np.sum(dev * dev if squared else np.abs(dev), axis=-1)


def _times_for_cuts(table: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """cuts (C, M-1) as 1-based 'after q-th node' -> segment times (C, M)."""
    k = table.shape[0]
    C = cuts.shape[0]
    starts = np.concatenate([np.zeros((C, 1), dtype=int), cuts], axis=1)
    stops = np.concatenate([cuts - 1, np.full((C, 1), k - 1, dtype=int)], axis=1)
    return table[starts, stops]


def segment_giant_route(gr: GiantRoute, M: int, matrix: CostMatrix, squared: bool = False) -> Segmentation:
    """Cut the GR into M consecutive pieces with the most even vehicle times.

    Minimises the summed absolute (or squared) deviation of segment times from their
    mean; every segment time includes its start and end legs. Exact by enumeration.
    """
    ids = [i - 1 for i in gr.order[1:-1]]
    k = len(ids)
    if M < 1:
        raise ValueError("M must be >= 1")
    if M > k:
        raise ValueError(f"cannot cut {k} nodes into {M} segments")
    table = segment_time_table(gr, matrix)
    if M == 1:
        cuts = np.zeros((1, 0), dtype=int)
    elif math.comb(k - 1, M - 1) <= MAX_ENUMERATION:
        best_val, cuts = math.inf, None
        it = combinations(range(1, k), M - 1)
        while True:
            chunk = np.fromiter((q for c in _take(it, 200_000) for q in c), dtype=int)
            if chunk.size == 0:
                break
            chunk = chunk.reshape(-1, M - 1)
            vals = _objective(_times_for_cuts(table, chunk), squared)
            j = int(np.argmin(vals))  # first minimum: lexicographically smallest cut set
            if vals[j] < best_val - 1e-12:
                best_val, cuts = float(vals[j]), chunk[j : j + 1]
    else:
        cuts = _descent_cuts(table, M, squared)
    times = _times_for_cuts(table, cuts)[0]
    q = tuple(int(c) for c in cuts[0])
    bounds = (0, *q, k)
    segments = tuple(tuple(ids[bounds[i] : bounds[i + 1]]) for i in range(M))
    return Segmentation(q, segments, tuple(float(t) for t in times), float(_objective(times, squared)))


def _take(it, n):
    for _ in range(n):
        try:
            yield next(it)
        except StopIteration:
            return


def _descent_cuts(table: np.ndarray, M: int, squared: bool) -> np.ndarray:
    """Coordinate descent from evenly spaced cuts; used only when enumeration is too large."""
    k = table.shape[0]
    cuts = np.linspace(0, k, M + 1)[1:-1].round().astype(int)
    cuts = np.clip(cuts, 1, k - 1)
    best = _objective(_times_for_cuts(table, cuts[None]), squared)[0]
    improved = True
    while improved:
        improved = False
        for i in range(M - 1):
            lo = cuts[i - 1] + 1 if i > 0 else 1
            hi = cuts[i + 1] - 1 if i < M - 2 else k - 1
            cand = np.repeat(cuts[None], hi - lo + 1, axis=0)
            cand[:, i] = np.arange(lo, hi + 1)
            vals = _objective(_times_for_cuts(table, cand), squared)
            j = int(np.argmin(vals))
            if vals[j] < best - 1e-12:
                best, cuts = vals[j], cand[j]
                improved = True
    return cuts[None]


def kmeans_clusters(scenario: Scenario, M: int, seed: int = 0, iterations: int = 100) -> list[list[int]]:
    """Lloyd's k-means on node positions with k-means++ seeding; node ids per cluster."""
    if M < 1:
        raise ValueError("M must be >= 1")
    X = np.array([n.position for n in scenario.nodes], dtype=float)
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    k = min(M, n)
    centers = [X[rng.integers(n)]]
    for _ in range(1, k):
        d2 = np.min(np.sum((X[:, None, :] - np.array(centers)[None]) ** 2, axis=-1), axis=1)
        if d2.sum() == 0:
            centers.append(X[rng.integers(n)])
        else:
            centers.append(X[rng.choice(n, p=d2 / d2.sum())])
    C = np.array(centers)
    labels = np.full(n, -1)
    for _ in range(iterations):
        d2 = np.sum((X[:, None, :] - C[None]) ** 2, axis=-1)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            if np.any(labels == j):
                C[j] = X[labels == j].mean(axis=0)
    clusters = [sorted(int(i) for i in np.flatnonzero(labels == j)) for j in range(k)]
    return clusters + [[] for _ in range(M - k)]


def kmeans_allocation(scenario: Scenario, M: int, seed: int = 0, t_max: float = math.inf,
                      matrix: CostMatrix | None = None) -> FleetPlan:
    """Cluster nodes into M vehicles; routes are unordered (ids ascending) until optimised."""
    clusters = kmeans_clusters(scenario, M, seed)
    routes = []
    for m, nodes in enumerate(clusters):
        t = matrix.route_time(nodes) if matrix is not None else math.nan
        routes.append(Route(m, tuple(nodes), t, float(sum(scenario.nodes[i].rho for i in nodes))))
    return FleetPlan(M=M, routes=routes, t_max=t_max, idle_nodes=(), allocation="k-means")
