"""Straight-line cost model and the energy-unconstrained giant route (open TSP path, GA).

Matrix indexing: 0 is the start point, node ``id`` sits at ``id + 1`` and the
end point is the last index.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from fleetroute.scenario import Scenario, service_time

START = 0
# cost of arcs into the start or out of the end; large but finite so differences stay defined
PROHIBITIVE = 1e9


@dataclass(frozen=True)
class CostMatrix:
    transit: np.ndarray  # (N, N) straight-line travel seconds
    service: np.ndarray  # (N,) collection seconds at each index; 0 at start/end
    rho: np.ndarray  # (N,) data amount; 0 at start/end
    points: np.ndarray | None = None  # (N, 2) positions, kept for rendering/path planning

    def __post_init__(self):
        cost = self.transit + self.service[None, :]
        cost[:, START] = PROHIBITIVE
        cost[self.end, :] = PROHIBITIVE
        np.fill_diagonal(cost, 0.0)
        cost.setflags(write=False)
        object.__setattr__(self, "cost", cost)

    @property
    def size(self) -> int:
        return self.transit.shape[0]

    @property
    def end(self) -> int:
        return self.transit.shape[0] - 1

    @property
    def node_count(self) -> int:
        return self.size - 2

    @staticmethod
    def index(node_id: int) -> int:
        return node_id + 1

    @staticmethod
    def node_id(index: int) -> int:
        return index - 1

    def __getitem__(self, ij):
        return self.cost[ij]

    def sequence_time(self, indices) -> float:
        """Sum of (transit + destination service) along a sequence of matrix indices."""
        idx = np.asarray(indices, dtype=int)
        if idx.size < 2:
            return 0.0
        return float(np.sum(self.cost[idx[:-1], idx[1:]]))

    def route_time(self, node_ids, origin: int = START) -> float:
        """Expected time from ``origin`` through ``node_ids`` to the end point."""
        return self.sequence_time([origin, *(i + 1 for i in node_ids), self.end])


def matrix_from_points(points, service, rho, prop_speed: float = 1.0) -> CostMatrix:
    pts = np.asarray(points, dtype=float)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return CostMatrix(d / prop_speed, np.asarray(service, dtype=float), np.asarray(rho, dtype=float), pts)


def build_cost_matrix(scenario: Scenario, prop_speed: float = 1.0) -> CostMatrix:
    pts = [scenario.start, *(n.position for n in scenario.nodes), scenario.end]
    service = [0.0, *(service_time(n, scenario) for n in scenario.nodes), 0.0]
    rho = [0.0, *(n.rho for n in scenario.nodes), 0.0]
    return matrix_from_points(pts, service, rho, prop_speed)


@dataclass(frozen=True)
class GiantRoute:
    order: tuple[int, ...]  # matrix indices, starts at 0 and ends at matrix.end
    total_time: float
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def node_ids(self) -> list[int]:
        return [i - 1 for i in self.order[1:-1]]


@dataclass
class GAParams:
    population: int = 200
    generations: int = 2000
    elitism: float = 0.05
    mutation: float = 0.2
    tournament: int = 3
    # stop after this many generations without improvement; None runs all generations
    stall_generations: int | None = 250
    local_search: bool = True
    restarts: int = 32  # locally optimised random tours seeded into the first population


def tour_cost(matrix: CostMatrix, perm) -> float:
    return matrix.sequence_time([START, *perm, matrix.end])


def nearest_neighbor(matrix: CostMatrix) -> list[int]:
    left = set(range(1, matrix.end))
    cur, out = START, []
    while left:
        nxt = min(left, key=lambda j: (matrix.transit[cur, j], j))
        out.append(nxt)
        left.remove(nxt)
        cur = nxt
    return out


def two_opt(transit: np.ndarray, perm: list[int], first: int, last: int) -> list[int]:
    """2-opt descent on an open path with fixed endpoints (symmetric ``transit``)."""
    path = np.array([first, *perm, last])
    n = len(path)
    improved = True
    while improved:
        improved = False
        for i in range(n - 3):
            a, b = path[i], path[i + 1]
            c = path[i + 2 : n - 1]
            d = path[i + 3 : n]
            delta = transit[a, c] + transit[b, d] - transit[a, b] - transit[c, d]
            j = int(np.argmin(delta))
            if delta[j] < -1e-9:
                path[i + 1 : i + 3 + j] = path[i + 1 : i + 3 + j][::-1]
                improved = True
    return path[1:-1].tolist()


def or_opt(transit: np.ndarray, perm: list[int], first: int, last: int, max_len: int = 3) -> list[int]:
    """Move chains of up to ``max_len`` consecutive nodes (optionally reversed) to a cheaper edge."""
    path = [first, *perm, last]
    improved = True
    while improved:
        improved = False
        n = len(path)
        for s in range(1, max_len + 1):
            for i in range(1, n - s):
                p, a, b, q = path[i - 1], path[i], path[i + s - 1], path[i + s]
                gain = transit[p, a] + transit[b, q] - transit[p, q]
                if gain <= 1e-9:
                    continue
                rest = path[:i] + path[i + s :]
                c = np.asarray(rest[:-1])
                d = np.asarray(rest[1:])
                base = transit[c, d]
                fwd = transit[c, a] + transit[b, d] - base
                rev = transit[c, b] + transit[a, d] - base
                cost = np.minimum(fwd, rev)
                e = int(np.argmin(cost))
                if cost[e] < gain - 1e-9:
                    chain = path[i : i + s]
                    if rev[e] < fwd[e]:
                        chain = chain[::-1]
                    path = rest[: e + 1] + chain + rest[e + 1 :]
                    improved = True
                    break
            if improved:
                break
    return path[1:-1]


def local_search(transit: np.ndarray, perm: list[int], first: int, last: int) -> list[int]:
    """Alternate 2-opt and Or-opt until neither improves the open path."""
    cur = list(perm)
    cost = _path_cost(transit, cur, first, last)
    while True:
        cur = or_opt(transit, two_opt(transit, cur, first, last), first, last)
        new = _path_cost(transit, cur, first, last)
        if new >= cost - 1e-9:
            return cur
        cost = new


def _path_cost(transit, perm, first, last) -> float:
    path = np.array([first, *perm, last])
    return float(np.sum(transit[path[:-1], path[1:]]))


def _distinct(rnd: random.Random, n: int, k: int) -> list[int]:
    """``rnd.sample(range(n), k)`` for k <= 3 with the same draws but less per-call overhead."""
    if n <= 37:  # below this size random.sample switches to its pool method
        return rnd.sample(range(n), k)
    out: list[int] = []
    for _ in range(k):
        j = rnd.randrange(n)
        while j in out:
            j = rnd.randrange(n)
        out.append(j)
    return out


def _order_crossover(p1: list[int], p2: list[int], rnd: random.Random) -> list[int]:
    n = len(p1)
    i, j = sorted(_distinct(rnd, n + 1, 2))
    seg = p1[i:j]
    taken = set(seg)
    rest = [g for g in p2 if g not in taken]
    return rest[:i] + seg + rest[i:]


def _mutate(child: list[int], rnd: random.Random) -> None:
    n = len(child)
    if n < 2:
        return
    i, j = sorted(rnd.sample(range(n), 2))
    if rnd.random() < 0.5:
        child[i], child[j] = child[j], child[i]
    else:
        child[i : j + 1] = child[i : j + 1][::-1]


def solve_giant_route(matrix: CostMatrix, params: GAParams | None = None, seed: int = 0) -> GiantRoute:
    params = params or GAParams()
    if matrix.size < 3:
        raise ValueError("giant route needs at least one node between start and end")
    rnd = random.Random(seed)
    genes = list(range(1, matrix.end))
    k = len(genes)
    end = matrix.end
    T = matrix.transit
    service_total = float(np.sum(matrix.service))

    def costs(pop: list[list[int]]) -> np.ndarray:
        a = np.asarray(pop, dtype=int)
        c = T[START, a[:, 0]] + T[a[:, -1], end]
        if k > 1:
            c = c + np.sum(T[a[:, :-1], a[:, 1:]], axis=1)
        return c

    nn = nearest_neighbor(matrix)
    pop = [nn]
    if params.local_search and k > 2:
        pop.append(local_search(T, nn, START, end))
        for _ in range(params.restarts):
            g = genes[:]
            rnd.shuffle(g)
            pop.append(local_search(T, g, START, end))
    while len(pop) < params.population:
        g = genes[:]
        rnd.shuffle(g)
        pop.append(g)
    fit = costs(pop)

    n_elite = max(1, int(round(params.elitism * params.population)))
    stall_limit = params.stall_generations
    if stall_limit is not None and k <= 12:
        # a stall that has drawn as many children as there are tours has nothing left to find
        stall_limit = min(stall_limit, max(10, math.ceil(math.factorial(k) / params.population)))
    history = []
    best = float(fit.min())
    stall = 0
    for _ in range(params.generations):
        rank = np.lexsort((np.arange(len(pop)), fit))  # stable: ties resolved by index
        elites = [pop[i][:] for i in rank[:n_elite]]
        children = elites[:]
        while len(children) < params.population:
            pa = min(_distinct(rnd, len(pop), params.tournament), key=lambda i: (fit[i], i))
            pb = min(_distinct(rnd, len(pop), params.tournament), key=lambda i: (fit[i], i))
            child = _order_crossover(pop[pa], pop[pb], rnd) if k > 1 else pop[pa][:]
            if rnd.random() < params.mutation:
                _mutate(child, rnd)
            children.append(child)
        pop = children
        fit = costs(pop)
        gen_best = float(fit.min())
        if gen_best < best - 1e-9:
            best = gen_best
            stall = 0
            if params.local_search and k > 2:
                i = int(np.argmin(fit))
                pop[i] = local_search(T, pop[i], START, end)
                fit[i] = costs([pop[i]])[0]
                best = float(fit[i])
        else:
            stall += 1
        history.append(best)
        if stall_limit is not None and stall >= stall_limit:
            break

    i = int(np.lexsort((np.arange(len(pop)), fit))[0])
    order = (START, *pop[i], end)
    total = matrix.sequence_time(order)
    assert math.isclose(total, float(fit[i]) + service_total, rel_tol=1e-9, abs_tol=1e-6)
    return GiantRoute(order, total, tuple(history))
