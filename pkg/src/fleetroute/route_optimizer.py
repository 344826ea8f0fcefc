"""Per-vehicle route optimisation under a time budget with stochastic leg costs.

Leg law: f(t) = max(floor * t, t + N(0, (sigma * t)^2) + K * maneuver_cost),
K ~ Poisson(rate * t / 3600). Routes are judged feasible when a quantile of the
sampled route time fits the budget.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

import numpy as np

from fleetroute.giant_route import START, CostMatrix, GAParams, build_cost_matrix, solve_giant_route
from fleetroute.plan import FleetPlan, Route
from fleetroute.pre_planner import (estimate_fleet_size, estimate_overhead, kmeans_clusters,
                                    segment_giant_route)
from fleetroute.rng import derive_seed
from fleetroute.scenario import Scenario


@dataclass(frozen=True)
class NoiseModel:
    sigma_frac: float = 0.1
    maneuver_rate: float = 1.0  # per hour of transit
    maneuver_cost: float = 60.0  # seconds
    floor_frac: float = 0.5

    def __post_init__(self):
        if self.sigma_frac < 0 or self.maneuver_rate < 0 or self.maneuver_cost < 0:
            raise ValueError("noise parameters must be >= 0")
        if not 0 < self.floor_frac <= 1:
            raise ValueError("floor_frac must lie in (0, 1]")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls(0.0, 0.0, 0.0, 1.0)

    def leg_mean(self, t):
        """Mean leg time ignoring the floor clamp."""
        return t + self.maneuver_cost * self.maneuver_rate * np.asarray(t) / 3600.0

    def leg_var(self, t):
        t = np.asarray(t)
        return (self.sigma_frac * t) ** 2 + self.maneuver_cost**2 * self.maneuver_rate * t / 3600.0


def poisson_inverse(u: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Inverse Poisson CDF evaluated elementwise (u in [0, 1))."""
    u, lam = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(lam, dtype=float))
    p = np.exp(-lam)
    cdf = p.copy()
    k = np.zeros(u.shape)
    active = u >= cdf
    n = 0
    while np.any(active) and n < 1000:
        n += 1
        k += active
        p = p * lam / n
        cdf = cdf + p
        active = active & (u >= cdf)
    return k


def leg_times_from_draws(nominal, z, u, noise: NoiseModel) -> np.ndarray:
    """Apply the leg law to standard-normal draws ``z`` and uniform draws ``u``."""
    t = np.asarray(nominal, dtype=float)
    f = t + noise.sigma_frac * t * z
    if noise.maneuver_rate > 0 and noise.maneuver_cost > 0:
        f = f + noise.maneuver_cost * poisson_inverse(u, noise.maneuver_rate * t / 3600.0)
    return np.maximum(f, noise.floor_frac * t)


def sample_leg_times(nominal, noise: NoiseModel, rng: np.random.Generator, size=None):
    """Draw realised leg times; ``size`` prepends sample dimensions."""
    t = np.asarray(nominal, dtype=float)
    shape = t.shape if size is None else tuple(np.atleast_1d(size)) + t.shape
    z = rng.standard_normal(shape)
    u = rng.random(shape)
    out = leg_times_from_draws(t, z, u, noise)
    return float(out) if out.ndim == 0 else out


def _legs(route_nodes, matrix: CostMatrix, origin: int):
    idx = np.array([origin, *(n + 1 for n in route_nodes), matrix.end], dtype=int)
    return matrix.transit[idx[:-1], idx[1:]], float(np.sum(matrix.service[idx[1:]]))


def route_nodes_of(route) -> tuple[int, ...]:
    return tuple(route.nodes) if isinstance(route, Route) else tuple(route)


def route_cost_sample(route, matrix: CostMatrix, noise: NoiseModel, rng: np.random.Generator,
                      size=None, origin: int = START):
    """Realised time of a whole route: noisy legs plus deterministic service."""
    transit, service = _legs(route_nodes_of(route), matrix, origin)
    legs = sample_leg_times(transit, noise, rng, size=size)
    return np.sum(legs, axis=-1) + service


def make_route(vehicle: int, nodes, matrix: CostMatrix, origin: int = START) -> Route:
    nodes = tuple(int(n) for n in nodes)
    return Route(vehicle, nodes, matrix.route_time(nodes, origin),
                 float(sum(matrix.rho[n + 1] for n in nodes)))


class RobustEvaluator:
    """Quantile of sampled route time using common random numbers (deterministic per seed)."""

    def __init__(self, matrix: CostMatrix, noise: NoiseModel, quantile: float, samples: int,
                 max_legs: int, seed: int, origin: int = START):
        rng = np.random.default_rng(seed)
        self.matrix = matrix
        self.noise = noise
        self.q = quantile
        self.origin = origin
        self.z = rng.standard_normal((samples, max_legs))
        self.u = rng.random((samples, max_legs))
        self._memo: dict[tuple, float] = {}
        self.deterministic = noise.sigma_frac == 0 and (noise.maneuver_rate == 0 or noise.maneuver_cost == 0)

    def samples(self, nodes) -> np.ndarray:
        transit, service = _legs(nodes, self.matrix, self.origin)
        L = transit.size
        if L > self.z.shape[1]:
            raise ValueError("route longer than the evaluator was sized for")
        legs = leg_times_from_draws(transit[None, :], self.z[:, :L], self.u[:, :L], self.noise)
        return np.sum(legs, axis=1) + service

    def quantile(self, nodes) -> float:
        key = tuple(nodes)
        v = self._memo.get(key)
        if v is None:
            if self.deterministic:
                transit, service = _legs(key, self.matrix, self.origin)
                v = float(np.sum(np.maximum(transit, self.noise.floor_frac * transit)) + service)
            else:
                v = float(np.quantile(self.samples(key), self.q))
            self._memo[key] = v
        return v


def drop_least_efficient(route, required_saving: float, matrix: CostMatrix, origin: int = START):
    """Remove lowest rho/saved-time nodes until ``required_saving`` seconds are recovered.

    Returns (new Route, dropped node ids in removal order).
    """
    vehicle = route.vehicle if isinstance(route, Route) else 0
    nodes = list(route_nodes_of(route))
    C = matrix.cost
    dropped: list[int] = []
    saved = 0.0
    while nodes and saved < required_saving:
        seq = [origin, *(n + 1 for n in nodes), matrix.end]
        best, best_phi = None, math.inf
        for i, n in enumerate(nodes):
            a, j, b = seq[i], seq[i + 1], seq[i + 2]
            dt = C[a, j] + C[j, b] - C[a, b]
            phi = matrix.rho[j] / dt if dt > 0 else math.inf
            if phi < best_phi or (phi == best_phi and n < nodes[best]):
                best, best_phi = i, phi
        if best is None:  # every removal saves nothing
            best = min(range(len(nodes)), key=lambda i: nodes[i])
        a, j, b = seq[best], seq[best + 1], seq[best + 2]
        saved += C[a, j] + C[j, b] - C[a, b]
        dropped.append(nodes.pop(best))
    return make_route(vehicle, nodes, matrix, origin), dropped


def best_insertion(route, node: int, budget_remaining: float, matrix: CostMatrix, origin: int = START):
    """Best place to add ``node``: (position, psi) with psi = rho / added time.

    Positions whose added time does not stay strictly below ``budget_remaining`` are
    excluded; when none remain the result is (None, 0.0).
    """
    nodes = route_nodes_of(route)
    if node in nodes:
        raise ValueError(f"node {node} already routed")
    seq = np.array([origin, *(n + 1 for n in nodes), matrix.end], dtype=int)
    j = node + 1
    C = matrix.cost
    dt = C[seq[:-1], j] + C[j, seq[1:]] - C[seq[:-1], seq[1:]]
    ok = dt < budget_remaining
    if not np.any(ok):
        return None, 0.0
    psi = np.where(ok, matrix.rho[j] / np.maximum(dt, 1e-12), -np.inf)
    pos = int(np.argmax(psi))  # first maximum: earliest position
    return pos, float(psi[pos])


def two_opt_route(nodes: list[int], matrix: CostMatrix, origin: int = START) -> list[int]:
    if len(nodes) < 2:
        return list(nodes)
    T = matrix.transit
    path = [origin, *(n + 1 for n in nodes), matrix.end]
    n = len(path)
    improved = True
    while improved:
        improved = False
        for i in range(n - 3):
            for k in range(i + 2, n - 1):
                a, b, c, d = path[i], path[i + 1], path[k], path[k + 1]
                if T[a, c] + T[b, d] < T[a, b] + T[c, d] - 1e-9:
                    path[i + 1 : k + 1] = path[i + 1 : k + 1][::-1]
                    improved = True
    return [p - 1 for p in path[1:-1]]


def or_opt_route(nodes: list[int], matrix: CostMatrix, origin: int = START) -> list[int]:
    """Relocate single nodes while that shortens the route."""
    nodes = list(nodes)
    improved = True
    while improved and len(nodes) > 1:
        improved = False
        base = matrix.route_time(nodes, origin)
        for i in range(len(nodes)):
            n = nodes[i]
            rest = nodes[:i] + nodes[i + 1 :]
            pos, _ = best_insertion(rest, n, math.inf, matrix, origin)
            cand = rest[:pos] + [n] + rest[pos:]
            t = matrix.route_time(cand, origin)
            if t < base - 1e-9:
                nodes, base, improved = cand, t, True
                break
    return nodes


@dataclass
class RouteOptParams:
    population: int = 30
    generations: int = 120
    stall_generations: int = 30
    quantile: float = 0.9
    samples: int = 64
    tournament: int = 3
    elitism: int = 2
    crossover: float = 0.9
    mutation: float = 0.4
    local_search: float = 0.3  # probability of polishing an offspring
    verify_samples: int = 4096
    # the final check requires quantile + verify_margin_sd * sample std <= budget
    verify_margin_sd: float = 0.15


class _Search:
    def __init__(self, node_set, budget, matrix, noise, params: RouteOptParams, seed, origin):
        self.pool = sorted(int(n) for n in node_set)
        self.budget = budget
        self.matrix = matrix
        self.noise = noise
        self.params = params
        self.origin = origin
        self.rnd = random.Random(seed)
        self.ev = RobustEvaluator(matrix, noise, params.quantile, params.samples,
                                  len(self.pool) + 1, derive_seed(seed, 1), origin)

    def feasible(self, nodes) -> bool:
        return self.ev.quantile(nodes) <= self.budget

    def key(self, nodes):
        m = self.matrix
        value = round(float(sum(m.rho[n + 1] for n in nodes)), 12)
        return (value, -m.route_time(nodes, self.origin))

    def repair(self, nodes: list[int]) -> list[int]:
        while nodes and not self.feasible(nodes):
            excess = self.ev.quantile(nodes) - self.budget
            r, _ = drop_least_efficient(nodes, max(excess, 1e-9), self.matrix, self.origin)
            nodes = list(r.nodes)
        return nodes

    def fill(self, nodes: list[int]) -> list[int]:
        """Greedy ratio insertion of unused pool nodes while the quantile budget holds."""
        nodes = list(nodes)
        tried: set[int] = set()
        while True:
            slack = self.budget - self.ev.quantile(nodes)
            if slack <= 0:
                return nodes
            best = None
            for n in self.pool:
                if n in tried or n in nodes:
                    continue
                pos, psi = best_insertion(nodes, n, slack, self.matrix, self.origin)
                if pos is not None and (best is None or psi > best[2]):
                    best = (n, pos, psi)
            if best is None:
                return nodes
            n, pos, _ = best
            cand = nodes[:pos] + [n] + nodes[pos:]
            if self.feasible(cand):
                nodes = cand
            else:
                tried.add(n)

    def polish(self, nodes: list[int]) -> list[int]:
        nodes = or_opt_route(two_opt_route(nodes, self.matrix, self.origin), self.matrix, self.origin)
        return self.fill(self.repair(nodes))

    def crossover(self, a: list[int], b: list[int]) -> list[int]:
        if not a:
            return list(b)
        i, j = sorted(self.rnd.sample(range(len(a) + 1), 2)) if len(a) > 0 else (0, 0)
        seg = a[i:j]
        taken = set(seg)
        rest = [g for g in b if g not in taken]
        i = min(i, len(rest))
        return rest[:i] + seg + rest[i:]

    def mutate(self, nodes: list[int]) -> list[int]:
        nodes = list(nodes)
        unused = [n for n in self.pool if n not in nodes]
        op = self.rnd.random()
        if op < 0.3 and unused:
            n = self.rnd.choice(unused)
            pos, _ = best_insertion(nodes, n, math.inf, self.matrix, self.origin)
            nodes.insert(pos, n)
        elif op < 0.45 and nodes:
            nodes.pop(self.rnd.randrange(len(nodes)))
        elif len(nodes) >= 2:
            i, j = sorted(self.rnd.sample(range(len(nodes)), 2))
            if op < 0.7:
                nodes[i], nodes[j] = nodes[j], nodes[i]
            else:
                nodes[i : j + 1] = nodes[i : j + 1][::-1]
        return nodes

    def run(self, seeds: list[list[int]]) -> list[int]:
        p = self.params
        pop = [self.polish(self.repair(list(s))) for s in seeds]
        while len(pop) < p.population:
            cand = self.pool[:]
            self.rnd.shuffle(cand)
            cand = cand[: self.rnd.randint(0, len(cand))]
            pop.append(self.repair(cand))
        keys = [self.key(x) for x in pop]
        best_key = max(keys)
        stall = 0
        for _ in range(p.generations):
            order = sorted(range(len(pop)), key=lambda i: (keys[i], -i), reverse=True)
            nxt = [pop[i] for i in order[: p.elitism]]
            while len(nxt) < p.population:
                pa = max(self.rnd.sample(range(len(pop)), p.tournament), key=lambda i: (keys[i], -i))
                pb = max(self.rnd.sample(range(len(pop)), p.tournament), key=lambda i: (keys[i], -i))
                child = self.crossover(pop[pa], pop[pb]) if self.rnd.random() < p.crossover else list(pop[pa])
                if self.rnd.random() < p.mutation:
                    child = self.mutate(child)
                child = self.repair(child)
                if self.rnd.random() < p.local_search:
                    child = self.polish(child)
                nxt.append(child)
            pop = nxt
            keys = [self.key(x) for x in pop]
            gen_best = max(keys)
            if gen_best > best_key:
                best_key, stall = gen_best, 0
            else:
                stall += 1
                if stall >= p.stall_generations:
                    break
        i = max(range(len(pop)), key=lambda i: (keys[i], -i))
        return pop[i]

    def verify(self, nodes: list[int], seed: int) -> list[int]:
        """Re-check with a large fresh sample and drop nodes until the quantile clears the budget."""
        if self.ev.deterministic:
            return self.repair(nodes)
        rng = np.random.default_rng(seed)
        p = self.params
        while nodes:
            s = route_cost_sample(nodes, self.matrix, self.noise, rng, size=p.verify_samples, origin=self.origin)
            excess = np.quantile(s, p.quantile) + p.verify_margin_sd * np.std(s) - self.budget
            if excess <= 0:
                break
            r, _ = drop_least_efficient(nodes, excess, self.matrix, self.origin)
            nodes = list(r.nodes)
        return nodes


def greedy_ratio_route(node_set, budget: float, matrix: CostMatrix, noise: NoiseModel,
                       params: RouteOptParams | None = None, seed: int = 0, vehicle: int = 0,
                       origin: int = START) -> Route:
    """Greedy best-psi insertion from an empty route, with the same feasibility test as the GA."""
    params = params or RouteOptParams()
    s = _Search(node_set, budget, matrix, noise, params, seed, origin)
    nodes = s.verify(s.fill([]), derive_seed(seed, 2))
    return make_route(vehicle, nodes, matrix, origin)


def optimize_route(node_set, budget: float, matrix: CostMatrix, noise: NoiseModel,
                   params: RouteOptParams | None = None, seed: int = 0, vehicle: int = 0,
                   initial=None, origin: int = START) -> Route:
    """Choose and order a subset of ``node_set`` maximising collected rho within ``budget``.

    Feasibility means the configured quantile of sampled route time fits the budget.
    Ties on value go to the shorter expected time.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    params = params or RouteOptParams()
    s = _Search(node_set, budget, matrix, noise, params, seed, origin)
    greedy = s.fill([])
    seeds = [greedy]
    if initial is not None:
        seeds.insert(0, [int(n) for n in initial if int(n) in set(s.pool)])
    best = s.run(seeds) if s.pool else []
    vseed = derive_seed(seed, 2)
    cands = [s.verify(list(best), vseed), s.verify(list(greedy), vseed)]
    nodes = max(cands, key=s.key)
    return make_route(vehicle, nodes, matrix, origin)


def route_quantile(route, matrix: CostMatrix, noise: NoiseModel, q: float, samples: int, seed: int,
                   origin: int = START) -> float:
    rng = np.random.default_rng(seed)
    return float(np.quantile(route_cost_sample(route, matrix, noise, rng, size=samples, origin=origin), q))


@dataclass
class PlannerParams:
    prop_speed: float = 1.0
    ga: GAParams = field(default_factory=GAParams)
    route: RouteOptParams = field(default_factory=RouteOptParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    squared_segmentation: bool = False
    fleet_size: int | None = None  # override the estimate
    max_sweeps: int = 10


def _verify_fits(nodes, t_max, matrix, noise, params: RouteOptParams, seed) -> bool:
    if not nodes:
        return True
    rng = np.random.default_rng(seed)
    s = route_cost_sample(nodes, matrix, noise, rng, size=params.verify_samples)
    return np.quantile(s, params.quantile) + params.verify_margin_sd * np.std(s) <= t_max


def _pickup_loop(routes: list[Route], idle: set[int], t_max: float, matrix: CostMatrix,
                 params: PlannerParams, seed: int) -> tuple[list[Route], int]:
    """Insert idle nodes into routes with spare budget, re-optimising changed routes, to a fixed point."""
    rp = params.route
    sweeps = 0
    for sweep in range(params.max_sweeps):
        sweeps += 1
        changed = set()
        for m, r in enumerate(routes):
            nodes = list(r.nodes)
            ev = RobustEvaluator(matrix, params.noise, rp.quantile, rp.samples,
                                 len(nodes) + len(idle) + 1, derive_seed(seed, 10, sweep, m))
            rejected: set[int] = set()
            while True:
                slack = t_max - ev.quantile(nodes)
                best = None
                for n in sorted(idle - rejected):
                    pos, psi = best_insertion(nodes, n, slack, matrix)
                    if pos is not None and (best is None or psi > best[2]):
                        best = (n, pos, psi)
                if best is None:
                    break
                n, pos, _ = best
                cand = nodes[:pos] + [n] + nodes[pos:]
                if ev.quantile(cand) <= t_max and _verify_fits(
                        cand, t_max, matrix, params.noise, rp, derive_seed(seed, 11, sweep, m, n)):
                    nodes = cand
                    idle.discard(n)
                    changed.add(m)
                else:
                    rejected.add(n)
            routes[m] = make_route(r.vehicle, nodes, matrix)
        if not changed:
            break
        for m in sorted(changed):
            r = routes[m]
            new = optimize_route(r.nodes, t_max, matrix, params.noise, rp, derive_seed(seed, 12, sweep, m),
                                 vehicle=r.vehicle, initial=r.nodes)
            if (new.expected_value, -new.expected_time) > (r.expected_value, -r.expected_time):
                idle |= set(r.nodes) - set(new.nodes)
                routes[m] = new
    return routes, sweeps


def plan_from_allocation(scenario: Scenario, node_sets, t_max: float, params: PlannerParams | None = None,
                         seed: int = 0, matrix: CostMatrix | None = None, pickup: bool = True) -> FleetPlan:
    """Optimise one route per node set (given order used as a seed) and optionally run the pickup loop."""
    params = params or PlannerParams()
    matrix = matrix or build_cost_matrix(scenario, params.prop_speed)
    routes = [
        optimize_route(nodes, t_max, matrix, params.noise, params.route, derive_seed(seed, 3, m),
                       vehicle=m, initial=nodes)
        for m, nodes in enumerate(node_sets)
    ]
    idle = set(range(len(scenario.nodes))) - {n for r in routes for n in r.nodes}
    sweeps = 0
    if pickup:
        routes, sweeps = _pickup_loop(routes, idle, t_max, matrix, params, seed)
    return FleetPlan(M=len(routes), routes=routes, t_max=t_max, idle_nodes=tuple(sorted(idle)),
                     notes={"sweeps": sweeps})


def preplan_fleet(scenario: Scenario, t_max: float, params: PlannerParams | None = None, seed: int = 0,
                  matrix: CostMatrix | None = None) -> FleetPlan:
    """Giant route -> fleet size -> balanced segmentation -> per-vehicle optimisation -> idle pickup."""
    params = params or PlannerParams()
    matrix = matrix or build_cost_matrix(scenario, params.prop_speed)
    gr = solve_giant_route(matrix, params.ga, derive_seed(seed, 0))
    overhead = estimate_overhead(gr, matrix)
    M = params.fleet_size or estimate_fleet_size(gr.total_time, overhead, t_max)
    M = min(M, len(scenario.nodes))
    seg = segment_giant_route(gr, M, matrix, params.squared_segmentation)
    plan = plan_from_allocation(scenario, seg.segments, t_max, params, seed, matrix)
    plan.giant_route = gr
    plan.segmentation = seg
    plan.overhead = overhead
    plan.notes["estimated_M"] = estimate_fleet_size(gr.total_time, overhead, t_max)
    return plan


def kmeans_plan(scenario: Scenario, M: int, t_max: float, params: PlannerParams | None = None, seed: int = 0,
                matrix: CostMatrix | None = None, pickup: bool = True) -> FleetPlan:
    """Baseline: k-means clusters routed by the same optimiser."""
    params = params or PlannerParams()
    clusters = kmeans_clusters(scenario, M, derive_seed(seed, 4))
    plan = plan_from_allocation(scenario, clusters, t_max, params, seed, matrix, pickup=pickup)
    plan.allocation = "k-means"
    return plan
