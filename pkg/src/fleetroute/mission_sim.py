"""Event-driven mission execution: noisy legs in the true field, discards, auctions, scoring."""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath

import numpy as np

from fleetroute.coordination import AgentView, run_auction
from fleetroute.giant_route import START, CostMatrix, build_cost_matrix
from fleetroute.ocean_field import CurrentField, Perturbation, realize_true_field
from fleetroute.plan import FleetPlan
from fleetroute.rng import derive_seed
from fleetroute.route_optimizer import (NoiseModel, PlannerParams, drop_least_efficient, leg_times_from_draws,
                                        preplan_fleet, sample_leg_times)
from fleetroute.scenario import Scenario, scenario_digest
from fleetroute.transit import PathPlannerParams, PathPlanningError, path_time, plan_path, straight_path


def sample_travel_time(nominal: float, noise: NoiseModel, rng: np.random.Generator, size=None):
    """Realised leg time; same law and implementation as the planner's route sampler."""
    if np.any(np.asarray(nominal) <= 0):
        raise ValueError("nominal leg time must be positive")
    return sample_leg_times(nominal, noise, rng, size=size)


def check_time_violation(agent: AgentView, matrix: CostMatrix) -> bool:
    """True iff the expected remaining time (plus any reserve) exceeds the remaining budget."""
    return agent.expected_remaining(matrix) + agent.reserve > agent.t_max - agent.elapsed


@dataclass(frozen=True)
class MissionEvent:
    t: float
    vehicle: int
    kind: str  # depart | arrive | collect | discard | bid | award | reject | finish | strand
    node: int | None = None
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"t": self.t, "vehicle": self.vehicle, "kind": self.kind}
        if self.node is not None:
            d["node"] = self.node
        if self.payload:
            d["payload"] = self.payload
        return d


@dataclass
class MissionLog:
    scenario: str  # reference (digest or path)
    seed: int
    options: dict
    events: list[MissionEvent]
    totals: dict  # vehicle -> {"time", "collected", "discards", "pickups"}
    theta: float
    J: float

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    @property
    def duration(self) -> float:
        return max((v["time"] for v in self.totals.values()), default=0.0)


@dataclass
class SimOptions:
    coordination: bool = True
    path_aware: bool = True
    # risk reserve held back at violation checks: mean manoeuvre delay plus z standard
    # deviations over the next leg and the leg home, plus a fraction of those legs for
    # straight-line vs actual path mismatch in path-aware mode; z = 0 and margin 0 give the bare check
    reserve_z: float = 3.0
    path_margin: float = 0.1
    eps_min: float = 1e-6  # bid increment floor, in psi units (rho per second)
    checkpoint_interval: float | None = None  # extra mid-leg checks every this many seconds
    path_params: PathPlannerParams = field(default_factory=lambda: PathPlannerParams(iterations=25))


def theta_from_events(events, scenario: Scenario) -> tuple[float, float]:
    rho = {n.id: n.rho for n in scenario.nodes}
    J = 0.0
    for e in events:
        if e.kind == "collect":
            J += rho[e.node]
    total = scenario.total_rho
    return (J / total if total > 0 else 0.0), J


def completion_metrics(log: MissionLog, scenario: Scenario) -> tuple[float, float]:
    return theta_from_events(log.events, scenario)


class PathOracle:
    """Obstacle-aware paths planned in the believed field, cached per index pair."""

    def __init__(self, scenario: Scenario, matrix: CostMatrix, params: PathPlannerParams,
                 prop_speed: float = 1.0, seed: int = 0):
        self.scenario = scenario
        self.points = matrix.points
        self.params = params
        self.prop = prop_speed
        self.seed = seed
        self._paths: dict[tuple[int, int], np.ndarray] = {}

    def path(self, i: int, j: int) -> np.ndarray:
        key = (i, j)
        p = self._paths.get(key)
        if p is None:
            a, b = self.points[i], self.points[j]
            try:
                p = plan_path(a, b, self.scenario.field, self.scenario.obstacles, self.params,
                              derive_seed(self.seed, i, j), self.prop).waypoints
            except PathPlanningError as exc:
                p = exc.best.waypoints
            except ValueError:  # coincident points
                p = straight_path(a, b, 2)
            self._paths[key] = p
        return p

    def nominal(self, i: int, j: int, fld: CurrentField, fallback: float) -> float:
        t = path_time(self.path(i, j), fld, self.prop)
        if math.isfinite(t) and t > 0:
            return t
        # the believed path crosses a true-field core it cannot hold; replan with local sensing
        try:
            p = plan_path(self.points[i], self.points[j], fld, self.scenario.obstacles, self.params,
                          derive_seed(self.seed, i, j, 1), self.prop)
            t = path_time(p, fld, self.prop)
        except (PathPlanningError, ValueError):
            t = math.inf
        if math.isfinite(t) and t > 0:
            return t
        return 1.5 * fallback if fallback > 0 else 1.0


@dataclass
class _Vehicle:
    id: int
    route: list  # remaining node ids after ``target``
    at: int = START  # matrix index of the last point reached
    target: int = START
    depart: float = 0.0
    arrive: float = 0.0
    done: bool = False
    stranded: bool = False
    collected: list = field(default_factory=list)
    discards: int = 0
    pickups: int = 0
    time: float = 0.0


class _Mission:
    def __init__(self, plan, scenario, true_field, noise, opts: SimOptions, seed, matrix, oracle):
        self.plan = plan
        self.scenario = scenario
        self.field = true_field
        self.noise = noise
        self.opts = opts
        self.seed = seed
        self.matrix = matrix
        self.oracle = oracle
        self.t_max = plan.t_max
        self.events: list[MissionEvent] = []
        self.idle: set[int] = set(plan.idle_nodes)
        self.vehicles = [_Vehicle(r.vehicle, list(r.nodes)) for r in plan.routes]
        self._visits: dict[tuple[int, int], int] = {}
        self.heap: list = []

    # -- helpers -------------------------------------------------------------
    def log(self, t, v, kind, node=None, **payload):
        self.events.append(MissionEvent(float(t), int(v), kind, node, payload))

    def leg_time(self, i: int, j: int) -> float:
        nominal = float(self.matrix.transit[i, j])
        if self.opts.path_aware:
            nominal = self.oracle.nominal(i, j, self.field, nominal)
        if nominal <= 0:
            return 0.0
        # draws keyed by the leg so coordination on/off runs share their randomness
        k = self._visits.get((i, j), 0)
        self._visits[(i, j)] = k + 1
        rng = np.random.default_rng(derive_seed(self.seed, 7, i, j, k))
        z, u = rng.standard_normal(), rng.random()
        return float(leg_times_from_draws(nominal, z, u, self.noise))

    def reserve(self, anchor: int, route) -> float:
        nxt = route[0] + 1 if route else self.matrix.end
        legs = np.array([self.matrix.transit[anchor, nxt], self.matrix.transit[nxt, self.matrix.end]])
        if not route:
            legs = legs[:1]
        mean_extra = float(np.sum(self.noise.leg_mean(legs) - legs))
        r = mean_extra + self.opts.reserve_z * math.sqrt(float(np.sum(self.noise.leg_var(legs))))
        if self.opts.path_aware:
            r += self.opts.path_margin * float(np.sum(legs))
        return r

    def view(self, v: _Vehicle, now: float, at_node: bool) -> AgentView | None:
        if at_node:
            anchor, elapsed = v.at, now
        else:
            if v.target == self.matrix.end:
                return None
            anchor = v.target
            # committed next node: expected arrival plus its service
            elapsed = max(now, v.depart + float(self.matrix.cost[v.at, v.target]))
        return AgentView(v.id, anchor, elapsed, v.route, self.t_max, self.reserve(anchor, v.route))

    # -- decisions -----------------------------------------------------------
    def enforce_budget(self, v: _Vehicle, now: float, at_node: bool):
        agent = self.view(v, now, at_node)
        if agent is None:
            return
        while check_time_violation(agent, self.matrix):
            if not v.route:
                # the reserve is advisory; stranding means even the bare expected trip home misses
                bare = replace(agent, reserve=0.0)
                if at_node and not v.stranded and check_time_violation(bare, self.matrix):
                    v.stranded = True
                    self.log(now, v.id, "strand", None, reason="end unreachable within budget")
                return
            need = agent.expected_remaining(self.matrix) + agent.reserve - (self.t_max - agent.elapsed)
            new, dropped = drop_least_efficient(v.route, need, self.matrix, agent.anchor)
            v.route[:] = list(new.nodes)
            for n in dropped:
                v.discards += 1
                self.idle.add(n)
                self.log(now, v.id, "discard", n)
            agent = self.view(v, now, at_node)

    def coordinate(self, now: float, decider: _Vehicle):
        if not (self.opts.coordination and self.idle):
            return
        agents = []
        for v in self.vehicles:
            if v.done:
                continue
            a = self.view(v, now, at_node=v is decider or v.target == v.at)
            if a is not None:
                agents.append(a)
        if not agents:
            return
        res = run_auction(sorted(self.idle), agents, self.opts.eps_min, self.matrix)
        by_id = {v.id: v for v in self.vehicles}
        for ev in res.state.transcript:
            payload = {k: val for k, val in ev.items() if k not in ("kind", "vehicle", "node")}
            self.log(now, ev["vehicle"], ev["kind"], ev["node"], **payload)
        for node, vid in res.assignment.items():
            self.idle.discard(node)
            by_id[vid].pickups += 1

    def depart(self, v: _Vehicle, now: float):
        nxt = v.route.pop(0) + 1 if v.route else self.matrix.end
        v.target = nxt
        v.depart = now
        v.arrive = now + self.leg_time(v.at, nxt)
        self.log(now, v.id, "depart", None if nxt == self.matrix.end else nxt - 1)
        heapq.heappush(self.heap, (v.arrive, 0, v.id))

    def run(self) -> MissionLog:
        end = self.matrix.end
        for v in self.vehicles:
            self.depart(v, 0.0)
            if self.opts.checkpoint_interval:
                heapq.heappush(self.heap, (self.opts.checkpoint_interval, 1, v.id))
        by_id = {v.id: v for v in self.vehicles}
        while self.heap:
            now, kind, vid = heapq.heappop(self.heap)
            v = by_id[vid]
            if v.done:
                continue
            if kind == 1:  # mid-leg checkpoint
                if now < v.arrive:
                    self.enforce_budget(v, now, at_node=False)
                    self.coordinate(now, None)
                    heapq.heappush(self.heap, (now + self.opts.checkpoint_interval, 1, v.id))
                continue
            v.at = v.target
            if v.at == end:
                v.done = True
                v.time = now
                self.log(now, v.id, "arrive", None)
                self.log(now, v.id, "finish", None, time=now)
                if now > self.t_max and not v.stranded:
                    v.stranded = True
                    self.log(now, v.id, "strand", None, reason="finished after budget", time=now)
                continue
            node = v.at - 1
            self.log(now, v.id, "arrive", node)
            now += float(self.matrix.service[v.at])
            v.collected.append(node)
            self.log(now, v.id, "collect", node, rho=float(self.matrix.rho[v.at]))
            self.enforce_budget(v, now, at_node=True)
            self.coordinate(now, v)
            self.depart(v, now)

        theta, J = theta_from_events(self.events, self.scenario)
        totals = {v.id: {"time": v.time, "collected": list(v.collected), "discards": v.discards,
                         "pickups": v.pickups} for v in self.vehicles}
        opts = {"coordination": self.opts.coordination, "path_aware": self.opts.path_aware,
                "reserve_z": self.opts.reserve_z, "path_margin": self.opts.path_margin,
                "checkpoint_interval": self.opts.checkpoint_interval}
        return MissionLog(scenario_digest(self.scenario), self.seed, opts, self.events, totals, theta, J)


def simulate_mission(plan: FleetPlan, scenario: Scenario, true_field: CurrentField | None = None,
                     noise: NoiseModel | None = None, options: SimOptions | None = None, seed: int = 0,
                     matrix: CostMatrix | None = None, oracle: PathOracle | None = None,
                     prop_speed: float = 1.0) -> MissionLog:
    """Fly one mission; deterministic for a given seed."""
    options = options or SimOptions()
    noise = noise or NoiseModel()
    true_field = true_field if true_field is not None else scenario.field
    matrix = matrix or build_cost_matrix(scenario, prop_speed)
    if options.path_aware and oracle is None:
        oracle = PathOracle(scenario, matrix, options.path_params, prop_speed, derive_seed(seed, 5))
    return _Mission(plan, scenario, true_field, noise, options, seed, matrix, oracle).run()


# -- log files -----------------------------------------------------------------

def log_to_jsonl(log: MissionLog, meta: dict | None = None) -> str:
    head = {"kind": "meta", **(meta or {}), "scenario": log.scenario, "mission_seed": log.seed, "options": log.options,
            "totals": {str(k): v for k, v in log.totals.items()}, "theta": log.theta, "J": log.J}
    lines = [json.dumps(head)] + [json.dumps(e.to_dict()) for e in log.events]
    return "\n".join(lines) + "\n"


def save_log(log: MissionLog, path, meta: dict | None = None):
    FilePath(path).write_text(log_to_jsonl(log, meta))


def load_log(path) -> MissionLog:
    lines = FilePath(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty log")
    head = json.loads(lines[0])
    if head.get("kind") != "meta":
        raise ValueError(f"{path}: first line is not a meta record")
    events = []
    for ln in lines[1:]:
        d = json.loads(ln)
        events.append(MissionEvent(d["t"], d["vehicle"], d["kind"], d.get("node"), d.get("payload", {})))
    totals = {int(k): v for k, v in head["totals"].items()}
    return MissionLog(head["scenario"], head["mission_seed"], head["options"], events, totals, head["theta"], head["J"])


# -- Monte Carlo -----------------------------------------------------------------

COLUMNS = ("run", "seed", "M", "theta", "J", "discards", "pickups", "runtime_s")


@dataclass
class MetricsTable:
    rows: list[dict]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def summary(self, name: str = "theta") -> dict:
        c = self.column(name)
        # shifting by the first value keeps std exactly 0 when every run agrees
        return {"mean": float(c.mean()), "std": float((c - c[0]).std()), "min": float(c.min()), "max": float(c.max())}

    def to_csv(self, meta: dict | None = None) -> str:
        buf = io.StringIO()
        if meta:
            buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.DictWriter(buf, fieldnames=COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        return buf.getvalue()


@dataclass
class MonteCarloConfig:
    runs: int = 50
    t_max: float = 18000.0
    noise: NoiseModel = field(default_factory=NoiseModel)
    perturbation: Perturbation = field(default_factory=Perturbation)
    sim: SimOptions = field(default_factory=SimOptions)
    planner: PlannerParams = field(default_factory=PlannerParams)


def _one_run(args):
    run, seed, plan, scenario, cfg, matrix, oracle = args
    fld = realize_true_field(scenario.field, cfg.perturbation, derive_seed(seed, 1))
    log = simulate_mission(plan, scenario, fld, cfg.noise, cfg.sim, derive_seed(seed, 2), matrix, oracle,
                           cfg.planner.prop_speed)
    row = {"run": run, "seed": seed, "M": plan.M, "theta": log.theta, "J": log.J,
           "discards": log.count("discard"), "pickups": log.count("award"), "runtime_s": log.duration}
    return row, log


def monte_carlo(scenario: Scenario, config: MonteCarloConfig | None = None, master_seed: int = 0,
                plan: FleetPlan | None = None, keep_logs: bool = False, workers: int | None = None):
    """Independent missions with derived seeds; returns (MetricsTable, plan, logs or None)."""
    config = config or MonteCarloConfig()
    if config.runs < 1:
        raise ValueError("run count must be >= 1")
    matrix = build_cost_matrix(scenario, config.planner.prop_speed)
    if plan is None:
        plan = preplan_fleet(scenario, config.t_max, config.planner, derive_seed(master_seed, 0), matrix)
    oracle = None
    if config.sim.path_aware:
        oracle = PathOracle(scenario, matrix, config.sim.path_params, config.planner.prop_speed,
                            derive_seed(master_seed, 5))
    jobs = [(r, derive_seed(master_seed, 100, r), plan, scenario, config, matrix, oracle)
            for r in range(config.runs)]
    if workers is None:
        workers = int(os.environ.get("FLEETROUTE_THREADS", "1") or 1)
    if workers > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_run, jobs))
    else:
        results = [_one_run(j) for j in jobs]
    results.sort(key=lambda x: x[0]["run"])
    table = MetricsTable([r for r, _ in results])
    return table, plan, ([lg for _, lg in results] if keep_logs else None)
