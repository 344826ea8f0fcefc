"""Mission world: sensor nodes, region, obstacles and vortex parameters.

Scenarios are immutable. ``generate_scenario`` draws a randomized instance from a
``ScenarioConfig``; ``save_scenario``/``load_scenario`` round-trip the JSON form.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from fleetroute import __version__
from fleetroute.ocean_field import CurrentField, LambVortex


class ScenarioError(ValueError):
    """Malformed or invariant-violating scenario data.

    ``field`` names the offending key (dotted path for nested entries).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    rho: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    r: float

    def contains(self, p, clearance: float = 0.0) -> bool:
        return math.hypot(p[0] - self.x, p[1] - self.y) <= self.r + clearance


@dataclass(frozen=True)
class Scenario:
    region: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    nodes: tuple[Node, ...]
    start: tuple[float, float]
    end: tuple[float, float]
    obstacles: tuple[Obstacle, ...] = ()
    vortexes: tuple[LambVortex, ...] = ()
    t0: float = 5.0
    service_coeff: float = 20.0

    def __post_init__(self):
        validate_scenario(self)

    @property
    def field(self) -> CurrentField:
        return CurrentField(self.vortexes)

    @property
    def total_rho(self) -> float:
        return float(sum(n.rho for n in self.nodes))

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id]


@dataclass
class ScenarioConfig:
    region_size: float = 10_000.0
    node_count: int = 60
    vortex_count: int = 20
    gamma_mean: float = 0.0
    gamma_std: float = 50.0
    delta_mean: float = 80.0
    delta_std: float = 100.0
    delta_floor: float = 1.0
    obstacle_count: int = 10
    obstacle_radius: tuple[float, float] = (100.0, 300.0)
    obstacle_clearance: float = 50.0
    t0: float = 5.0
    service_coeff: float = 20.0
    # fractions of region_size; launch and recovery sit inside the region on one diagonal
    start: tuple[float, float] = (0.25, 0.25)
    end: tuple[float, float] = (0.75, 0.75)
    seed: int = 0

    def validate(self):
        if self.node_count < 1:
            raise ScenarioError("node_count", "must be >= 1")
        if not self.region_size > 0:
            raise ScenarioError("region_size", "must be positive")
        if self.vortex_count < 0:
            raise ScenarioError("vortex_count", "must be >= 0")
        if self.obstacle_count < 0:
            raise ScenarioError("obstacle_count", "must be >= 0")
        if tuple(self.start) == tuple(self.end):
            raise ScenarioError("end", "must differ from start")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def validate_scenario(s: Scenario):
    xmin, ymin, xmax, ymax = s.region
    if not (xmax > xmin and ymax > ymin):
        raise ScenarioError("region", "must have positive extent")
    if len(s.nodes) < 1:
        raise ScenarioError("nodes", "at least one node required")
    for k, n in enumerate(s.nodes):
        if n.id != k:
            raise ScenarioError(f"nodes[{k}].id", f"ids must be contiguous from 0, got {n.id}")
        if not (0.0 < n.rho <= 1.0):
            raise ScenarioError(f"nodes[{k}].rho", f"data amount must lie in (0, 1], got {n.rho}")
        if not (xmin <= n.x <= xmax and ymin <= n.y <= ymax):
            raise ScenarioError(f"nodes[{k}]", "position outside region")
    if tuple(s.start) == tuple(s.end):
        raise ScenarioError("end", "must differ from start")
    for k, ob in enumerate(s.obstacles):
        if not ob.r > 0:
            raise ScenarioError(f"obstacles[{k}].r", "radius must be positive")
        if ob.contains(s.start) or ob.contains(s.end):
            raise ScenarioError(f"obstacles[{k}]", "covers start or end")
    for k, v in enumerate(s.vortexes):
        if not v.delta > 0:
            raise ScenarioError(f"vortexes[{k}].delta", "radius must be positive")
        if not math.isfinite(v.gamma):
            raise ScenarioError(f"vortexes[{k}].gamma", "strength must be finite")
    if s.t0 < 0:
        raise ScenarioError("t0", "communication delay must be >= 0")
    if s.service_coeff < 0:
        raise ScenarioError("service_coeff", "must be >= 0")


def service_time(node: Node, scenario: Scenario) -> float:
    """Data-collection time at ``node``: fixed delay plus a term linear in rho."""
    return scenario.t0 + scenario.service_coeff * node.rho


def generate_scenario(config: ScenarioConfig) -> Scenario:
    config.validate()
    rng = np.random.default_rng(config.seed)
    size = float(config.region_size)
    start = (config.start[0] * size, config.start[1] * size)
    end = (config.end[0] * size, config.end[1] * size)

    xy = rng.uniform(0.0, size, size=(config.node_count, 2))
    rho = 1.0 - rng.random(config.node_count)  # (0, 1]
    nodes = tuple(
        Node(i, float(xy[i, 0]), float(xy[i, 1]), float(rho[i])) for i in range(config.node_count)
    )

    centers = rng.uniform(0.0, size, size=(config.vortex_count, 2))
    gammas = rng.normal(config.gamma_mean, config.gamma_std, size=config.vortex_count)
    deltas = rng.normal(config.delta_mean, config.delta_std, size=config.vortex_count)
    deltas = np.maximum(deltas, config.delta_floor)
    vortexes = tuple(
        LambVortex(float(c[0]), float(c[1]), float(g), float(d))
        for c, g, d in zip(centers, gammas, deltas)
    )

    keep_clear = [start, end] + [n.position for n in nodes]
    obstacles: list[Obstacle] = []
    rmin, rmax = config.obstacle_radius
    attempts = 0
    while len(obstacles) < config.obstacle_count and attempts < 1000 * max(1, config.obstacle_count):
        attempts += 1
        x, y = rng.uniform(0.0, size, size=2)
        r = rng.uniform(rmin, rmax)
        ob = Obstacle(float(x), float(y), float(r))
        if any(ob.contains(p, config.obstacle_clearance) for p in keep_clear):
            continue
        if any(math.hypot(o.x - ob.x, o.y - ob.y) < o.r + ob.r for o in obstacles):
            continue
        obstacles.append(ob)

    return Scenario(
        region=(0.0, 0.0, size, size),
        nodes=nodes,
        start=start,
        end=end,
        obstacles=tuple(obstacles),
        vortexes=vortexes,
        t0=config.t0,
        service_coeff=config.service_coeff,
    )


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "region": list(s.region),
        "start": list(s.start),
        "end": list(s.end),
        "nodes": [{"id": n.id, "x": n.x, "y": n.y, "rho": n.rho} for n in s.nodes],
        "obstacles": [{"x": o.x, "y": o.y, "r": o.r} for o in s.obstacles],
        "vortexes": [{"x": v.x, "y": v.y, "gamma": v.gamma, "delta": v.delta} for v in s.vortexes],
        "t0": s.t0,
        "service_coeff": s.service_coeff,
    }


def _require(d: dict, key: str, where: str = ""):
    name = f"{where}.{key}" if where else key
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError(name, "missing required field")
    return d[key]


def _num(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(name, f"expected a number, got {value!r}")
    return float(value)


def _point(value, name: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError(name, "expected [x, y]")
    return (_num(value[0], name), _num(value[1], name))


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    region = _require(d, "region")
    if not isinstance(region, (list, tuple)) or len(region) != 4:
        raise ScenarioError("region", "expected [xmin, ymin, xmax, ymax]")
    nodes = []
    for k, nd in enumerate(_require(d, "nodes")):
        w = f"nodes[{k}]"
        nid = _require(nd, "id", w)
        if isinstance(nid, bool) or not isinstance(nid, int):
            raise ScenarioError(f"{w}.id", "expected an integer")
        nodes.append(
            Node(nid, _num(_require(nd, "x", w), f"{w}.x"), _num(_require(nd, "y", w), f"{w}.y"),
                 _num(_require(nd, "rho", w), f"{w}.rho"))
        )
    obstacles = []
    for k, ob in enumerate(d.get("obstacles", [])):
        w = f"obstacles[{k}]"
        obstacles.append(Obstacle(*(_num(_require(ob, key, w), f"{w}.{key}") for key in ("x", "y", "r"))))
    vortexes = []
    for k, v in enumerate(d.get("vortexes", [])):
        w = f"vortexes[{k}]"
        vortexes.append(
            LambVortex(*(_num(_require(v, key, w), f"{w}.{key}") for key in ("x", "y", "gamma", "delta")))
        )
    return Scenario(
        region=tuple(_num(v, "region") for v in region),
        nodes=tuple(nodes),
        start=_point(_require(d, "start"), "start"),
        end=_point(_require(d, "end"), "end"),
        obstacles=tuple(obstacles),
        vortexes=tuple(vortexes),
        t0=_num(_require(d, "t0"), "t0"),
        service_coeff=_num(_require(d, "service_coeff"), "service_coeff"),
    )


def dumps_scenario(s: Scenario, meta: dict | None = None) -> str:
    d = scenario_to_dict(s)
    if meta is not None:
        d = {"meta": {"tool": "fleetroute", "version": __version__, **meta}, **d}
    return json.dumps(d, indent=1)


def scenario_digest(s: Scenario) -> str:
    """Short content hash; logs and plans use it to refer back to their scenario."""
    blob = json.dumps(scenario_to_dict(s), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_scenario(s: Scenario, path, meta: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(dumps_scenario(s, meta) + "\n")
    return path


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<root>", f"invalid JSON ({exc})") from exc
    return scenario_from_dict(d)


persist_scenario = save_scenario
