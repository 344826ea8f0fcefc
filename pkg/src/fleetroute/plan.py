"""Route and fleet-plan records plus their JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Route:
    vehicle: int
    nodes: tuple[int, ...]  # node ids; start and end are implicit
    expected_time: float
    expected_value: float

    def __len__(self):
        return len(self.nodes)


@dataclass
class FleetPlan:
    M: int
    routes: list[Route]
    t_max: float
    idle_nodes: tuple[int, ...]
    giant_route: object | None = None  # GiantRoute
    segmentation: object | None = None  # Segmentation
    overhead: float | None = None
    allocation: str = "giant-route"
    notes: dict = field(default_factory=dict)

    def expected_value(self) -> float:
        return float(sum(r.expected_value for r in self.routes))

    def expected_completion(self, scenario) -> float:
        return self.expected_value() / scenario.total_rho

    def assigned(self) -> list[int]:
        return [n for r in self.routes for n in r.nodes]

    def check(self, node_count: int):
        """Node-disjointness and full coverage (routes plus idle set)."""
        seen = self.assigned()
        if len(seen) != len(set(seen)):
            raise AssertionError("a node appears in more than one route")
        if set(seen) & set(self.idle_nodes):
            raise AssertionError("routed node also listed idle")
        if set(seen) | set(self.idle_nodes) != set(range(node_count)):
            raise AssertionError("nodes missing from both routes and idle set")


def plan_to_dict(plan: FleetPlan) -> dict:
    d = {
        "M": plan.M,
        "t_max": plan.t_max,
        "allocation": plan.allocation,
        "routes": [
            {"vehicle": r.vehicle, "nodes": list(r.nodes), "expected_time": r.expected_time,
             "expected_value": r.expected_value}
            for r in plan.routes
        ],
        "idle_nodes": list(plan.idle_nodes),
    }
    if plan.giant_route is not None:
        d["giant_route"] = {"order": list(plan.giant_route.order), "total_time": plan.giant_route.total_time}
    if plan.segmentation is not None:
        d["segmentation"] = {"cut_points": list(plan.segmentation.cut_points),
                             "segments": [list(s) for s in plan.segmentation.segments]}
    if plan.overhead is not None:
        d["overhead"] = plan.overhead
    if "scenario" in plan.notes:
        d["scenario"] = plan.notes["scenario"]
    return d


def plan_from_dict(d: dict) -> FleetPlan:
    try:
        routes = [Route(int(r["vehicle"]), tuple(int(n) for n in r["nodes"]), float(r["expected_time"]),
                        float(r["expected_value"])) for r in d["routes"]]
        return FleetPlan(M=int(d["M"]), routes=routes, t_max=float(d["t_max"]),
                         idle_nodes=tuple(int(n) for n in d["idle_nodes"]),
                         overhead=d.get("overhead"), allocation=d.get("allocation", "giant-route"),
                         notes={"scenario": d["scenario"]} if "scenario" in d else {})
    except KeyError as exc:
        raise ValueError(f"plan file missing field {exc.args[0]!r}") from exc


def save_plan(plan: FleetPlan, path, meta: dict | None = None) -> Path:
    d = plan_to_dict(plan)
    if meta is not None:
        d = {"meta": meta, **d}
    path = Path(path)
    path.write_text(json.dumps(d, indent=1) + "\n")
    return path


def load_plan(path) -> FleetPlan:
    return plan_from_dict(json.loads(Path(path).read_text()))
