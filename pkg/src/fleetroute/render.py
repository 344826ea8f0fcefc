"""SVG renderings of a scenario, a fleet plan and a mission log."""
from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from fleetroute.plan import FleetPlan
from fleetroute.scenario import Scenario, scenario_digest

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")
QUIVER_GRID = 25


class RenderError(ValueError):
    pass


def _check(scenario: Scenario, plan: FleetPlan | None, log) -> str:
    ref = scenario_digest(scenario)
    n = len(scenario.nodes)
    if plan is not None:
        if plan.notes.get("scenario") not in (None, ref):
            raise RenderError(f"plan scenario {plan.notes['scenario']} does not match scenario {ref}")
        bad = [i for i in (*plan.assigned(), *plan.idle_nodes) if not 0 <= i < n]
        if bad:
            raise RenderError(f"plan refers to node ids {bad} absent from the scenario")
    if log is not None:
        if log.scenario != ref:
            raise RenderError(f"log scenario {log.scenario} does not match scenario {ref}")
        bad = sorted({e.node for e in log.events if e.node is not None and not 0 <= e.node < n})
        if bad:
            raise RenderError(f"log refers to node ids {bad} absent from the scenario")
    return ref


def render_svg(scenario: Scenario, plan: FleetPlan | None = None, log=None, size: int = 800,
               comment: str | None = None) -> str:
    """Region, obstacles, current quiver, nodes sized by rho, routes, discards (x) and pickups (green)."""
    _check(scenario, plan, log)
    xmin, ymin, xmax, ymax = scenario.region
    w, h = xmax - xmin, ymax - ymin
    scale = size / max(w, h)

    def px(p):
        return (p[0] - xmin) * scale, (ymax - p[1]) * scale  # y axis up

    ET.register_namespace("", SVG_NS)
    root = ET.Element("svg", xmlns=SVG_NS, width=str(int(w * scale)), height=str(int(h * scale)))
    if comment:
        root.append(ET.Comment(" " + comment.replace("--", "- -") + " "))
    ET.SubElement(root, "rect", x="0", y="0", width=f"{w * scale:.1f}", height=f"{h * scale:.1f}",
                  fill="#f4f8fb", stroke="#333", attrib={"class": "region"})

    # current quiver on a regular lattice
    g = ET.SubElement(root, "g", attrib={"class": "quiver"}, stroke="#6a9fc0")
    xs = np.linspace(xmin, xmax, QUIVER_GRID + 2)[1:-1]
    ys = np.linspace(ymin, ymax, QUIVER_GRID + 2)[1:-1]
    grid = np.stack(np.meshgrid(xs, ys), axis=-1).reshape(-1, 2)
    vel = scenario.field.velocities(grid)
    vmax = float(np.max(np.linalg.norm(vel, axis=1))) if len(vel) else 0.0
    arrow = 0.8 * (xs[1] - xs[0] if len(xs) > 1 else w) / vmax if vmax > 0 else 0.0
    for p, v in zip(grid, vel):
        (x1, y1), (x2, y2) = px(p), px(p + arrow * v)
        ET.SubElement(g, "line", x1=f"{x1:.1f}", y1=f"{y1:.1f}", x2=f"{x2:.1f}", y2=f"{y2:.1f}")

    for ob in scenario.obstacles:
        cx, cy = px((ob.x, ob.y))
        ET.SubElement(root, "circle", cx=f"{cx:.1f}", cy=f"{cy:.1f}", r=f"{ob.r * scale:.1f}", fill="#888",
                      attrib={"class": "obstacle"})

    pos = {n.id: n.position for n in scenario.nodes}
    seq = lambda ids: [scenario.start, *(pos[i] for i in ids), scenario.end]  # noqa: E731

    if plan is not None:
        for r in plan.routes:
            pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in map(px, seq(r.nodes)))
            ET.SubElement(root, "polyline", points=pts, fill="none", stroke=PALETTE[r.vehicle % len(PALETTE)],
                          attrib={"class": "route", "data-vehicle": str(r.vehicle),
                                  "stroke-dasharray": "6,4" if log is not None else "none"})

    discarded, picked = set(), set()
    if log is not None:
        tracks: dict[int, list] = {}
        for e in log.events:
            if e.kind == "collect":
                tracks.setdefault(e.vehicle, []).append(e.node)
            elif e.kind == "discard":
                discarded.add(e.node)
            elif e.kind == "award":
                picked.add(e.node)
        for vid in sorted(tracks):
            pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in map(px, seq(tracks[vid])))
            ET.SubElement(root, "polyline", points=pts, fill="none", stroke=PALETTE[vid % len(PALETTE)],
                          attrib={"class": "track", "data-vehicle": str(vid), "stroke-width": "2"})

    rho_max = max((n.rho for n in scenario.nodes), default=1.0)
    for n in scenario.nodes:
        cx, cy = px(n.position)
        ET.SubElement(root, "circle", cx=f"{cx:.1f}", cy=f"{cy:.1f}", r=f"{3 + 5 * n.rho / rho_max:.1f}",
                      fill="#222", attrib={"class": "node", "data-id": str(n.id)})
    for i in sorted(picked):
        cx, cy = px(pos[i])
        ET.SubElement(root, "circle", cx=f"{cx:.1f}", cy=f"{cy:.1f}", r="11", fill="none", stroke="#2ca02c",
                      attrib={"class": "pickup", "data-id": str(i), "stroke-width": "3"})
    for i in sorted(discarded):
        cx, cy = px(pos[i])
        m = ET.SubElement(root, "text", x=f"{cx:.1f}", y=f"{cy + 6:.1f}", fill="#d62728",
                          attrib={"class": "discard", "data-id": str(i), "text-anchor": "middle",
                                  "font-size": "20"})
        m.text = "×"

    for label, p, shape in (("start", scenario.start, "#2ca02c"), ("end", scenario.end, "#d62728")):
        cx, cy = px(p)
        ET.SubElement(root, "rect", x=f"{cx - 6:.1f}", y=f"{cy - 6:.1f}", width="12", height="12", fill=shape,
                      attrib={"class": label})
    return ET.tostring(root, encoding="unicode")
