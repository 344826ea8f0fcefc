"""Point-to-point transit under current: ground speed, path time and a DE path planner."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from fleetroute.ocean_field import CurrentField, field_velocities


@dataclass(frozen=True)
class Path:
    waypoints: np.ndarray  # (n, 2)
    source: int | None = None
    target: int | None = None

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))


@dataclass
class PathPlannerParams:
    control_point_count: int = 5  # Bezier control points, endpoints included
    n: int = 50  # waypoints along the curve
    max_turn_angle: float = math.pi / 4
    population: int = 20
    iterations: int = 40
    differential_weight: float = 0.6
    crossover_rate: float = 0.9
    clearance: float = 1.0
    w_collision: float = 100.0  # seconds per metre of penetration
    w_turn: float = 1000.0  # seconds per radian over the limit
    w_current: float = 1e4  # seconds per untraversable segment

    def __post_init__(self):
        if not self.n >= self.control_point_count >= 2:
            raise ValueError("need n >= control_point_count >= 2")
        if not 0 < self.max_turn_angle <= math.pi:
            raise ValueError("max_turn_angle must lie in (0, pi]")


class PathPlanningError(RuntimeError):
    """No collision-free, traversable path found within the optimizer budget."""

    def __init__(self, best: Path, penalties: dict):
        super().__init__(f"no feasible path; best candidate penalties {penalties}")
        self.best = best
        self.penalties = penalties


def ground_speed(tangent, current, prop_speed: float) -> float | None:
    """Along-track speed when holding heading ``tangent``; None if the track cannot be held."""
    tx, ty = float(tangent[0]), float(tangent[1])
    cx, cy = float(current[0]), float(current[1])
    along = cx * tx + cy * ty
    cross2 = (cx - along * tx) ** 2 + (cy - along * ty) ** 2
    rad = prop_speed * prop_speed - cross2
    if rad < 0:
        return None
    v = along + math.sqrt(rad)
    return v if v > 0 else None


def _ground_speeds(tangents: np.ndarray, currents: np.ndarray, prop_speed: float) -> np.ndarray:
    """Vectorised ground_speed; nan where infeasible."""
    along = np.sum(currents * tangents, axis=-1)
    perp = currents - along[..., None] * tangents
    rad = prop_speed * prop_speed - np.sum(perp * perp, axis=-1)
    v = along + np.sqrt(np.where(rad >= 0, rad, 0.0))
    return np.where((rad >= 0) & (v > 0), v, np.nan)


def _segment_times(points: np.ndarray, fld: CurrentField, prop_speed: float):
    """Per-segment (length, time) for waypoint arrays of shape (..., n, 2); time is nan if untraversable."""
    seg = np.diff(points, axis=-2)
    length = np.linalg.norm(seg, axis=-1)
    safe = np.where(length > 0, length, 1.0)
    tangents = seg / safe[..., None]
    mids = 0.5 * (points[..., 1:, :] + points[..., :-1, :])
    v = _ground_speeds(tangents, field_velocities(mids, fld), prop_speed)
    t = np.where(length > 0, length / v, 0.0)
    return length, t


def path_time(path, fld: CurrentField, prop_speed: float = 1.0) -> float:
    """Traversal time with the current sampled at segment midpoints; inf if any segment is untraversable."""
    pts = np.asarray(path.waypoints if isinstance(path, Path) else path, dtype=float)
    if pts.shape[0] < 2:
        raise ValueError("path needs at least two waypoints")
    _, t = _segment_times(pts, fld, prop_speed)
    if np.any(np.isnan(t)):
        return math.inf
    return float(np.sum(t))


def straight_path(a, b, n: int = 50) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)[:, None]
    return (1.0 - s) * np.asarray(a, dtype=float) + s * np.asarray(b, dtype=float)


def _segment_obstacle_distance(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Distance from every obstacle center to every segment: (..., n-1, n_obs)."""
    p = points[..., :-1, None, :]
    q = points[..., 1:, None, :]
    d = q - p
    dd = np.sum(d * d, axis=-1)
    w = centers - p
    s = np.clip(np.sum(w * d, axis=-1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    closest = p + s[..., None] * d
    return np.linalg.norm(centers - closest, axis=-1)


def collision_penetration(points: np.ndarray, obstacles, clearance: float = 0.0) -> np.ndarray:
    """Summed depth (m) by which segments intrude into obstacle disks, per path."""
    if not obstacles:
        return np.zeros(points.shape[:-2])
    centers = np.array([(o.x, o.y) for o in obstacles], dtype=float)
    radii = np.array([o.r for o in obstacles], dtype=float) + clearance
    dist = _segment_obstacle_distance(points, centers)
    return np.sum(np.maximum(radii - dist, 0.0), axis=(-2, -1))


def turn_excess(points: np.ndarray, max_turn: float) -> np.ndarray:
    seg = np.diff(points, axis=-2)
    a = seg[..., :-1, :]
    b = seg[..., 1:, :]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = np.sum(a * b, axis=-1)
    ang = np.abs(np.arctan2(cross, dot))
    return np.sum(np.maximum(ang - max_turn, 0.0), axis=-1)


def _bernstein(n: int, k: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    i = np.arange(k)[None, :]
    return comb(k - 1, i) * t**i * (1.0 - t) ** (k - 1 - i)


class _Evaluator:
    def __init__(self, a, b, fld, obstacles, params: PathPlannerParams, prop_speed: float):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.fld = fld
        self.obstacles = tuple(obstacles)
        self.p = params
        self.prop = prop_speed
        k = params.control_point_count
        self.basis = _bernstein(params.n, k)
        chord = self.b - self.a
        self.L = float(np.linalg.norm(chord))
        self.u = chord / self.L
        self.v = np.array([-self.u[1], self.u[0]])
        frac = np.linspace(0.0, 1.0, k)[1:-1]
        self.base = self.a + frac[:, None] * chord  # evenly spaced interior points: straight line

    def curves(self, genes: np.ndarray) -> np.ndarray:
        """genes (P, 2*(k-2)) of along/lateral offsets in metres -> waypoints (P, n, 2)."""
        P = genes.shape[0]
        off = genes.reshape(P, -1, 2)
        inner = self.base + off[..., 0:1] * self.u + off[..., 1:2] * self.v
        ctrl = np.concatenate(
            [np.broadcast_to(self.a, (P, 1, 2)), inner, np.broadcast_to(self.b, (P, 1, 2))], axis=1
        )
        return np.einsum("nk,pkd->pnd", self.basis, ctrl)

    def score(self, pts: np.ndarray):
        length, t = _segment_times(pts, self.fld, self.prop)
        bad = np.isnan(t)
        # untraversable segments are charged at a crawl plus a flat penalty
        t = np.where(bad, length / (0.1 * self.prop), t)
        travel = np.sum(t, axis=-1)
        collision = collision_penetration(pts, self.obstacles, self.p.clearance)
        turn = turn_excess(pts, self.p.max_turn_angle)
        current = np.sum(bad, axis=-1).astype(float)
        penalty = self.p.w_collision * collision + self.p.w_turn * turn + self.p.w_current * current
        return travel + penalty, penalty, {"collision": collision, "turn": turn, "current": current}


def plan_path(a, b, fld: CurrentField, obstacles=(), params: PathPlannerParams | None = None,
              seed: int = 0, prop_speed: float = 1.0, source=None, target=None) -> Path:
    """Time-optimal, collision-free waypoint path from ``a`` to ``b`` by differential evolution.

    Raises PathPlanningError carrying the best (infeasible) candidate if nothing feasible turns up.
    """
    params = params or PathPlannerParams()
    ev = _Evaluator(a, b, fld, obstacles, params, prop_speed)
    if ev.L == 0:
        raise ValueError("source and target coincide")
    dims = 2 * (params.control_point_count - 2)
    straight = straight_path(a, b, params.n)
    if dims == 0:
        cost, pen, parts = ev.score(straight[None])
        if pen[0] > 0:
            raise PathPlanningError(Path(straight, source, target), {k: float(v[0]) for k, v in parts.items()})
        return Path(straight, source, target)

    rng = np.random.default_rng(seed)
    r_max = max((o.r for o in obstacles), default=0.0)
    lat = max(0.6 * ev.L, 3.0 * r_max)
    hi = np.tile([0.3 * ev.L, lat], dims // 2)
    lo = -hi
    pop = rng.uniform(lo, hi, size=(params.population, dims))
    pop[0] = 0.0  # the straight line
    cost, pen, _ = ev.score(ev.curves(pop))

    best_feasible = None
    best_feasible_cost = math.inf

    def track(genes, cost, pen):
        nonlocal best_feasible, best_feasible_cost
        ok = (pen == 0) & np.isfinite(cost)
        if np.any(ok):
            idx = np.flatnonzero(ok)
            j = idx[np.argmin(cost[idx])]
            if cost[j] < best_feasible_cost:
                best_feasible_cost = float(cost[j])
                best_feasible = genes[j].copy()

    track(pop, cost, pen)
    P = params.population
    for _ in range(params.iterations):
        idx = np.array([rng.choice(np.delete(np.arange(P), i), 3, replace=False) for i in range(P)])
        mutant = pop[idx[:, 0]] + params.differential_weight * (pop[idx[:, 1]] - pop[idx[:, 2]])
        mutant = np.clip(mutant, lo, hi)
        cross = rng.random((P, dims)) < params.crossover_rate
        cross[np.arange(P), rng.integers(0, dims, P)] = True
        trial = np.where(cross, mutant, pop)
        t_cost, t_pen, _ = ev.score(ev.curves(trial))
        better = t_cost <= cost
        pop[better] = trial[better]
        cost[better] = t_cost[better]
        pen[better] = t_pen[better]
        track(trial, t_cost, t_pen)

    if best_feasible is not None:
        return Path(ev.curves(best_feasible[None])[0], source, target)
    j = int(np.argmin(cost))
    pts = ev.curves(pop[j : j + 1])
    _, _, parts = ev.score(pts)
    raise PathPlanningError(Path(pts[0], source, target), {k: float(v[0]) for k, v in parts.items()})
