"""Steady 2-D current field built from superposed Lamb vortexes."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# below this radius the profile is replaced by its limit (0, 0)
CORE_EPS = 1e-9


@dataclass(frozen=True)
class LambVortex:
    x: float
    y: float
    gamma: float  # circulation strength, m^2/s
    delta: float  # core radius, m

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class CurrentField:
    vortexes: tuple[LambVortex, ...] = ()
    background: tuple[float, float] = (0.0, 0.0)  # uniform drift added everywhere, m/s

    def __post_init__(self):
        object.__setattr__(self, "vortexes", tuple(self.vortexes))
        object.__setattr__(self, "background", (float(self.background[0]), float(self.background[1])))

    def velocity(self, pos) -> np.ndarray:
        return field_velocity(pos, self)

    def velocities(self, points) -> np.ndarray:
        """Velocity at an array of points, shape (..., 2)."""
        return field_velocities(np.asarray(points, dtype=float), self)

    def as_arrays(self):
        if not self.vortexes:
            z = np.zeros(0)
            return z, z, z, z
        a = np.array([(v.x, v.y, v.gamma, v.delta) for v in self.vortexes], dtype=float)
        return a[:, 0], a[:, 1], a[:, 2], a[:, 3]


def vortex_velocity(pos, vortex: LambVortex) -> np.ndarray:
    dx = float(pos[0]) - vortex.x
    dy = float(pos[1]) - vortex.y
    d2 = dx * dx + dy * dy
    if d2 < CORE_EPS * CORE_EPS:
        return np.zeros(2)
    # -expm1 keeps precision when d << delta
    k = vortex.gamma / (2.0 * math.pi * d2) * -math.expm1(-d2 / (vortex.delta * vortex.delta))
    return np.array([-k * dy, k * dx])


def field_velocity(pos, field: CurrentField) -> np.ndarray:
    out = np.array(field.background, dtype=float)
    for v in field.vortexes:
        out += vortex_velocity(pos, v)
    return out


def field_velocities(points: np.ndarray, field: CurrentField) -> np.ndarray:
    """Vectorised ``field_velocity`` over points of shape (..., 2)."""
    pts = np.asarray(points, dtype=float)
    out = np.zeros(pts.shape[:-1] + (2,))
    out[...] = field.background
    if not field.vortexes:
        return out
    x0, y0, gamma, delta = field.as_arrays()
    dx = pts[..., 0, None] - x0
    dy = pts[..., 1, None] - y0
    d2 = dx * dx + dy * dy
    core = d2 < CORE_EPS * CORE_EPS
    safe = np.where(core, 1.0, d2)
    k = gamma / (2.0 * np.pi * safe) * -np.expm1(-safe / (delta * delta))
    k = np.where(core, 0.0, k)
    out[..., 0] += np.sum(-k * dy, axis=-1)
    out[..., 1] += np.sum(k * dx, axis=-1)
    return out


@dataclass(frozen=True)
class Perturbation:
    """Relative noise scales for the true field (strength, radius) and center jitter in m."""

    gamma: float = 0.2
    delta: float = 0.1
    center: float = 200.0

    def __post_init__(self):
        if min(self.gamma, self.delta, self.center) < 0:
            raise ValueError("perturbation scales must be >= 0")


def realize_true_field(field: CurrentField, perturbation: Perturbation, seed: int) -> CurrentField:
    """Copy of ``field`` with every vortex parameter jittered; the planner only sees ``field``."""
    rng = np.random.default_rng(seed)
    out = []
    for v in field.vortexes:
        eg, ed = rng.normal(0.0, 1.0, size=2)
        cx, cy = rng.normal(0.0, 1.0, size=2)
        gamma = v.gamma * (1.0 + perturbation.gamma * eg) if perturbation.gamma else v.gamma
        delta = v.delta
        if perturbation.delta:
            # radius must stay positive
            delta = max(v.delta * (1.0 + perturbation.delta * ed), 0.05 * v.delta)
        x, y = v.x, v.y
        if perturbation.center:
            x += perturbation.center * cx
            y += perturbation.center * cy
        out.append(replace(v, x=x, y=y, gamma=gamma, delta=delta))
    return CurrentField(tuple(out), field.background)
