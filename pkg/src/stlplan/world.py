"""World model: speed zones, static and rose-curve obstacles, integration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

STANDARD = "Standard"
CROWDED = "CrowdedArea"
CORRIDOR = "Corridor"
DEFAULT_CAPS = {STANDARD: 1.5, CROWDED: 1.05, CORRIDOR: 3.0}


@dataclass(frozen=True)
class Zone:
    """Axis-aligned rectangle ``(xmin, ymin, xmax, ymax)`` or circle
    ``(cx, cy, radius)`` carrying a speed mode."""
    mode: str
    rect: Optional[Tuple[float, float, float, float]] = None
    circle: Optional[Tuple[float, float, float]] = None
    v_max: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if self.mode not in DEFAULT_CAPS:
            raise ValueError(f"unknown zone mode {self.mode!r}")
        if (self.rect is None) == (self.circle is None):
            raise ValueError("zone needs exactly one of rect or circle")
        if self.v_max is not None and not self.v_max > 0:
            raise ValueError("zone v_max must be positive")
        if self.rect is not None:
            x0, y0, x1, y1 = self.rect
            if not (x0 < x1 and y0 < y1):
                raise ValueError(f"degenerate rectangle {self.rect}")
        if self.circle is not None and not self.circle[2] > 0:
            raise ValueError("circle radius must be positive")

    def contains(self, p) -> bool:
        if self.rect is not None:
            x0, y0, x1, y1 = self.rect
            return x0 <= p[0] <= x1 and y0 <= p[1] <= y1
        cx, cy, r = self.circle
        return (p[0] - cx) ** 2 + (p[1] - cy) ** 2 <= r * r


@dataclass(frozen=True)
class Static:
    center: Tuple[float, float]


@dataclass(frozen=True)
class Rhodonea:
    """p(t) = c + A cos(k w t + phase) (cos(w t + phase), sin(w t + phase))"""
    center: Tuple[float, float]
    amplitude: float
    petals: float
    rate: float
    phase: float = 0.0


@dataclass(frozen=True)
class Obstacle:
    id: str
    radius: float
    motion: object
    safe_distance: Optional[float] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        if self.safe_distance is not None and not self.safe_distance > self.radius:
            raise ValueError("safe distance must exceed the obstacle radius")

    @property
    def d_safe(self) -> float:
        return self.safe_distance if self.safe_distance is not None else self.radius + 0.25


def obstacle_state(o: Obstacle, t: float):
    """Analytic (position, velocity) at time t."""
    m = o.motion
    c = np.asarray(m.center, dtype=float)
    if isinstance(m, Static):
        return c, np.zeros(2)
    A, k, w, ph = m.amplitude, m.petals, m.rate, m.phase
    s = w * t + ph
    q = k * w * t + ph
    rad = A * math.cos(q)
    drad = -A * k * w * math.sin(q)
    pos = c + rad * np.array([math.cos(s), math.sin(s)])
    vel = drad * np.array([math.cos(s), math.sin(s)]) + rad * w * np.array([-math.sin(s), math.cos(s)])
    return pos, vel


@dataclass
class World:
    zones: List[Zone] = field(default_factory=list)
    obstacles: List[Obstacle] = field(default_factory=list)
    caps: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_CAPS))
    proximity: float = 1.5

    def __post_init__(self):
        self._by_id = {o.id: o for o in self.obstacles}
        if len(self._by_id) != len(self.obstacles):
            raise ValueError("duplicate obstacle ids")
        self._memo = {}

    def obstacle(self, obstacle_id: str) -> Obstacle:
        try:
            return self._by_id[obstacle_id]
        except KeyError:
            raise KeyError(f"unknown obstacle {obstacle_id!r}") from None

    def obstacle_state(self, obstacle_id: str, t: float):
        key = (obstacle_id, t)
        hit = self._memo.get(key)
        if hit is None:
            if len(self._memo) > 256:
                self._memo.clear()
            hit = self._memo[key] = obstacle_state(self.obstacle(obstacle_id), t)
        return hit

    def vmax_at(self, position, t: float = 0.0):
        """(v_max, mode) at a planar position.

        Crowded applies inside crowded zones or within ``proximity`` of any
        obstacle surface; corridor inside corridor zones; standard otherwise.
        """
        p = position
        crowded = [z for z in self.zones if z.mode == CROWDED and z.contains(p)]
        if crowded:
            return min(self._cap(z) for z in crowded), CROWDED
        for o in self.obstacles:
            c, _ = self.obstacle_state(o.id, t)
            if math.hypot(p[0] - c[0], p[1] - c[1]) - o.radius <= self.proximity:
                return self.caps[CROWDED], CROWDED
        for mode in (CORRIDOR, STANDARD):
            inside = [z for z in self.zones if z.mode == mode and z.contains(p)]
            if inside:
                return min(self._cap(z) for z in inside), mode
        return self.caps[STANDARD], STANDARD

    def _cap(self, z: Zone) -> float:
        return z.v_max if z.v_max is not None else self.caps[z.mode]


def vmax_at(position, world: World, t: float = 0.0):
    """Function form of :meth:`World.vmax_at`."""
    if not all(math.isfinite(c) for c in position[:2]):
        raise ValueError("position must be finite")
    return world.vmax_at(position, t)


def wrap_angle(th: float) -> float:
    """Map to (-pi, pi]."""
    return -((-th + math.pi) % (2 * math.pi) - math.pi)


def integrate_step(x, u, dyn, dt: float) -> np.ndarray:
    """Forward Euler step of x' = f(x) + g(x) u."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    xn = x + dt * (dyn.f(x) + dyn.g(x) @ np.asarray(u, dtype=float))
    if xn.size >= 3:
        xn[2] = wrap_angle(xn[2])
    return xn
