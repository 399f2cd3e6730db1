"""STL fragment AST and predicate functions.

Formulas are immutable value objects. The fragment is split in two classes:
temporal-operator-free formulas (predicates, negated predicates, ``true`` and
conjunctions of those) and temporal formulas (F/G/U over the former, plus
conjunctions of temporal formulas).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Tuple, Union

import numpy as np


class FragmentError(ValueError):
    """Formula lies outside the supported STL fragment."""


class DegenerateGradientWarning(RuntimeWarning):
    """Gradient requested at the singular center of a ball predicate."""


class World(Protocol):
    def obstacle_state(self, obstacle_id: str, t: float) -> Tuple[np.ndarray, np.ndarray]:
        ...


# -- predicates ---------------------------------------------------------------

@dataclass(frozen=True)
class BallReach:
    """h(x) = epsilon - ||x_pos - center||"""
    center: Tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        if not self.epsilon > 0:
            raise ValueError(f"ball tolerance must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class Clearance:
    """h(x, t) = ||x_pos - p_obs(t)||^2 - safe_distance^2"""
    obstacle: str
    safe_distance: float

    def __post_init__(self):
        object.__setattr__(self, "safe_distance", float(self.safe_distance))
        if not self.safe_distance > 0:
            raise ValueError(f"safe distance must be positive, got {self.safe_distance}")


@dataclass(frozen=True)
class Halfspace:
    """h(x) = offset - normal . x_pos"""
    normal: Tuple[float, ...]
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(c) for c in self.normal))
        object.__setattr__(self, "offset", float(self.offset))
        norm = math.sqrt(sum(c * c for c in self.normal))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"halfspace normal must have unit norm, got {norm!r}")


Predicate = Union[BallReach, Clearance, Halfspace]


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise FragmentError(f"unbounded interval [{self.a}, {self.b}]")
        if not 0 <= self.a <= self.b:
            raise ValueError(f"interval requires 0 <= a <= b, got [{self.a}, {self.b}]")


# -- formula nodes ------------------------------------------------------------

@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Pred:
    predicate: Predicate


@dataclass(frozen=True)
class Not:
    arg: Pred

    def __post_init__(self):
        if not isinstance(self.arg, Pred):
            raise FragmentError(
                f"negation applies only to predicates, found {type(self.arg).__name__}")


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    arg: "Formula"

    def __post_init__(self):
        _require_state_formula(self.arg, "G")


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    arg: "Formula"

    def __post_init__(self):
        _require_state_formula(self.arg, "F")


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _require_state_formula(self.left, "U")
        _require_state_formula(self.right, "U")


Formula = Union[TrueF, Pred, Not, And, Always, Eventually, Until]
TEMPORAL = (Always, Eventually, Until)


def is_state_formula(f: Formula) -> bool:
    """True for temporal-operator-free formulas (true, mu, !mu, conjunctions)."""
    if isinstance(f, (TrueF, Pred, Not)):
        return True
    if isinstance(f, And):
        return is_state_formula(f.left) and is_state_formula(f.right)
    return False


def _require_state_formula(f: Formula, op: str) -> None:
    if not is_state_formula(f):
        raise FragmentError(
            f"operand of {op} must be temporal-operator-free, found nested "
            f"{_first_temporal(f)}")


def _first_temporal(f: Formula) -> str:
    if isinstance(f, TEMPORAL):
        return type(f).__name__
    if isinstance(f, And):
        for side in (f.left, f.right):
            if not is_state_formula(side):
                return _first_temporal(side)
    return type(f).__name__


def conjuncts(f: Formula) -> list:
    """Flatten nested conjunctions, left to right."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    return [f]


def literals(f: Formula) -> list:
    """(predicate, negated) pairs of a state formula; ``true`` contributes nothing."""
    out = []
    for c in conjuncts(f):
        if isinstance(c, Pred):
            out.append((c.predicate, False))
        elif isinstance(c, Not):
            out.append((c.arg.predicate, True))
        elif not isinstance(c, TrueF):
            raise FragmentError(f"expected a state formula, found {type(c).__name__}")
    return out


def horizon(f: Formula) -> float:
    if isinstance(f, (Always, Eventually, Until)):
        return f.interval.b
    if isinstance(f, And):
        return max(horizon(f.left), horizon(f.right))
    return 0.0


# -- predicate evaluation -----------------------------------------------------

def _position(state) -> np.ndarray:
    return np.asarray(state, dtype=float)


def eval_predicate(p: Predicate, state, t: float = 0.0, world: World | None = None) -> float:
    x = _position(state)
    if isinstance(p, BallReach):
        c = np.asarray(p.center)
        return p.epsilon - float(np.linalg.norm(x[:c.size] - c))
    if isinstance(p, Halfspace):
        n = np.asarray(p.normal)
        return p.offset - float(n @ x[:n.size])
    if isinstance(p, Clearance):
        pos, _ = _obstacle(world, p.obstacle, t)
        d = x[:pos.size] - pos
        return float(d @ d) - p.safe_distance ** 2
    raise TypeError(f"unknown predicate {p!r}")


def predicate_gradient(p: Predicate, state, t: float = 0.0, world: World | None = None) -> np.ndarray:
    """Gradient of h with respect to the full state vector.

    At the exact center of a ball the gradient is undefined; the zero vector
    is returned and a DegenerateGradientWarning is emitted.
    """
    x = _position(state)
    g = np.zeros_like(x)
    if isinstance(p, BallReach):
        c = np.asarray(p.center)
        d = x[:c.size] - c
        n = float(np.linalg.norm(d))
        if n == 0.0:
            import warnings
            warnings.warn("ball predicate gradient at its center", DegenerateGradientWarning)
            return g
        g[:c.size] = -d / n
    elif isinstance(p, Halfspace):
        n = np.asarray(p.normal)
        g[:n.size] = -n
    elif isinstance(p, Clearance):
        pos, _ = _obstacle(world, p.obstacle, t)
        g[:pos.size] = 2.0 * (x[:pos.size] - pos)
    else:
        raise TypeError(f"unknown predicate {p!r}")
    return g


def predicate_time_derivative(p: Predicate, state, t: float = 0.0, world: World | None = None) -> float:
    """Partial derivative of h in t; nonzero only for clearance to a moving obstacle."""
    if not isinstance(p, Clearance):
        return 0.0
    x = _position(state)
    pos, vel = _obstacle(world, p.obstacle, t)
    return float(-2.0 * (x[:pos.size] - pos) @ vel)


def _obstacle(world, obstacle_id, t):
    if world is None:
        raise KeyError(f"unknown obstacle {obstacle_id!r}: no world given")
    pos, vel = world.obstacle_state(obstacle_id, t)
    return np.asarray(pos, dtype=float), np.asarray(vel, dtype=float)
