"""Deadline re-timing for Eventually tasks under changing speed caps.

The nominal average speed of a task is the straight-line distance to its goal
over the remaining time. Whenever the cap changes, a task starts, or the QP
turns infeasible, a new deadline

    t_new = ds / ((P_i - P_r * P_c) * v_max)

is computed and the task barrier is rebuilt around it. P_c counts QP
failures since the last cap change or task start.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

VMAX_CHANGE = "VmaxChange"
QP_INFEASIBLE = "QpInfeasible"
TASK_START = "TaskStart"


class ReplanningExhausted(RuntimeError):
    """Effective speed weight fell to the floor; the task cannot be re-timed."""


@dataclass
class ReplanParams:
    P_i: float = 0.9
    P_r: float = 0.025
    P_c: int = 0
    floor: float = 0.1

    def __post_init__(self):
        errors = validate_params(self.P_i, self.P_r, self.floor)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def weight(self) -> float:
        return self.P_i - self.P_r * self.P_c


def validate_params(P_i, P_r, floor) -> list:
    errors = []
    if not 0.5 <= P_i < 1:
        errors.append(f"P_i = {P_i} outside [0.5, 1)")
    if not 0 < P_r < 0.2:
        errors.append(f"P_r = {P_r} outside (0, 0.2)")
    if not 0 < floor < P_i:
        errors.append(f"floor = {floor} outside (0, P_i)")
    return errors


@dataclass(frozen=True)
class ReplanEvent:
    time: float
    trigger: str
    old_tstar: float
    new_tstar: float
    delta_s: float
    v_max: float
    weight: float


def average_velocity(x, goal, t_star_remaining: float) -> float:
    if not t_star_remaining > 0:
        raise ValueError(f"remaining time must be positive, got {t_star_remaining}")
    goal = np.asarray(goal, dtype=float)
    d = np.asarray(x, dtype=float)[:goal.size] - goal
    return float(np.linalg.norm(d)) / t_star_remaining


def compute_tstar_new(delta_s: float, v_max: float, p: ReplanParams) -> float:
    if delta_s < 0:
        raise ValueError("delta_s must be non-negative")
    if not v_max > 0:
        raise ValueError("v_max must be positive")
    w = p.weight
    if w <= p.floor:
        raise ReplanningExhausted(
            f"speed weight {w:.4g} reached the floor {p.floor:.4g} after {p.P_c} failures")
    return delta_s / (w * v_max)


def step1_unsatisfiable(delta_s_tot: float, t_star: float, v_max: float) -> bool:
    """Naive plan check: the average speed needed exceeds the cap."""
    return v_max < delta_s_tot / t_star


class Replanner:
    """Owns the failure counter and emits ReplanEvents.

    ``task`` below is any object with ``goal`` (position) and ``t_star``.
    """

    def __init__(self, params: ReplanParams | None = None):
        self.params = params or ReplanParams()

    def _event(self, t, trigger, x, goal, old_tstar, v_max) -> ReplanEvent:
        ds = float(np.linalg.norm(np.asarray(x, dtype=float)[:len(goal)] - np.asarray(goal)))
        t_new = compute_tstar_new(ds, v_max, self.params)
        ev = ReplanEvent(t, trigger, old_tstar, t_new, ds, v_max, self.params.weight)
        log.debug("replan %s at t=%.2f: ds=%.3f vmax=%.2f -> t*_new=%.3f",
                  trigger, t, ds, v_max, t_new)
        return ev

    def on_task_start(self, t, x, goal, old_tstar, v_max) -> ReplanEvent:
        self.params.P_c = 0
        return self._event(t, TASK_START, x, goal, old_tstar, v_max)

    def on_vmax_change(self, t, x, goal, old_tstar, new_vmax) -> ReplanEvent:
        self.params.P_c = 0
        return self._event(t, VMAX_CHANGE, x, goal, old_tstar, new_vmax)

    def on_infeasible(self, t, x, goal, old_tstar, v_max) -> ReplanEvent:
        self.params.P_c += 1
        return self._event(t, QP_INFEASIBLE, x, goal, old_tstar, v_max)
