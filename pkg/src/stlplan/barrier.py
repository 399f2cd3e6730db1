"""Time-varying control barrier functions for STL tasks.

Each task literal mu becomes ``b(x, t) = -gamma(t) + h(x)`` where gamma ramps
linearly from gamma0 at the barrier's origin time to gamma_inf at the deadline
t_star. Obstacles enter as always-on members ``b = h`` (gamma == 0). Members
are merged with a log-sum-exp smooth minimum of sharpness ``eta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .stl import (Always, BallReach, Clearance, Eventually, Formula, Halfspace,
                  Interval, Until, eval_predicate, literals, predicate_gradient,
                  predicate_time_derivative)

EVENTUALLY = "F"
ALWAYS = "G"
UNTIL_LEFT = "U-left"
UNTIL_RIGHT = "U-right"


class BarrierConstructionError(ValueError):
    pass


class InfeasibleRetime(BarrierConstructionError):
    pass


@dataclass(frozen=True)
class BarrierParams:
    eta: float = 10.0
    r: Optional[float] = None
    gamma0: Optional[float] = None
    gamma_inf: Optional[float] = None
    h_cap: float = 1e6

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.h_cap > 0:
            raise ValueError("h_cap must be positive")


@dataclass
class TaskBarrier:
    predicate: object
    operator: str
    interval: Interval
    t_star: float
    gamma0: float
    gamma_inf: float
    r: float
    t_origin: float
    negated: bool = False
    active: bool = True
    task: str = ""
    h_opt: float = math.inf

    def h(self, x, t=0.0, world=None) -> float:
        v = eval_predicate(self.predicate, x, t, world)
        return -v if self.negated else v


@dataclass
class SafetyBarrier:
    predicate: Clearance
    active: bool = field(default=True, init=False)

    def h(self, x, t=0.0, world=None) -> float:
        return eval_predicate(self.predicate, x, t, world)


@dataclass
class BarrierEval:
    value: float
    grad_x: np.ndarray
    d_dt: float


@dataclass
class CompositeBarrier:
    eta: float = 10.0
    tasks: List[TaskBarrier] = field(default_factory=list)
    safety: List[SafetyBarrier] = field(default_factory=list)

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def active_members(self) -> list:
        return [m for m in self.tasks if m.active] + list(self.safety)


# -- construction -------------------------------------------------------------

def select_tstar(operator: str, interval: Interval) -> float:
    if operator in (EVENTUALLY, UNTIL_RIGHT):
        return interval.b
    if operator in (ALWAYS, UNTIL_LEFT):
        return interval.a
    raise ValueError(f"unknown operator {operator!r}")


def compute_hopt(p, negated: bool = False, h_cap: float = 1e6) -> float:
    """Supremum of h over the state space, capped at ``h_cap`` when unbounded."""
    if isinstance(p, BallReach) and not negated:
        return p.epsilon
    if isinstance(p, Clearance) and negated:
        # -(d^2 - s^2) peaks at d = 0
        return min(p.safe_distance ** 2, h_cap)
    if isinstance(p, (BallReach, Clearance, Halfspace)):
        return h_cap
    raise TypeError(f"unknown predicate {p!r}")


def choose_robustness(h_opt: float, h0: float, time_to_deadline: float,
                      r: Optional[float] = None) -> float:
    """Robustness threshold r, checked against (0, h_opt) or (0, h(x0)).

    The second range applies when the deadline is now (``time_to_deadline``
    <= 0); it also requires the task to hold already, h(x0) > 0.
    """
    if time_to_deadline > 0:
        upper = h_opt
    else:
        if not h0 > 0:
            raise BarrierConstructionError(
                f"deadline reached with h(x0) = {h0:.6g} <= 0: task unsatisfiable from x0")
        upper = min(h_opt, h0)
    if r is not None:
        if not 0 < r < upper:
            raise BarrierConstructionError(f"r = {r} outside (0, {upper:.6g})")
        return float(r)
    r = min(0.25 * h_opt, 0.05)
    if r >= upper:
        r = 0.5 * upper
    return r


def init_gammas(h0: float, r: float, h_opt: float, gamma0: Optional[float] = None,
                gamma_inf: Optional[float] = None, deadline_now: bool = False):
    """Default or validated (gamma0, gamma_inf).

    gamma0 < h(x0) and max(r, gamma0) < gamma_inf < h_opt. With the deadline
    already reached, gamma_inf is further kept below h(x0) so the barrier
    starts non-negative.
    """
    if not r < h_opt:
        raise BarrierConstructionError(f"r = {r} must be below h_opt = {h_opt}")
    if gamma0 is None:
        gamma0 = h0 - (0.1 * abs(h0) + 0.1)
    elif not gamma0 < h0:
        raise BarrierConstructionError(f"gamma0 = {gamma0} must be below h(x0) = {h0:.6g}")
    upper = min(h_opt, h0) if deadline_now else h_opt
    m = max(r, gamma0)
    if gamma_inf is None:
        gamma_inf = m + 0.9 * (upper - m)
    if not m < gamma_inf < upper:
        raise BarrierConstructionError(
            f"gamma_inf = {gamma_inf} outside ({m:.6g}, {upper:.6g})")
    if gamma_inf < gamma0:
        raise BarrierConstructionError("gamma must be non-decreasing")
    return float(gamma0), float(gamma_inf)


def make_task_barrier(predicate, operator: str, interval: Interval, x, t_origin: float,
                      world=None, params: BarrierParams = BarrierParams(), *,
                      negated: bool = False, task: str = "",
                      t_star: Optional[float] = None, fresh: bool = False) -> TaskBarrier:
    """Build one member starting at ``t_origin`` from state ``x``.

    ``fresh`` ignores configured gamma overrides (used when retiming).
    """
    if t_star is None:
        t_star = select_tstar(operator, interval)
    h_opt = compute_hopt(predicate, negated, params.h_cap)
    h0 = eval_predicate(predicate, x, t_origin, world)
    if negated:
        h0 = -h0
    T = t_star - t_origin
    r = choose_robustness(h_opt, h0, T, params.r)
    g0, ginf = init_gammas(h0, r, h_opt,
                           None if fresh else params.gamma0,
                           None if fresh else params.gamma_inf,
                           deadline_now=T <= 0)
    return TaskBarrier(predicate, operator, interval, float(t_star), g0, ginf, r,
                       float(t_origin), negated=negated, task=task, h_opt=h_opt)


def compile_task(f: Formula, x, t_origin: float, world=None,
                 params: BarrierParams = BarrierParams(), task: str = "") -> List[TaskBarrier]:
    """Members for one temporal formula F/G/U over a state formula.

    Conjunctions inside the operator yield one member per literal sharing the
    deadline; the task counts as satisfied only when all hold at once.
    Until compiles to Always-style members for the left operand and
    Eventually-style members for the right operand.
    """
    if isinstance(f, Eventually):
        parts = [(lit, EVENTUALLY) for lit in literals(f.arg)]
    elif isinstance(f, Always):
        parts = [(lit, ALWAYS) for lit in literals(f.arg)]
    elif isinstance(f, Until):
        parts = ([(lit, UNTIL_LEFT) for lit in literals(f.left)]
                 + [(lit, UNTIL_RIGHT) for lit in literals(f.right)])
    else:
        raise TypeError(f"not a temporal formula: {type(f).__name__}")
    return [make_task_barrier(p, op, f.interval, x, t_origin, world, params,
                              negated=neg, task=task)
            for (p, neg), op in parts]


# -- evaluation ---------------------------------------------------------------

def gamma(tb: TaskBarrier, t: float) -> float:
    T = tb.t_star - tb.t_origin
    tau = t - tb.t_origin
    if T <= 0 or tau >= T:
        return tb.gamma_inf
    return (tb.gamma_inf - tb.gamma0) / T * tau + tb.gamma0


def gamma_dot(tb: TaskBarrier, t: float) -> float:
    """Right derivative of gamma; 0 at and after the kink."""
    T = tb.t_star - tb.t_origin
    if T <= 0 or t - tb.t_origin >= T:
        return 0.0
    return (tb.gamma_inf - tb.gamma0) / T


def task_barrier_eval(tb: TaskBarrier, x, t: float, world=None) -> BarrierEval:
    sign = -1.0 if tb.negated else 1.0
    h = sign * eval_predicate(tb.predicate, x, t, world)
    grad = sign * predicate_gradient(tb.predicate, x, t, world)
    dh_dt = sign * predicate_time_derivative(tb.predicate, x, t, world)
    return BarrierEval(-gamma(tb, t) + h, grad, -gamma_dot(tb, t) + dh_dt)


def safety_barrier_eval(sb: SafetyBarrier, x, t: float, world=None) -> BarrierEval:
    p = sb.predicate
    if isinstance(p, Clearance) and world is not None:
        # one obstacle lookup instead of three
        pos, vel = world.obstacle_state(p.obstacle, t)
        x = np.asarray(x, dtype=float)
        d = x[:2] - pos
        grad = np.zeros_like(x)
        grad[:2] = 2.0 * d
        return BarrierEval(float(d @ d) - p.safe_distance ** 2, grad, float(-2.0 * d @ vel))
    return BarrierEval(eval_predicate(p, x, t, world),
                       predicate_gradient(p, x, t, world),
                       predicate_time_derivative(p, x, t, world))


def member_eval(m, x, t, world=None) -> BarrierEval:
    if isinstance(m, SafetyBarrier):
        return safety_barrier_eval(m, x, t, world)
    return task_barrier_eval(m, x, t, world)


def smooth_min(values: Sequence[float], eta: float):
    """-(1/eta) ln sum exp(-eta v) and its softmin weights, computed stably."""
    v = np.asarray(values, dtype=float)
    lo = v.min()
    e = np.exp(-eta * (v - lo))
    s = e.sum()
    return float(lo - math.log(s) / eta), e / s


def composite_eval(cb: CompositeBarrier, x, t: float, world=None) -> BarrierEval:
    members = cb.active_members()
    if not members:
        raise ValueError("composite barrier has no active members")
    evals = [member_eval(m, x, t, world) for m in members]
    if len(evals) == 1:
        return evals[0]
    value, w = smooth_min([e.value for e in evals], cb.eta)
    grad = np.sum([wi * e.grad_x for wi, e in zip(w, evals)], axis=0)
    d_dt = float(sum(wi * e.d_dt for wi, e in zip(w, evals)))
    return BarrierEval(value, grad, d_dt)


# -- switching and retiming -----------------------------------------------------

@dataclass(frozen=True)
class Deactivation:
    task: str
    time: float
    reason: str


def task_satisfied(members: Sequence[TaskBarrier], x, t: float, world=None) -> bool:
    """Eventually-style members all at or above their robustness threshold
    inside the task window."""
    goal = [m for m in members if m.operator in (EVENTUALLY, UNTIL_RIGHT)]
    if not goal:
        return False
    iv = goal[0].interval
    if not iv.a <= t <= iv.b:
        return False
    return all(m.h(x, t, world) >= m.r for m in goal)


def deactivate_satisfied(cb: CompositeBarrier, x, t: float, world=None) -> List[Deactivation]:
    """Switch off members whose operator is satisfied; safety members stay on.

    Members are grouped by task name. An Eventually/Until group switches off
    when all its goal literals reach their threshold r inside the window; an
    Always group switches off once t passes the window end.
    """
    events = []
    groups = {}
    for m in cb.tasks:
        if m.active:
            groups.setdefault(m.task, []).append(m)
    for name, members in groups.items():
        if task_satisfied(members, x, t, world):
            reason = "satisfied"
        elif all(m.operator == ALWAYS for m in members) and t > members[0].interval.b:
            reason = "window-closed"
        else:
            continue
        for m in members:
            m.active = False
        events.append(Deactivation(name, t, reason))
    return events


def retime_task(tb: TaskBarrier, t_now: float, t_star_new: float, x, world=None,
                params: BarrierParams = BarrierParams()) -> TaskBarrier:
    """Rebuild ``tb`` with its clock restarted at ``t_now``.

    The deadline becomes min(t_now + t_star_new, interval end); gamma0,
    gamma_inf and r are regenerated from h(x) at ``t_now``.
    """
    if not tb.active:
        raise ValueError("cannot retime an inactive barrier")
    if not t_star_new > 0:
        raise ValueError(f"t_star_new must be positive, got {t_star_new}")
    deadline = min(t_now + t_star_new, tb.interval.b)
    if deadline <= t_now:
        h = tb.h(x, t_now, world)
        r = params.r if params.r is not None else tb.r
        if h < r:
            raise InfeasibleRetime(
                f"task {tb.task!r}: window closed at {tb.interval.b:g} with h = {h:.4g} < r")
    try:
        return make_task_barrier(tb.predicate, tb.operator, tb.interval, x, t_now, world,
                                 params, negated=tb.negated, task=tb.task,
                                 t_star=deadline, fresh=True)
    except BarrierConstructionError as e:
        raise InfeasibleRetime(str(e)) from None


def replace_member(cb: CompositeBarrier, old: TaskBarrier, new: TaskBarrier) -> None:
    idx = next(i for i, m in enumerate(cb.tasks) if m is old)
    cb.tasks[idx] = new


__all__ = [
    "ALWAYS", "EVENTUALLY", "UNTIL_LEFT", "UNTIL_RIGHT", "BarrierConstructionError",
    "BarrierEval", "BarrierParams", "CompositeBarrier", "Deactivation",
    "InfeasibleRetime", "SafetyBarrier", "TaskBarrier", "choose_robustness",
    "compile_task", "composite_eval", "compute_hopt", "deactivate_satisfied",
    "gamma", "gamma_dot", "init_gammas", "make_task_barrier", "member_eval",
    "replace_member", "retime_task", "safety_barrier_eval", "select_tstar",
    "smooth_min", "task_barrier_eval", "task_satisfied",
]
