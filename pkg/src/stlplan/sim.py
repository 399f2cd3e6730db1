"""Closed-loop simulation: task scheduling, control, re-timing and logging."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .barrier import (EVENTUALLY, UNTIL_RIGHT, CompositeBarrier, InfeasibleRetime,
                      SafetyBarrier, compile_task, deactivate_satisfied,
                      replace_member, retime_task)
from .config import ScenarioConfig
from .qp import Infeasible, best_effort, control_step
from .replan import Replanner, ReplanningExhausted
from .stl import (Always, BallReach, Clearance, Eventually, Formula, Until,
                  conjuncts, format_formula, horizon, literals)
from .world import World, integrate_step

log = logging.getLogger(__name__)


@dataclass
class Task:
    name: str
    formula: Formula
    sequential: bool
    goal: Optional[tuple] = None
    status: str = "pending"
    start: Optional[float] = None
    satisfied_at: Optional[float] = None
    members: list = field(default_factory=list)

    @property
    def interval(self):
        return self.formula.interval

    @property
    def duration(self) -> Optional[float]:
        if self.start is None or self.satisfied_at is None:
            return None
        return self.satisfied_at - self.start


def _goal_literal(f: Formula):
    inner = f.right if isinstance(f, Until) else f.arg
    for p, neg in literals(inner):
        if isinstance(p, BallReach) and not neg:
            return p
    return None


def schedule_tasks(f: Formula, waypoints=None) -> List[Task]:
    """Flatten the top-level conjunction into tasks.

    Eventually/Until tasks come first, ordered by window start; they run one
    at a time. Always tasks follow and are active concurrently over their own
    window.
    """
    names = {tuple(v): k for k, v in (waypoints or {}).items()}
    seq, conc = [], []
    for part in conjuncts(f):
        if isinstance(part, (Eventually, Until)):
            seq.append(part)
        elif isinstance(part, Always):
            conc.append(part)
        else:
            raise ValueError(f"top-level conjunct must be temporal, found {format_formula(part)}")
    seq.sort(key=lambda p: p.interval.a)
    tasks = []
    for i, part in enumerate(seq):
        g = _goal_literal(part)
        goal = g.center if g is not None else None
        name = names.get(goal, f"task{i + 1}") if goal is not None else f"task{i + 1}"
        if any(t.name == name for t in tasks):
            name = f"{name}#{i + 1}"
        tasks.append(Task(name, part, True, goal))
    for a, b in zip(tasks, tasks[1:]):
        if b.interval.a < a.interval.b and a.goal != b.goal:
            warnings.warn(f"overlapping windows for {a.name} and {b.name} with different goals")
    for j, part in enumerate(conc):
        tasks.append(Task(f"always{j + 1}", part, False))
    return tasks


@dataclass
class TrajectoryLog:
    """Per-step records plus the metadata needed to re-check the run offline."""
    formula: str
    tasks: List[tuple]
    obstacles: list
    dt: float
    horizon: float
    rows: list = field(default_factory=list)
    aborted: Optional[str] = None

    COLUMNS = ("t", "x", "y", "theta", "u1", "u2", "u3", "speed", "vmax", "mode", "b",
               "active_task", "event")

    def append(self, t, x, u, speed, vmax, mode, b, task, events):
        # stored at CSV precision so in-memory and on-disk logs agree exactly
        nums = [_sig9(v) for v in (t, x[0], x[1], x[2], u[0], u[1], u[2], speed, vmax)]
        self.rows.append((*nums, mode, _sig9(b), task, ";".join(events)))

    def column(self, name) -> np.ndarray:
        i = self.COLUMNS.index(name)
        vals = [r[i] for r in self.rows]
        if name in ("mode", "active_task", "event"):
            return np.array(vals, dtype=object)
        return np.array(vals, dtype=float)

    @property
    def times(self):
        return self.column("t")

    @property
    def states(self):
        return np.column_stack([self.column("x"), self.column("y"), self.column("theta")])


def _sig9(v) -> float:
    return float(f"{float(v):.9g}")


class Simulation:
    """One closed-loop run. Owns all mutable state (barriers, counters)."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.formula = cfg.parsed_formula()
        self.world: World = cfg.world()
        self.tasks = schedule_tasks(self.formula, cfg.waypoints)
        self.seq = [t for t in self.tasks if t.sequential]
        self.conc = [t for t in self.tasks if not t.sequential]
        self.cb = CompositeBarrier(cfg.barrier.eta, [], [
            SafetyBarrier(Clearance(o.id, o.d_safe)) for o in self.world.obstacles])
        self.replanner = Replanner(cfg.replan_params())
        self.control = cfg.control()
        self.horizon = cfg.horizon if cfg.horizon is not None else horizon(self.formula)
        self.log = TrajectoryLog(
            format_formula(self.formula),
            [(t.name, t.interval.a, t.interval.b) for t in self.tasks],
            [_obstacle_meta(o) for o in self.world.obstacles], cfg.dt, self.horizon)
        self.current = 0
        self.safety_violation = False

    # -- task bookkeeping -------------------------------------------------------

    def active_task(self) -> Optional[Task]:
        if self.current < len(self.seq) and self.seq[self.current].status == "active":
            return self.seq[self.current]
        return None

    def _activate(self, task: Task, x, t, events):
        task.members = compile_task(task.formula, x, t, self.world, self.cfg.barrier, task.name)
        self.cb.tasks.extend(task.members)
        task.status = "active"
        task.start = t
        events.append(f"start:{task.name}")
        if task.sequential and self.cfg.retime and task.goal is not None:
            v_max, _ = self.world.vmax_at(x, t)
            self._retime(task, self.replanner.on_task_start, x, t, v_max, events)

    def _retime(self, task: Task, trigger, x, t, v_max, events) -> bool:
        goals = [m for m in task.members if m.active and m.operator in (EVENTUALLY, UNTIL_RIGHT)]
        if not goals or task.goal is None:
            return False
        ev = trigger(t, x, task.goal, goals[0].t_star, v_max)
        if not ev.new_tstar > 0:
            return False
        try:
            for m in goals:
                new = retime_task(m, t, ev.new_tstar, x, self.world, self.cfg.barrier)
                replace_member(self.cb, m, new)
                task.members = [new if mm is m else mm for mm in task.members]
        except InfeasibleRetime as e:
            self._fail(task, t, events, str(e))
            return False
        events.append(f"replan:{ev.trigger}:{ev.new_tstar:.6g}")
        return True

    def _fail(self, task: Task, t, events, why=""):
        for m in task.members:
            m.active = False
        task.status = "missed"
        events.append(f"missed:{task.name}")
        log.info("task %s missed at t=%.2f %s", task.name, t, why)
        self._advance_past(task)

    def _advance_past(self, task: Task):
        if task.sequential and self.current < len(self.seq) and self.seq[self.current] is task:
            self.current += 1

    def _update_tasks(self, x, t, events):
        # repeat so a task that already holds when it starts is closed in the same tick
        for _ in range(len(self.tasks) + 1):
            before = len(events)
            self._update_once(x, t, events)
            if len(events) == before:
                break

    def _update_once(self, x, t, events):
        for d in deactivate_satisfied(self.cb, x, t, self.world):
            task = next(tk for tk in self.tasks if tk.name == d.task)
            if d.reason == "satisfied":
                task.status = "satisfied"
                task.satisfied_at = t
                events.append(f"satisfied:{task.name}")
            else:
                task.status = "closed"
            self._advance_past(task)
        cur = self.active_task()
        if cur is not None and t > cur.interval.b + self.cfg.dt / 2:
            self._fail(cur, t, events, "(window closed)")
        for task in self.conc:
            if task.status == "pending":
                self._activate(task, x, t, events)
        if self.current < len(self.seq):
            nxt = self.seq[self.current]
            if nxt.status == "pending" and t >= nxt.interval.a - self.cfg.dt / 2:
                self._activate(nxt, x, t, events)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> TrajectoryLog:
        cfg = self.cfg
        x = np.array(cfg.start, dtype=float)
        n_steps = int(round(self.horizon / cfg.dt))
        prev_vmax = None
        for k in range(n_steps + 1):
            t = k * cfg.dt
            events: List[str] = []
            self._update_tasks(x, t, events)
            v_max, mode = self.world.vmax_at(x, t)
            cur = self.active_task()
            try:
                if (cfg.retime and cur is not None and prev_vmax is not None
                        and v_max != prev_vmax and "start:" + cur.name not in events):
                    self._retime(cur, self.replanner.on_vmax_change, x, t, v_max, events)
                prev_vmax = v_max
                out = control_step(x, t, self.cb, cfg.dynamics, self.world, v_max, self.control)
                retries = 0
                while isinstance(out.solution, Infeasible):
                    events.append("infeasible")
                    cur = self.active_task()
                    if not cfg.retime or cur is None or retries >= cfg.max_retries:
                        break
                    if not self._retime(cur, self.replanner.on_infeasible, x, t, v_max, events):
                        break
                    retries += 1
                    out = control_step(x, t, self.cb, cfg.dynamics, self.world, v_max,
                                       self.control)
            except ReplanningExhausted as e:
                events.append("abort")
                self.log.aborted = str(e)
                log.warning("run aborted at t=%.2f: %s", t, e)
                self.log.append(t, x, np.zeros(3), 0.0, v_max, mode, math.nan,
                                self._task_label(), events)
                break
            u = out.u
            if isinstance(out.solution, Infeasible):
                events.append("tick-failed")
                u = best_effort(out.qp)
            v_real = cfg.dynamics.f(x) + cfg.dynamics.g(x) @ u
            speed = math.hypot(v_real[0], v_real[1])
            b = out.barrier.value if out.barrier is not None else math.inf
            self.log.append(t, x, u, speed, v_max, mode, b, self._task_label(), events)
            if k < n_steps:
                x = integrate_step(x, u, cfg.dynamics, cfg.dt)
        return self.log

    def _task_label(self) -> str:
        cur = self.active_task()
        return cur.name if cur is not None else "-"


def _obstacle_meta(o) -> dict:
    m = o.motion
    d = {"id": o.id, "radius": o.radius, "center": list(m.center),
         "safe_distance": o.d_safe}
    if hasattr(m, "amplitude"):
        d["rhodonea"] = {"amplitude": m.amplitude, "petals": m.petals, "rate": m.rate,
                         "phase": m.phase}
    return d


def run_scenario(cfg: ScenarioConfig):
    """Run ``cfg`` to its horizon; returns (TrajectoryLog, Report)."""
    from .report import build_report

    sim = Simulation(cfg)
    log_ = sim.run()
    return log_, build_report(log_)
