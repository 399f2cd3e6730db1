"""Timing reports, offline verification and log serialization.

The verdict is always recomputed by the STL monitor from the logged signal,
never taken from the controller's own bookkeeping.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .sim import TrajectoryLog
from .stl import Signal, SignalTooShort, eval_boolean, parse_formula
from .world import Obstacle, Rhodonea, Static, World, obstacle_state

BARRIER_TOL = 1e-6
SPEED_TOL = 1e-6
MAGIC = "stlplan trajectory log v1"


class MalformedLog(ValueError):
    pass


@dataclass
class TaskRow:
    name: str
    a: float
    b: float
    start: Optional[float]
    satisfied_at: Optional[float]

    @property
    def window(self) -> float:
        return self.b - self.a

    @property
    def duration(self) -> Optional[float]:
        if self.start is None or self.satisfied_at is None:
            return None
        return self.satisfied_at - self.start

    @property
    def within_window(self) -> bool:
        return self.satisfied_at is not None and self.a <= self.satisfied_at <= self.b


@dataclass
class Report:
    tasks: List[TaskRow]
    movement_time: float
    horizon: float
    replans: int
    infeasible: int
    verdict: Optional[bool]
    note: str = ""
    violations: List[str] = field(default_factory=list)
    aborted: Optional[str] = None

    @property
    def safe(self) -> bool:
        return not self.violations

    @property
    def accepted(self) -> bool:
        return bool(self.verdict) and self.safe and self.aborted is None


def obstacles_from_meta(meta: list) -> List[Obstacle]:
    out = []
    for d in meta:
        if "rhodonea" in d:
            rh = d["rhodonea"]
            motion = Rhodonea(tuple(d["center"]), rh["amplitude"], rh["petals"], rh["rate"],
                              rh["phase"])
        else:
            motion = Static(tuple(d["center"]))
        out.append(Obstacle(d["id"], d["radius"], motion, d.get("safe_distance")))
    return out


def safety_violations(log: TrajectoryLog, limit: int = 20) -> List[str]:
    """Steps breaking the barrier, speed-cap or no-penetration properties."""
    out = []
    t = log.column("t")
    b = log.column("b")
    speed = log.column("speed")
    vmax = log.column("vmax")
    xy = log.states[:, :2]
    for i in np.flatnonzero(b < -BARRIER_TOL)[:limit]:
        out.append(f"step {i} (t={t[i]:g}): barrier value {b[i]:.3g} < 0")
    for i in np.flatnonzero(speed > vmax + SPEED_TOL)[:limit]:
        out.append(f"step {i} (t={t[i]:g}): speed {speed[i]:.6g} exceeds v_max {vmax[i]:.6g}")
    for o in obstacles_from_meta(log.obstacles):
        pos = np.array([obstacle_state(o, ti)[0] for ti in t])
        d = np.hypot(*(xy - pos).T) if len(t) else np.array([])
        for i in np.flatnonzero(d < o.radius)[:limit]:
            out.append(f"step {i} (t={t[i]:g}): inside obstacle {o.id} "
                       f"(distance {d[i]:.4g} < radius {o.radius:g})")
    return out


def _task_rows(log: TrajectoryLog) -> List[TaskRow]:
    rows = {name: TaskRow(name, a, b, None, None) for name, a, b in log.tasks}
    for t, ev in zip(log.column("t"), log.column("event")):
        if not ev:
            continue
        for tok in ev.split(";"):
            kind, _, name = tok.partition(":")
            if kind == "start" and name in rows:
                rows[name].start = float(t)
            elif kind == "satisfied" and name in rows:
                rows[name].satisfied_at = float(t)
    return list(rows.values())


def _count(log: TrajectoryLog, prefix: str) -> int:
    n = 0
    for ev in log.column("event"):
        if ev:
            n += sum(1 for tok in ev.split(";") if tok == prefix or tok.startswith(prefix + ":"))
    return n


def verify(log: TrajectoryLog):
    """Offline monitor verdict: (True|False|None, note)."""
    if not log.rows:
        return None, "empty log"
    f = parse_formula(log.formula)
    world = World(obstacles=obstacles_from_meta(log.obstacles))
    try:
        sig = Signal(log.times, log.states)
        return eval_boolean(f, sig, float(log.times[0]), world), ""
    except SignalTooShort as e:
        return None, f"undetermined: {e}"


def build_report(log: TrajectoryLog) -> Report:
    tasks = _task_rows(log)
    always = {name for name, *_ in log.tasks if name.startswith("always")}
    movement = sum(r.duration for r in tasks if r.duration is not None and r.name not in always)
    verdict, note = verify(log)
    return Report(tasks, movement, log.horizon, _count(log, "replan"), _count(log, "infeasible"),
                  verdict, note, safety_violations(log), log.aborted)


# -- serialization -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return f"{v:.9g}"


def write_csv(log: TrajectoryLog, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {MAGIC}\n")
        fh.write(f"# formula: {log.formula}\n")
        fh.write(f"# tasks: {json.dumps(log.tasks)}\n")
        fh.write(f"# obstacles: {json.dumps(log.obstacles)}\n")
        fh.write(f"# dt: {log.dt!r}\n")
        fh.write(f"# horizon: {log.horizon!r}\n")
        if log.aborted:
            fh.write(f"# aborted: {log.aborted}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TrajectoryLog.COLUMNS)
        for row in log.rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> TrajectoryLog:
    path = Path(path)
    meta = {}
    body = []
    with path.open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                meta[key.strip()] = val.strip()
            else:
                body.append(line)
    required = ("formula", "tasks", "obstacles", "dt", "horizon")
    missing = [k for k in required if k not in meta]
    if missing:
        raise MalformedLog(f"{path}: missing metadata {', '.join(missing)}")
    reader = csv.reader(body)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedLog(f"{path}: no header row") from None
    if tuple(header) != TrajectoryLog.COLUMNS:
        raise MalformedLog(f"{path}: unexpected header {header}")
    try:
        log = TrajectoryLog(meta["formula"], [tuple(t) for t in json.loads(meta["tasks"])],
                            json.loads(meta["obstacles"]), float(meta["dt"]),
                            float(meta["horizon"]), aborted=meta.get("aborted"))
        for n, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise MalformedLog(f"{path}: row {n} has {len(rec)} fields")
            nums = [float(v) for v in rec[:9]]
            log.rows.append((*nums, rec[9], float(rec[10]), rec[11], rec[12]))
    except (ValueError, json.JSONDecodeError) as e:
        if isinstance(e, MalformedLog):
            raise
        raise MalformedLog(f"{path}: {e}") from None
    return log


def write_plot_data(log: TrajectoryLog, outdir) -> List[Path]:
    """speed.dat (t speed vmax), barrier.dat (t b), path.dat (x y + obstacle xy)."""
    outdir = Path(outdir)
    t = log.column("t")
    files = []

    def dump(name, header, cols):
        p = outdir / name
        data = np.column_stack(cols) if cols else np.empty((0, 0))
        np.savetxt(p, data, fmt="%.9g", header=header)
        files.append(p)

    dump("speed.dat", "t speed vmax", [t, log.column("speed"), log.column("vmax")])
    b = log.column("b")
    ok = np.isfinite(b)
    dump("barrier.dat", "t b", [t[ok], b[ok]])
    cols = [log.column("x"), log.column("y")]
    names = ["x", "y"]
    for o in obstacles_from_meta(log.obstacles):
        pos = np.array([obstacle_state(o, ti)[0] for ti in t]).reshape(-1, 2)
        cols += [pos[:, 0], pos[:, 1]]
        names += [f"{o.id}_x", f"{o.id}_y"]
    dump("path.dat", " ".join(names), cols)
    return files


def format_report(rep: Report) -> str:
    """Plain-text table: STL window length against achieved duration per task."""
    names = [r.name for r in rep.tasks]
    w = max([len("Actual path duration")] + [len(n) for n in names]) + 2
    col = max(12, max((len(n) for n in names), default=0) + 2)

    def cell(v):
        return f"{v:.2f}" if isinstance(v, float) else str(v)

    head = "".ljust(w) + "".join(n.rjust(col) for n in names) + "t_total".rjust(col)
    window = "STL constraint".ljust(w) + "".join(cell(r.window).rjust(col) for r in rep.tasks)
    window += cell(rep.horizon).rjust(col)
    dur = "Actual path duration".ljust(w) + "".join(
        (cell(r.duration) if r.duration is not None else "-").rjust(col) for r in rep.tasks)
    dur += cell(rep.movement_time).rjust(col)
    sat = "Satisfied at".ljust(w) + "".join(
        (cell(r.satisfied_at) if r.satisfied_at is not None else "-").rjust(col)
        for r in rep.tasks)
    lines = ["Time in [s]", head, window, dur, sat, ""]
    for r in rep.tasks:
        lines.append(f"  {r.name}: window [{r.a:g}, {r.b:g}], "
                     + (f"satisfied at {r.satisfied_at:.2f}" if r.satisfied_at is not None
                        else "not satisfied"))
    lines.append(f"movement time: {rep.movement_time:.2f} s of {rep.horizon:g} s horizon")
    lines.append(f"replan events: {rep.replans}, QP infeasibilities: {rep.infeasible}")
    if rep.aborted:
        lines.append(f"aborted: {rep.aborted}")
    verdict = {True: "satisfied", False: "violated", None: "undetermined"}[rep.verdict]
    lines.append(f"verdict (offline monitor): {verdict}" + (f" ({rep.note})" if rep.note else ""))
    if rep.violations:
        lines.append(f"safety violations ({len(rep.violations)} shown):")
        lines += [f"  {v}" for v in rep.violations]
    else:
        lines.append("safety: no violations")
    return "\n".join(lines) + "\n"


def report_fields(rep: Report) -> dict:
    """Comparable snapshot of a report (used for round-trip checks)."""
    return {
        "tasks": [(r.name, r.a, r.b, r.start, r.satisfied_at) for r in rep.tasks],
        "movement_time": rep.movement_time, "horizon": rep.horizon,
        "replans": rep.replans, "infeasible": rep.infeasible, "verdict": rep.verdict,
        "violations": list(rep.violations), "aborted": rep.aborted,
    }
