"""Boolean and quantitative semantics over sampled signals.

Temporal windows [t+a, t+b] are closed and widened by half a sampling step
on each side so fixed-step signals never miss an endpoint sample to
floating-point error.
"""
from __future__ import annotations

import numpy as np

from .formula import (Always, And, Eventually, Formula, Not, Pred, TrueF,
                      Until, World, eval_predicate, horizon)


class SignalTooShort(ValueError):
    pass


class Signal:
    """Time-stamped states; timestamps strictly increasing."""

    def __init__(self, times, states):
        self.times = np.asarray(times, dtype=float)
        self.states = np.atleast_2d(np.asarray(states, dtype=float))
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("signal must have at least one sample")
        if self.states.shape[0] != self.times.size:
            raise ValueError("one state per timestamp required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        self.step = float(np.median(np.diff(self.times))) if self.times.size > 1 else 0.0

    def __len__(self):
        return self.times.size

    def index_at(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > self.step / 2 + 1e-12:
            raise SignalTooShort(f"no sample at t={t}")
        return i

    def window(self, lo: float, hi: float) -> slice:
        half = self.step / 2
        i0 = int(np.searchsorted(self.times, lo - half, side="left"))
        i1 = int(np.searchsorted(self.times, hi + half, side="right"))
        return slice(i0, i1)

    def covers(self, t: float, length: float) -> bool:
        half = self.step / 2
        return self.times[0] <= t + half and self.times[-1] >= t + length - half


class _Eval:
    """Per-call cache of sample-wise robustness of state formulas."""

    def __init__(self, signal: Signal, world):
        self.s = signal
        self.world = world
        self.cache = {}

    def state_rho(self, f: Formula) -> np.ndarray:
        key = id(f)
        if key in self.cache:
            return self.cache[key][1]
        s = self.s
        if isinstance(f, TrueF):
            v = np.full(len(s), np.inf)
        elif isinstance(f, Pred):
            v = np.array([eval_predicate(f.predicate, x, t, self.world)
                          for t, x in zip(s.times, s.states)])
        elif isinstance(f, Not):
            v = -self.state_rho(f.arg)
        elif isinstance(f, And):
            v = np.minimum(self.state_rho(f.left), self.state_rho(f.right))
        else:
            raise TypeError(f"not a state formula: {type(f).__name__}")
        self.cache[key] = (f, v)
        return v

    def state_bool(self, f: Formula) -> np.ndarray:
        # h >= 0 holds for mu, h < 0 for !mu; kept separate from rho so the
        # boundary case h == 0 follows the Boolean definition exactly.
        s = self.s
        if isinstance(f, TrueF):
            return np.ones(len(s), dtype=bool)
        if isinstance(f, Pred):
            return self.state_rho(f) >= 0
        if isinstance(f, Not):
            return ~self.state_bool(f.arg)
        if isinstance(f, And):
            return self.state_bool(f.left) & self.state_bool(f.right)
        raise TypeError(f"not a state formula: {type(f).__name__}")

    def rho(self, f: Formula, i: int) -> float:
        s = self.s
        t = s.times[i]
        if isinstance(f, And):
            return min(self.rho(f.left, i), self.rho(f.right, i))
        if isinstance(f, (Eventually, Always)):
            w = s.window(t + f.interval.a, t + f.interval.b)
            vals = self.state_rho(f.arg)[w]
            if vals.size == 0:
                return -np.inf if isinstance(f, Eventually) else np.inf
            return float(vals.max() if isinstance(f, Eventually) else vals.min())
        if isinstance(f, Until):
            w = s.window(t + f.interval.a, t + f.interval.b)
            j = max(w.start, i)
            if w.stop <= j:
                return -np.inf
            left = np.minimum.accumulate(self.state_rho(f.left)[i:w.stop])
            right = self.state_rho(f.right)[j:w.stop]
            return float(np.max(np.minimum(right, left[j - i:])))
        return float(self.state_rho(f)[i])

    def holds(self, f: Formula, i: int) -> bool:
        s = self.s
        t = s.times[i]
        if isinstance(f, And):
            return self.holds(f.left, i) and self.holds(f.right, i)
        if isinstance(f, (Eventually, Always)):
            w = s.window(t + f.interval.a, t + f.interval.b)
            vals = self.state_bool(f.arg)[w]
            return bool(vals.any() if isinstance(f, Eventually) else vals.all())
        if isinstance(f, Until):
            w = s.window(t + f.interval.a, t + f.interval.b)
            j = max(w.start, i)
            if w.stop <= j:
                return False
            left = np.logical_and.accumulate(self.state_bool(f.left)[i:w.stop])
            right = self.state_bool(f.right)[j:w.stop]
            return bool(np.any(right & left[j - i:]))
        return bool(self.state_bool(f)[i])


def _prepare(f: Formula, s: Signal, t: float) -> int:
    if not s.covers(t, horizon(f)):
        raise SignalTooShort(
            f"signal spans [{s.times[0]:g}, {s.times[-1]:g}] but formula needs "
            f"[{t:g}, {t + horizon(f):g}]")
    return s.index_at(t)


def eval_boolean(f: Formula, s: Signal, t: float = 0.0, world: World | None = None) -> bool:
    i = _prepare(f, s, t)
    return _Eval(s, world).holds(f, i)


def eval_robustness(f: Formula, s: Signal, t: float = 0.0, world: World | None = None) -> float:
    i = _prepare(f, s, t)
    return _Eval(s, world).rho(f, i)
