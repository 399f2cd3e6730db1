"""Per-step CBF quadratic program with a planar speed cap.

    minimize    u^T Q u
    subject to  a . u >= beta               (CBF derivative condition)
                || S u || <= v_max          (planar speed of g(x) u)

with a = db/dx g(x), beta = -alpha(b) - db/dt - db/dx f(x) and S the two
planar rows of g(x). Solved exactly by enumerating the active sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from .barrier import BarrierEval, CompositeBarrier, composite_eval

FEAS_TOL = 1e-9
_WHEEL_ANGLES = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)


@dataclass(frozen=True)
class Dynamics:
    """Drift-free input-affine model x' = f(x) + g(x) u over x = (x, y, theta).

    ``identity``: u = (v_x, v_y, omega) directly.
    ``omni``: u holds the three wheel speeds of a 120-degree omnidirectional
    base with unit wheel radius and chassis radius ``chassis_radius``.
    """
    model: str = "identity"
    chassis_radius: float = 0.2

    def __post_init__(self):
        if self.model not in ("identity", "omni"):
            raise ValueError(f"unknown dynamics model {self.model!r}")
        if not self.chassis_radius > 0:
            raise ValueError("chassis radius must be positive")

    def f(self, x) -> np.ndarray:
        return np.zeros(len(x))

    def g(self, x) -> np.ndarray:
        if self.model == "identity":
            return np.eye(len(x))
        th = float(x[2])
        s = [math.sin(th + a) for a in _WHEEL_ANGLES]
        c = [math.cos(th + a) for a in _WHEEL_ANGLES]
        w = 1.0 / (3.0 * self.chassis_radius)
        return np.array([[-2.0 / 3.0 * v for v in s], [2.0 / 3.0 * v for v in c], [w, w, w]])

    def wheel_map(self, x) -> np.ndarray:
        """Inverse of g: body velocity (v_x, v_y, omega) to wheel speeds."""
        th = x[2]
        ang = th + np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        return np.column_stack([-np.sin(ang), np.cos(ang), np.full(3, self.chassis_radius)])


@dataclass(frozen=True)
class AlphaFn:
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def __call__(self, b: float) -> float:
        return self.kappa * b


@dataclass
class QpProblem:
    Q: np.ndarray
    a: np.ndarray
    beta: float
    S: np.ndarray
    v_max: float

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.a = np.asarray(self.a, dtype=float)
        self.S = np.atleast_2d(np.asarray(self.S, dtype=float))
        self.beta = float(self.beta)
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        m = self.a.size
        if self.Q.shape != (m, m) or self.S.shape[1] != m:
            raise ValueError("inconsistent QP dimensions")
        if np.abs(self.Q - self.Q.T).max() > 1e-8 * (1.0 + np.abs(self.Q).max()):
            raise ValueError("Q must be symmetric")


@dataclass
class QpSolution:
    u: np.ndarray
    active_set: frozenset
    lam: float
    mu: float
    cost: float = 0.0
    kkt_residual: float = 0.0


@dataclass(frozen=True)
class Infeasible:
    """The CBF halfspace misses the speed-feasible set."""
    min_speed: float
    v_max: float

    def __bool__(self):
        return False


def assemble_qp(be: BarrierEval, dyn: Dynamics, x, v_max: float, Q=None,
                alpha: AlphaFn = AlphaFn(), margin: float = 0.0) -> QpProblem:
    """Build the QP for barrier evaluation ``be`` at state ``x``.

    ``margin`` tightens the condition to the shifted barrier b - margin,
    which keeps b above ``margin`` (up to integration error) in closed loop.
    """
    x = np.asarray(x, dtype=float)
    G = dyn.g(x)
    a = be.grad_x @ G
    beta = -alpha(be.value - margin) - be.d_dt - float(be.grad_x @ dyn.f(x))
    if Q is None:
        Q = np.eye(G.shape[1])
    return QpProblem(Q, a, beta, G[:2], v_max)


def _cost(Q, u):
    return float(u @ Q @ u)


def solve_qp(qp: QpProblem) -> Union[QpSolution, Infeasible]:
    Q, a, beta, S, v = qp.Q, qp.a, qp.beta, qp.S, qp.v_max
    m = a.size
    if beta <= 0:
        sol = QpSolution(np.zeros(m), frozenset(), 0.0, 0.0, 0.0)
        sol.kkt_residual = kkt_residual(qp, sol)
        return sol
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise ValueError("solver requires a positive definite Q") from None
    # w = L^T u turns the cost into ||w||^2
    a_w = np.linalg.solve(L, a)
    C = np.linalg.solve(L, S.T).T
    s, V = np.linalg.eigh(C.T @ C)
    s = np.clip(s, 0.0, None)
    ap = V.T @ a_w
    na2 = float(ap @ ap)
    if na2 == 0.0:
        return Infeasible(math.inf, v)

    scale = max(s.max(), 1e-300)
    null = s <= 1e-12 * scale
    if np.any(np.abs(ap[null]) > 1e-12 * math.sqrt(na2)):
        min_speed = 0.0
    else:
        min_speed = beta / math.sqrt(float(np.sum(ap[~null] ** 2 / s[~null])))
    if min_speed > v * (1 + 1e-12):
        return Infeasible(min_speed, v)

    def point(mu):
        d = 1.0 / (1.0 + mu * s)
        k = beta / float(np.sum(ap ** 2 * d))
        wp = k * d * ap
        return k, wp, math.sqrt(float(np.sum(s * wp ** 2)))

    k, wp, speed = point(0.0)
    if speed <= v:
        active = frozenset({"cbf"})
        mu = 0.0
    else:
        hi = 1.0
        while point(hi)[2] > v:
            hi *= 10.0
            if hi > 1e300:
                return Infeasible(min_speed, v)
        mu = brentq(lambda z: point(z)[2] - v, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                    maxiter=500)
        k, wp, speed = point(mu)
        if speed > v:
            # pull back onto the speed cap along the mu path
            mu = np.nextafter(mu, np.inf)
            k, wp, speed = point(mu)
        active = frozenset({"cbf", "speed"})
    u = np.linalg.solve(L.T, V @ wp)
    sol = QpSolution(u, active, 2.0 * k, float(mu), _cost(Q, u))
    sol.kkt_residual = kkt_residual(qp, sol)
    return sol


def kkt_residual(qp: QpProblem, sol: QpSolution) -> float:
    """Largest violation among stationarity, primal and dual feasibility and
    complementary slackness (speed constraint taken as v^2 - ||S u||^2 >= 0)."""
    u = np.asarray(sol.u, dtype=float)
    Su = qp.S @ u
    g_cbf = float(qp.a @ u) - qp.beta
    g_speed = qp.v_max ** 2 - float(Su @ Su)
    stat = 2 * qp.Q @ u - sol.lam * qp.a + 2 * sol.mu * (qp.S.T @ Su)
    return max(float(np.max(np.abs(stat))) if stat.size else 0.0,
               max(0.0, -g_cbf),
               max(0.0, math.sqrt(float(Su @ Su)) - qp.v_max),
               max(0.0, -sol.lam, -sol.mu),
               abs(sol.lam * g_cbf),
               abs(sol.mu * g_speed))


def constraints_ok(qp: QpProblem, u, tol: float = FEAS_TOL) -> bool:
    u = np.asarray(u, dtype=float)
    return (float(qp.a @ u) >= qp.beta - tol
            and float(np.linalg.norm(qp.S @ u)) <= qp.v_max + tol)


def best_effort(qp: QpProblem) -> np.ndarray:
    """Input pushing the barrier up as hard as the speed cap allows.

    Used when the QP stays infeasible; the result respects the speed cap.
    """
    pinv = np.linalg.pinv(qp.S)
    c = pinv.T @ qp.a
    n = float(np.linalg.norm(c))
    if n == 0.0:
        return np.zeros(qp.a.size)
    return pinv @ (qp.v_max * c / n)


@dataclass(frozen=True)
class ControlConfig:
    Q: Optional[np.ndarray] = None
    alpha: AlphaFn = AlphaFn()
    margin: float = 0.0


@dataclass
class ControlOutcome:
    u: np.ndarray
    v_real: np.ndarray
    barrier: Optional[BarrierEval]
    qp: Optional[QpProblem]
    solution: Union[QpSolution, Infeasible, None]

    @property
    def feasible(self) -> bool:
        return not isinstance(self.solution, Infeasible)

    @property
    def planar_speed(self) -> float:
        return float(math.hypot(self.v_real[0], self.v_real[1]))


def control_step(x, t: float, cb: CompositeBarrier, dyn: Dynamics, world, v_max: float,
                 cfg: ControlConfig = ControlConfig()) -> ControlOutcome:
    """Evaluate the composite barrier, solve the QP, report u and x' = f + g u.

    With no active member the input is zero. On infeasibility ``u`` is zero
    and ``solution`` is an Infeasible marker for the replanner.
    """
    x = np.asarray(x, dtype=float)
    m = dyn.g(x).shape[1]
    if not cb.active_members():
        return ControlOutcome(np.zeros(m), dyn.f(x), None, None, None)
    be = composite_eval(cb, x, t, world)
    qp = assemble_qp(be, dyn, x, v_max, cfg.Q, cfg.alpha, cfg.margin)
    sol = solve_qp(qp)
    u = sol.u if isinstance(sol, QpSolution) else np.zeros(m)
    return ControlOutcome(u, dyn.f(x) + dyn.g(x) @ u, be, qp, sol)
