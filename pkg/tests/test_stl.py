import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stlplan.stl import (Always, And, BallReach, Clearance, DegenerateGradientWarning,
                         Eventually, FragmentError, Halfspace, Interval, Not, Pred,
                         STLSyntaxError, Signal, SignalTooShort, TrueF, Until,
                         eval_boolean, eval_predicate, eval_robustness, format_formula,
                         horizon, parse_formula, predicate_gradient,
                         predicate_time_derivative)
from stlplan.world import Obstacle, Rhodonea, Static, World

from .strategies import formula, state_formula

BALL = BallReach((9, 3), 0.2)


# -- parsing and formatting ----------------------------------------------------

def test_parse_eventually_ball():
    f = parse_formula("F[0,10](ball([9,3], 0.2))")
    assert f == Eventually(Interval(0, 10), Pred(BALL))


def test_parse_true():
    assert parse_formula("true") == TrueF()


def test_parse_always_and_eventually():
    f = parse_formula("G[0,5](!ball([0,0],1)) && F[2,4](ball([1,1],0.5))")
    assert f == And(Always(Interval(0, 5), Not(Pred(BallReach((0, 0), 1)))),
                    Eventually(Interval(2, 4), Pred(BallReach((1, 1), 0.5))))


def test_parse_until_clear_half_and_scientific():
    f = parse_formula("(clear(o1, 5e-1)) U[1,2.5e0](half([0,1], 3))")
    assert f == Until(Interval(1, 2.5), Pred(Clearance("o1", 0.5)),
                      Pred(Halfspace((0, 1), 3)))


def test_parse_waypoint_identifier():
    f = parse_formula("F[0,10](ball(home, 0.2))", {"home": (9, 3)})
    assert f == Eventually(Interval(0, 10), Pred(BALL))


def test_parse_whitespace_insensitive():
    a = parse_formula("F [ 0 , 10 ] ( ball ( [ 9 , 3 ] , 0.2 ) )")
    b = parse_formula("F[0,10](ball([9,3],0.2))")
    assert a == b


def test_format_examples():
    assert format_formula(Eventually(Interval(0, 10), Pred(BALL))) == "F[0,10](ball([9,3], 0.2))"
    assert format_formula(TrueF()) == "true"
    a, b = Pred(BALL), Not(Pred(BALL))
    assert format_formula(And(a, b)) == f"({format_formula(a)}) && ({format_formula(b)})"


@given(formula)
def test_round_trip(f):
    assert parse_formula(format_formula(f)) == f


@given(state_formula)
def test_round_trip_state_formulas(f):
    assert parse_formula(format_formula(f)) == f


@pytest.mark.parametrize("text, line, col", [
    ("F[0,10](ball([9,3] 0.2))", 1, 20),
    ("F[0,10](ball([9,3], 0.2)", 1, 25),
    ("G[0,5](true)\n && X", 2, 5),
])
def test_syntax_errors_carry_position(text, line, col):
    with pytest.raises(STLSyntaxError) as e:
        parse_formula(text)
    assert (e.value.line, e.value.column) == (line, col)


def test_negated_temporal_is_fragment_error():
    with pytest.raises(FragmentError, match="Eventually"):
        parse_formula("!F[0,1](ball([0,0],1))")


def test_nested_temporal_is_fragment_error():
    with pytest.raises(FragmentError):
        parse_formula("F[0,1](G[0,1](ball([0,0],1)))")


def test_unbounded_interval_is_fragment_error():
    with pytest.raises(FragmentError, match="unbounded"):
        parse_formula("F[0,inf](ball([0,0],1))")


def test_unknown_waypoint():
    with pytest.raises(STLSyntaxError, match="nowhere"):
        parse_formula("F[0,1](ball(nowhere, 1))", {})


def test_predicate_validation():
    with pytest.raises(ValueError):
        BallReach((0, 0), 0)
    with pytest.raises(ValueError):
        Clearance("o", -1)
    with pytest.raises(ValueError):
        Halfspace((1, 1), 0)
    Halfspace((1.0 + 5e-10, 0.0), 0)


# -- horizon ---------------------------------------------------------------------

def test_horizon_examples():
    mu1, mu2 = Pred(BALL), Pred(BallReach((0, 0), 1))
    assert horizon(Eventually(Interval(0, 10), mu1)) == 10
    assert horizon(mu1) == 0
    assert horizon(And(Eventually(Interval(0, 10), mu1), Eventually(Interval(50, 60), mu2))) == 60


@given(formula, formula)
def test_horizon_of_conjunction_is_max(f1, f2):
    assert horizon(And(f1, f2)) == max(horizon(f1), horizon(f2))


# -- predicates ------------------------------------------------------------------

def _world_one(motion, d_safe=1.0):
    return World(obstacles=[Obstacle("o", 0.3, motion, d_safe)])


def test_eval_predicate_examples():
    assert eval_predicate(BALL, [9, 3, 0]) == pytest.approx(0.2)
    assert eval_predicate(BALL, [9, 3.2, 0]) == pytest.approx(0.0, abs=1e-12)
    w = _world_one(Static((1.0, 1.0)))
    assert eval_predicate(Clearance("o", 1.0), [3, 1, 0], 0.0, w) == pytest.approx(3.0)


def test_gradient_examples():
    w = _world_one(Static((0.0, 0.0)))
    np.testing.assert_allclose(predicate_gradient(Clearance("o", 1.0), [2, 0, 0], 0, w), [4, 0, 0])
    np.testing.assert_allclose(predicate_gradient(Halfspace((0, 1), 5), [7, -3, 1]), [0, -1, 0])
    np.testing.assert_allclose(predicate_gradient(BallReach((0, 0), 1), [3, 4, 0]),
                               [-0.6, -0.8, 0])


def test_ball_gradient_at_center_is_zero_with_warning():
    with pytest.warns(DegenerateGradientWarning):
        g = predicate_gradient(BALL, [9, 3, 0.4])
    assert not g.any()


def _fd_grad(fun, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("kind", ["ball", "clear", "half"])
def test_gradient_matches_finite_differences(kind, rng):
    w = _world_one(Rhodonea((0.5, -0.5), 1.0, 3.0, 0.7, 0.2))
    preds = {"ball": BallReach((1.0, 2.0), 0.5), "clear": Clearance("o", 0.8),
             "half": Halfspace((0.6, 0.8), 1.0)}
    p = preds[kind]
    for _ in range(100):
        x = rng.uniform(-5, 5, 3)
        t = rng.uniform(0, 10)
        g = predicate_gradient(p, x, t, w)
        fd = _fd_grad(lambda z: eval_predicate(p, z, t, w), x)
        assert np.linalg.norm(g - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))


def test_clearance_time_derivative_matches_finite_differences(rng):
    w = _world_one(Rhodonea((0.0, 0.0), 1.5, 2.0, 0.5, 0.3))
    p = Clearance("o", 0.5)
    for _ in range(50):
        x = rng.uniform(-3, 3, 3)
        t = rng.uniform(0, 20)
        h = 1e-6
        fd = (eval_predicate(p, x, t + h, w) - eval_predicate(p, x, t - h, w)) / (2 * h)
        assert predicate_time_derivative(p, x, t, w) == pytest.approx(fd, rel=1e-6, abs=1e-7)
    assert predicate_time_derivative(BALL, [0, 0, 0], 1.0) == 0.0


# -- monitoring ------------------------------------------------------------------

def _line_signal(dt=0.01, T=10.0, enter=6.51):
    """Straight approach that reaches the ball boundary exactly at ``enter``."""
    t = np.round(np.arange(0, T + dt / 2, dt), 10)
    d = 0.2 + np.maximum(enter - t, 0) * 0.5
    states = np.column_stack([9 - d, np.full_like(t, 3.0), np.zeros_like(t)])
    return Signal(t, states)


def test_eventually_entering_at_6_51():
    f = Eventually(Interval(0, 10), Pred(BALL))
    s = _line_signal()
    assert eval_boolean(f, s)
    assert eval_robustness(f, s) >= 0


def test_always_true_when_h_nonnegative():
    s = _line_signal()
    f = Always(Interval(0, 10), Pred(BallReach((9, 3), 10.0)))
    assert eval_boolean(f, s)


def test_eventually_outside_window_is_false():
    t = np.arange(0, 7.001, 0.5)
    states = np.zeros((t.size, 3))
    states[:, 0] = np.where(np.isclose(t, 4.0), 0.0, 5.0)
    f = Eventually(Interval(5, 6), Pred(BallReach((0, 0), 0.5)))
    assert not eval_boolean(f, Signal(t, states))


def test_robustness_of_predicates_and_conjunction():
    s = Signal([0.0], [[9.0, 3.1, 0.0]])
    mu = Pred(BALL)
    assert eval_robustness(mu, s) == pytest.approx(0.1)
    assert eval_robustness(Not(mu), s) == pytest.approx(-0.1)
    h1 = Pred(Halfspace((1, 0), 9.3))   # 0.3
    h2 = Pred(Halfspace((1, 0), 9.1))   # 0.1
    assert eval_robustness(And(h1, h2), s) == pytest.approx(0.1)


def test_signal_too_short():
    s = _line_signal(T=5.0)
    with pytest.raises(SignalTooShort):
        eval_boolean(Eventually(Interval(0, 10), Pred(BALL)), s)


def test_signal_validation():
    with pytest.raises(ValueError):
        Signal([0.0, 0.0], [[0, 0, 0], [1, 1, 1]])
    with pytest.raises(ValueError):
        Signal([], [])


def _random_signal(rng, n=41, dt=0.25):
    t = np.arange(n) * dt
    steps = rng.normal(0, 0.6, (n, 2)).cumsum(axis=0) + rng.uniform(-3, 3, 2)
    return Signal(t, np.column_stack([steps, np.zeros(n)]))


@given(formula, st.integers(0, 2**32 - 1))
def test_soundness(f, seed):
    s = _random_signal(np.random.default_rng(seed))
    rho = eval_robustness(f, s)
    ok = eval_boolean(f, s)
    if rho > 0:
        assert ok
    if ok:
        assert rho >= 0


@given(st.integers(0, 2**32 - 1), st.sampled_from(["F", "G"]))
def test_temporal_robustness_equals_brute_force(seed, op):
    rng = np.random.default_rng(seed)
    s = _random_signal(rng)
    a = rng.integers(0, 12) * 0.25
    b = a + rng.integers(0, 12) * 0.25
    p = BallReach(tuple(rng.uniform(-3, 3, 2)), 1.0)
    f = (Eventually if op == "F" else Always)(Interval(a, b), Pred(p))
    t0 = rng.integers(0, 8) * 0.25
    hs = [eval_predicate(p, x) for ti, x in zip(s.times, s.states)
          if t0 + a - 1e-9 <= ti <= t0 + b + 1e-9]
    expect = max(hs) if op == "F" else min(hs)
    assert eval_robustness(f, s, t0) == expect


@given(st.integers(0, 2**32 - 1))
def test_until_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    s = _random_signal(rng)
    a = rng.integers(0, 8) * 0.25
    b = a + rng.integers(0, 8) * 0.25
    p1 = BallReach(tuple(rng.uniform(-3, 3, 2)), 3.0)
    p2 = BallReach(tuple(rng.uniform(-3, 3, 2)), 1.0)
    f = Until(Interval(a, b), Pred(p1), Pred(p2))
    h1 = np.array([eval_predicate(p1, x) for x in s.states])
    h2 = np.array([eval_predicate(p2, x) for x in s.states])
    best, holds = -math.inf, False
    for j, tj in enumerate(s.times):
        if a - 1e-9 <= tj <= b + 1e-9:
            best = max(best, min(h2[j], h1[:j + 1].min()))
            holds |= bool(h2[j] >= 0 and (h1[:j + 1] >= 0).all())
    assert eval_robustness(f, s) == best
    assert eval_boolean(f, s) == holds


def test_monitor_is_pure():
    s = _line_signal()
    f = Eventually(Interval(0, 10), Pred(BALL))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert eval_robustness(f, s) == eval_robustness(f, s)
