import math

import numpy as np
import pytest

from stlplan.qp import Dynamics
from stlplan.world import (CORRIDOR, CROWDED, STANDARD, Obstacle, Rhodonea, Static, World,
                           Zone, integrate_step, obstacle_state, vmax_at, wrap_angle)

IDENT = Dynamics("identity")


def _world():
    return World(zones=[Zone(CORRIDOR, rect=(10, 0, 20, 4)),
                        Zone(CROWDED, circle=(30, 30, 2))],
                 obstacles=[Obstacle("o", 0.3, Static((0.0, 10.0)))])


def test_vmax_examples():
    w = _world()
    assert vmax_at((5.0, 0.0), w) == (1.5, STANDARD)
    assert vmax_at((0.0, 8.7), w) == (1.05, CROWDED)    # 1.0 m from the surface
    assert vmax_at((15.0, 2.0), w) == (3.0, CORRIDOR)
    assert vmax_at((30.5, 30.0), w) == (1.05, CROWDED)


def test_crowded_beats_corridor():
    w = World(zones=[Zone(CORRIDOR, rect=(0, 0, 10, 10))],
              obstacles=[Obstacle("o", 0.3, Static((5.0, 5.0)))])
    assert vmax_at((5.0, 6.5), w)[1] == CROWDED
    assert vmax_at((5.0, 8.0), w)[1] == CORRIDOR


def test_zone_override_and_validation():
    w = World(zones=[Zone(CROWDED, rect=(0, 0, 1, 1), v_max=1.0)])
    assert vmax_at((0.5, 0.5), w) == (1.0, CROWDED)
    with pytest.raises(ValueError):
        Zone("Lobby", rect=(0, 0, 1, 1))
    with pytest.raises(ValueError):
        Zone(CORRIDOR, rect=(0, 0, 0, 1))
    with pytest.raises(ValueError):
        vmax_at((math.nan, 0.0), w)


def test_vmax_follows_moving_obstacle():
    w = World(obstacles=[Obstacle("o", 0.3, Rhodonea((0.0, 0.0), 3.0, 1.0, math.pi / 4))])
    assert vmax_at((3.0, 0.0), w, 0.0)[1] == CROWDED
    assert vmax_at((3.0, 0.0), w, 2.0)[1] == STANDARD   # obstacle back at the center


def test_obstacle_state_examples():
    o = Obstacle("s", 0.3, Static((1.0, 2.0)))
    p, v = obstacle_state(o, 3.0)
    assert p.tolist() == [1.0, 2.0] and v.tolist() == [0.0, 0.0]
    o = Obstacle("r", 0.3, Rhodonea((1.0, 2.0), 0.0, 2.0, 0.5))
    p, v = obstacle_state(o, 3.0)
    assert p.tolist() == [1.0, 2.0] and v.tolist() == [0.0, 0.0]
    o = Obstacle("r", 0.3, Rhodonea((1.0, 2.0), 1.5, 2.0, 0.5))
    p, v = obstacle_state(o, 0.0)
    np.testing.assert_allclose(p, [2.5, 2.0])
    np.testing.assert_allclose(v, [0.0, 1.5 * 0.5], atol=1e-15)


def test_rhodonea_velocity_matches_finite_differences(rng):
    for _ in range(100):
        o = Obstacle("r", 0.3, Rhodonea(tuple(rng.uniform(-5, 5, 2)), rng.uniform(0, 3),
                                        rng.uniform(0.5, 5), rng.uniform(0.05, 1.5),
                                        rng.uniform(0, 2 * math.pi)))
        t = rng.uniform(0, 60)
        h = 1e-5
        fd = (obstacle_state(o, t + h)[0] - obstacle_state(o, t - h)[0]) / (2 * h)
        np.testing.assert_allclose(obstacle_state(o, t)[1], fd, atol=1e-6)


def test_obstacle_defaults_and_validation():
    assert Obstacle("o", 0.3, Static((0, 0))).d_safe == pytest.approx(0.55)
    with pytest.raises(ValueError):
        Obstacle("o", 0.0, Static((0, 0)))
    with pytest.raises(ValueError):
        Obstacle("o", 0.3, Static((0, 0)), safe_distance=0.2)
    with pytest.raises(ValueError):
        World(obstacles=[Obstacle("o", 0.3, Static((0, 0)))] * 2)
    with pytest.raises(KeyError):
        World().obstacle_state("ghost", 0.0)


def test_integrate_step():
    x = np.array([1.0, 2.0, 0.5])
    np.testing.assert_array_equal(integrate_step(x, np.zeros(3), IDENT, 0.01), x)
    np.testing.assert_allclose(integrate_step(x, [1, 0, 0], IDENT, 0.01), [1.01, 2.0, 0.5])
    d1 = integrate_step(x, [0.3, -0.2, 0], IDENT, 0.02) - x
    d2 = integrate_step(x, [0.3, -0.2, 0], IDENT, 0.01) - x
    np.testing.assert_allclose(d2, d1 / 2)
    with pytest.raises(ValueError):
        integrate_step(x, np.zeros(3), IDENT, 0.0)


def test_heading_wraps():
    x = np.array([0.0, 0.0, math.pi - 0.001])
    xn = integrate_step(x, [0, 0, 1.0], IDENT, 0.01)
    assert -math.pi < xn[2] <= math.pi
    assert xn[2] == pytest.approx(-math.pi + 0.009)
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
