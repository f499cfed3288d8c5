import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charpart.dynamics import advance, collision_time, next_event
from charpart.errors import OvershootError
from charpart.flux import BURGERS, QUARTIC
from charpart.state import Particle, ParticleField


def P(x, u):
    return Particle(x, u)


def test_collision_time_examples():
    assert collision_time(P(0, 1), P(1, 0), BURGERS) == 1.0
    assert collision_time(P(0, 0), P(1, 1), BURGERS) is None
    assert collision_time(P(0, 1), P(1, 0.5), QUARTIC) == pytest.approx(8 / 7, rel=1e-15)


def test_collision_time_parallel_and_coincident():
    assert collision_time(P(0, 1), P(1, 1), BURGERS) is None
    assert collision_time(P(1, 1), P(1, 0), BURGERS) == 0.0
    # coincident but separating: never collides
    assert collision_time(P(1, 0), P(1, 1), BURGERS) is None


def test_next_event_all_equal_values():
    h = next_event(ParticleField([0, 1, 2], [0.3, 0.3, 0.3], BURGERS, d_max=2))
    assert h.dt_s == np.inf and h.colliding_pairs == []


def test_next_event_ties():
    h = next_event(ParticleField([0, 1, 3, 4], [1, 0, 1, 0], BURGERS, d_max=2))
    assert h.dt_s == 1.0
    assert sorted(h.colliding_pairs) == [0, 2] or sorted(map(tuple, h.colliding_pairs)) == [(0, 1), (2, 3)]


def test_next_event_skips_deviating_pair():
    h = next_event(ParticleField([0, 1, 2], [2, 0, 1], BURGERS, d_max=2))
    assert h.dt_s == 0.5


def test_advance_moves_at_characteristic_speed():
    fld = ParticleField([0.0], [2.0], BURGERS)
    advance(fld, 0.5)
    assert fld.x[0] == 1.0 and fld.t == 0.5


def test_advance_zero_is_identity():
    fld = ParticleField([0, 1, 2], [2, 0, 1], BURGERS, d_max=2)
    before = fld.copy()
    advance(fld, 0.0)
    np.testing.assert_array_equal(fld.x, before.x)
    np.testing.assert_array_equal(fld.u, before.u)


def test_advance_to_event_makes_pair_coincide():
    fld = ParticleField([0, 1], [1, 0], QUARTIC, d_max=2)
    h = next_event(fld)
    assert h.dt_s == 1.0
    advance(fld, h.dt_s, h)
    assert fld.x[0] == fld.x[1] == 1.0


def test_overshoot_guard():
    fld = ParticleField([0, 1], [1, 0], BURGERS, d_max=2)
    with pytest.raises(OvershootError):
        advance(fld, 1.5)


@given(st.lists(st.floats(-2, 2), min_size=2, max_size=30), st.floats(0, 1))
def test_no_crossing_before_horizon(values, frac):
    n = len(values)
    fld = ParticleField(np.linspace(0, 1, n), values, BURGERS, d_max=1)
    h = next_event(fld)
    dt = frac * (h.dt_s if np.isfinite(h.dt_s) else 1.0)
    advance(fld, dt, h)
    assert np.all(np.diff(fld.x) >= 0)


def test_rounding_level_ties_join_the_event():
    # a linear drop focuses at one point; positions far from the origin carry rounding error
    xs = 156.9 + np.linspace(0.0, 0.1, 11)
    us = np.linspace(1.5, 0.0, 11)
    fld = ParticleField(xs, us, BURGERS)
    h = next_event(fld)
    assert sorted(h.colliding_pairs) == list(range(10))
    advance(fld, h.dt_s, h)
    assert np.all(fld.x == fld.x[0])


def test_distinct_collisions_are_not_tied():
    fld = ParticleField([0.0, 1.0, 2.0, 2.5], [1.0, 0.0, 1.0, 0.0], BURGERS)
    assert next_event(fld).colliding_pairs == [2]
