import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charpart.errors import DomainError
from charpart.rootfind import bisect, newton_bisect_vec, safeguarded_newton


def test_bisect_finds_sqrt2():
    r = bisect(lambda x: x * x - 2.0, 0.0, 2.0)
    assert r == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_newton_cube_root():
    r = safeguarded_newton(lambda u: u**3 - 0.5, lambda u: 3 * u * u, 0.0, 1.0)
    assert r == pytest.approx(0.5 ** (1 / 3), rel=1e-14)


def test_newton_requires_bracket():
    with pytest.raises(DomainError):
        safeguarded_newton(lambda u: u * u + 1.0, lambda u: 2 * u, -1.0, 1.0)


def test_newton_survives_flat_derivative():
    # derivative vanishes at the start point; bisection must take over
    r = safeguarded_newton(lambda u: u**3 - 0.001, lambda u: 3 * u * u, -1.0, 1.0, x0=0.0)
    assert r == pytest.approx(0.1, rel=1e-12)


@given(st.lists(st.floats(-8.0, 8.0), min_size=1, max_size=20))
def test_vectorized_inverse_of_cube(targets):
    t = np.asarray(targets)
    u = newton_bisect_vec(lambda v, m: v**3 - t[m], lambda v, m: 3 * v * v, np.full(t.shape, -3.0), np.full(t.shape, 3.0))
    np.testing.assert_allclose(u, np.cbrt(t), rtol=1e-13, atol=1e-13)


def test_newton_returns_when_correction_underflows():
    # merge balance taken from a run where bisection used to wander off a converged root
    from charpart.flux import QUARTIC as q

    xs = [0.2960336923517325, 0.35663975295779304, 0.36304455375593664]
    u1, u4 = 0.9945582265174128, 0.4474196584071846
    target = (xs[1] - xs[0]) * u1 + (xs[2] - xs[1]) * q.average(0.7543611946802447, u4)
    wl, wr = xs[1] - xs[0], xs[2] - xs[1]

    def f(u):
        return wl * q.average(u1, u) + wr * q.average(u, u4) - target

    def d(u):
        return wl * q.average_derivative(u1, u) + wr * q.average_derivative(u4, u)

    root = safeguarded_newton(f, d, u4, u1, x0=0.5 * (u1 + 0.7543611946802447))
    assert abs(f(root)) <= 1e-17


def test_newton_returns_best_point_seen():
    # a derivative that is off by a factor makes Newton crawl; the answer is still the best evaluation
    root = safeguarded_newton(lambda x: x**3 - 2.0, lambda x: 30.0 * x * x, 0.0, 2.0, maxiter=5)
    assert abs(root**3 - 2.0) <= 0.05
