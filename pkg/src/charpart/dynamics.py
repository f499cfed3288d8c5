"""Characteristic motion and collision times."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OvershootError

SPEED_TOL = 1e-14
TIE_TOL = 1e-12
POSITION_TIE_ULPS = 64


@dataclass
class EventHorizon:
    dt_s: float
    colliding_pairs: list = field(default_factory=list)

    @property
    def finite(self):
        return math.isfinite(self.dt_s)


def _collision_times(x, s):
    """Per adjacent pair: time to collision, inf for parallel or deviating pairs."""
    gap = np.diff(x)
    ds = s[1:] - s[:-1]
    parallel = np.abs(ds) <= SPEED_TOL * np.maximum(1.0, np.maximum(np.abs(s[1:]), np.abs(s[:-1])))
    with np.errstate(divide="ignore", invalid="ignore"):
        dt = -gap / ds
    # pairs already touching and converging collide now
    dt = np.where((gap <= 0) & (ds < 0), 0.0, dt)
    bad = parallel | (ds > 0) | ~(dt >= 0)
    return np.where(bad, np.inf, dt)


def collision_time(p1, p2, flux):
    """Time until ``p1`` (left) and ``p2`` (right) meet, or None if they never do."""
    s = np.asarray(flux.df(np.array([p1.u, p2.u])), dtype=float)
    dt = _collision_times(np.array([p1.x, p2.x]), s)[0]
    return None if math.isinf(dt) else float(dt)


def next_event(fld):
    if len(fld) < 2:
        return EventHorizon(math.inf, [])
    dt = _collision_times(fld.x, fld.speeds)
    dt_s = float(dt.min())
    if math.isinf(dt_s):
        return EventHorizon(math.inf, [])
    tie = dt <= dt_s + TIE_TOL * max(1.0, dt_s)
    # converging pairs left only rounding apart at dt_s collide too (exact focusing)
    x, sp = fld.x, fld.speeds
    after = np.diff(x) + (sp[1:] - sp[:-1]) * dt_s
    reach = np.maximum(np.abs(x[:-1]), np.abs(x[1:])) + np.abs(sp[:-1]) * dt_s
    tie |= np.isfinite(dt) & (after <= POSITION_TIE_ULPS * np.spacing(reach))
    return EventHorizon(dt_s, [int(i) for i in np.flatnonzero(tie)])


def advance(fld, dt, horizon=None):
    """Move every particle along its characteristic for time ``dt``.

    If ``horizon`` is given and ``dt`` reaches its event time, the colliding
    pairs are snapped to a common position (their midpoint, or the mean of a
    chain) so that merges see exactly coincident particles.
    """
    if dt < 0:
        raise ValueError(f"negative time step {dt}")
    if horizon is None:
        horizon = next_event(fld)
    if dt > horizon.dt_s * (1 + 1e-12) + 1e-300:
        raise OvershootError(f"step {dt!r} exceeds next collision time {horizon.dt_s!r}")
    if dt == 0:
        at_event = horizon.dt_s == 0
    else:
        fld.x = fld.x + fld.speeds * dt
        fld.t += dt
        at_event = dt >= horizon.dt_s
    if at_event and horizon.colliding_pairs:
        _snap(fld, horizon.colliding_pairs)
    # rounding may leave neighbors infinitesimally out of order
    np.maximum.accumulate(fld.x, out=fld.x)
    return fld


def _snap(fld, pairs):
    pairs = sorted(pairs)
    groups = []
    for i in pairs:
        if groups and groups[-1][-1] == i:
            groups[-1].append(i + 1)
        else:
            groups.append([i, i + 1])
    for g in groups:
        fld.x[g] = fld.x[g].mean()
