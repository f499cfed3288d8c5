"""Particle management: conservative insertion and merging.

Insertion places a new particle on the interpolant of an oversized
rarefaction gap; merging replaces a colliding pair by one particle whose
value keeps the area between the outer neighbors unchanged. Collisions
with an inflection particle use a five-particle merge that keeps the
inflection particle alive.
"""

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import POSITION_TIE_ULPS, SPEED_TOL
from .errors import (
    MergeInfeasibleError,
    UnresolvedMergeError,
    UnsupportedInteractionError,
)
from .interpolation import PiecewiseSolution, invert
from .rootfind import safeguarded_newton

log = logging.getLogger(__name__)


@dataclass
class ManagementConfig:
    d_max: float
    d_min: float = 0.0
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    entropy_fix_enabled: bool = True
    max_fix_insertions: int = 8
    # merges of non-coincident pairs that fail the TVD condition wait for coincidence
    defer_unsafe_merges: bool = True

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")

    @classmethod
    def for_field(cls, fld, **kw):
        return cls(d_max=fld.d_max, d_min=fld.d_min, **kw)


@dataclass
class MergeOutcome:
    x23: float
    u23: float
    removed: tuple
    tv_safe: bool
    entropy_safe: bool


class EventLog:
    """Append-only record of management events, exportable as JSON lines."""

    def __init__(self):
        self.records = []

    def append(self, kind, **data):
        rec = {"type": kind}
        rec.update(data)
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def counts(self):
        out = {}
        for r in self.records:
            out[r["type"]] = out.get(r["type"], 0) + 1
        return out

    def to_jsonl(self, fh):
        for r in self.records:
            fh.write(json.dumps(r, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


def _speed(flux, u):
    return float(flux.df(u))


def _colliding(flux, ul, ur):
    sl, sr = _speed(flux, ul), _speed(flux, ur)
    return sl - sr > SPEED_TOL * max(1.0, abs(sl), abs(sr))


def _deviating(flux, ul, ur):
    sl, sr = _speed(flux, ul), _speed(flux, ur)
    return sr - sl > SPEED_TOL * max(1.0, abs(sl), abs(sr))


# ---------------------------------------------------------------------------
# insertion


def _insert_on_interpolant(fld, i, events=None, reason="insert"):
    """Insert a particle at the middle of segment (i, i+1), on the interpolant.

    The position is then nudged (by rounding-level amounts) so that the two
    sub-segment areas add up to the original one in floating point.
    Returns the index of the new particle.
    """
    flux = fld.flux
    x2, u2, x3, u3 = float(fld.x[i]), float(fld.u[i]), float(fld.x[i + 1]), float(fld.u[i + 1])
    x23 = 0.5 * (x2 + x3)
    if u2 == u3:
        u23 = u2
    else:
        u23 = float(invert(flux, x2, u2, x3, u3, x23))
        a_l, a_r = flux.average(u2, u23), flux.average(u23, u3)
        if a_l != a_r:
            target = (x3 - x2) * flux.average(u2, u3)
            xc = (target - x3 * a_r + x2 * a_l) / (a_l - a_r)
            if x2 < xc < x3 and abs(xc - x23) <= 1e-9 * (x3 - x2):
                x23 = xc
    pid = fld.insert(i + 1, x23, u23, inflection=False, merged=False)
    if events is not None:
        events.append(reason, t=fld.t, index=i + 1, id=pid, x=x23, u=u23, between=[x2, x3], values=[u2, u3])
    return i + 1


def insert_between(fld, i, cfg=None, events=None):
    """Insert a particle into the gap between particles ``i`` and ``i+1``.

    The pair must not be colliding (inserting into a compressive gap is
    meaningless). Constant segments receive a particle with the same value.
    """
    if not 0 <= i < len(fld) - 1:
        raise IndexError(f"no segment at index {i}")
    if _colliding(fld.flux, float(fld.u[i]), float(fld.u[i + 1])):
        raise ValueError(f"pair ({i}, {i + 1}) is colliding; insertion requires a deviating pair")
    _insert_on_interpolant(fld, i, events)
    return fld


# ---------------------------------------------------------------------------
# two-particle merge


def tvd_safety_check(particles, flux):
    """Sufficient condition for the merged value to stay between u2 and u3.

    ``particles`` are four consecutive particles. The condition compares the
    pair's gap-to-jump ratio with the neighbors' spans, scaled by the sixth
    power of the curvature ratio of f over the four values.
    """
    p1, p2, p3, p4 = particles
    if p2.x == p3.x or p2.u == p3.u:
        return True
    us = np.array([p.u for p in particles])
    lo, hi = us.min(), us.max()
    grid = np.linspace(lo, hi, 257)
    grid = np.concatenate((grid, [p for p in flux.critical_points if lo < p < hi]))
    curv = np.abs(np.asarray(flux.ddf(grid), dtype=float))
    cmax = curv.max()
    if cmax == 0.0:
        return True
    ratio = curv.min() / cmax
    lhs = (p3.x - p2.x) / abs(p3.u - p2.u)
    span = abs(max(p3.u, p2.u) - min(p4.u, p1.u))
    if span == 0.0:
        return False
    rhs = ratio**6 / 16.0 * min(p4.x - p2.x, p3.x - p1.x) / span
    return bool(lhs <= rhs)


def entropy_check(u1, u23, u4, orientation):
    """Shock resolution condition for a merge.

    For a convex flux (``orientation > 0``) the merged value must lie
    between the outer neighbors as u1 >= u23 >= u4; for a concave flux the
    inequalities are reversed. A linear flux never needs the check.
    """
    if orientation > 0:
        return bool(u1 >= u23 >= u4)
    if orientation < 0:
        return bool(u1 <= u23 <= u4)
    return True


def _outer_bounds(u1, u2, u3, u23, u4, orientation):
    """Outer values for the entropy check.

    When a pair member is a local extremum and the merged value reproduces
    it, flank refinement can never satisfy the check, yet the merge creates
    no new extremum. The pair member then bounds that side.
    """
    tol = 1e-12 * max(1.0, abs(u2), abs(u3))
    s = 1.0 if orientation > 0 else -1.0
    b1, b4 = u1, u4
    if s * (u2 - u1) > 0 and s * (u23 - u2) >= -tol:
        b1 = u2 + s * tol
    if s * (u4 - u3) > 0 and s * (u3 - u23) >= -tol:
        b4 = u3 - s * tol
    return b1, b4


def _merge_window(fld, i):
    """Particles i-1 .. i+2 (outer ones may be missing at the field ends)."""
    left = i - 1 if i >= 1 else None
    right = i + 2 if i + 2 < len(fld) else None
    return left, right


def merge_value(fld, i, cfg=None):
    """Position and value replacing the colliding pair (i, i+1).

    The merged particle sits at the pair's midpoint and its value solves the
    area balance over the outer neighbors by safeguarded Newton iteration,
    started at the mean of the pair.
    """
    if cfg is None:
        cfg = ManagementConfig.for_field(fld)
    flux = fld.flux
    avg = flux.average
    left, right = _merge_window(fld, i)
    x2, u2, x3, u3 = float(fld.x[i]), float(fld.u[i]), float(fld.x[i + 1]), float(fld.u[i + 1])
    x23 = 0.5 * (x2 + x3)
    values = [u2, u3]
    target = (x3 - x2) * avg(u2, u3)
    wl = wr = 0.0
    if left is not None:
        x1, u1 = float(fld.x[left]), float(fld.u[left])
        target += (x2 - x1) * avg(u1, u2)
        wl = x23 - x1
        values.append(u1)
    if right is not None:
        x4, u4 = float(fld.x[right]), float(fld.u[right])
        target += (x4 - x3) * avg(u3, u4)
        wr = x4 - x23
        values.append(u4)

    if u2 == u3:
        u23 = u2
    elif wl <= 0.0 and wr <= 0.0:
        u23 = 0.5 * (u2 + u3)
    else:
        def residual(u):
            r = -target
            if wl > 0.0:
                r += wl * avg(u1, u)
            if wr > 0.0:
                r += wr * avg(u, u4)
            return r

        def slope(u):
            d = 0.0
            if wl > 0.0:
                d += wl * flux.average_derivative(u1, u)
            if wr > 0.0:
                d += wr * flux.average_derivative(u4, u)
            return d

        region = flux.convex_interval(0.5 * (u2 + u3))
        lo = max(min(values), region.lo)
        hi = min(max(values), region.hi)
        if residual(lo) > 0 or residual(hi) < 0:
            lo, hi = _widen(residual, lo, hi, region)
        u23 = safeguarded_newton(residual, slope, lo, hi, x0=0.5 * (u2 + u3), rtol=cfg.newton_tol, maxiter=cfg.newton_max_iter)

    tv_safe = True
    entropy_safe = True
    if left is not None and right is not None:
        quad = [fld[left], fld[i], fld[i + 1], fld[right]]
        tv_safe = tvd_safety_check(quad, flux)
        orient = flux.orientation(min(values), max(values))
        b1, b4 = _outer_bounds(u1, u2, u3, u23, u4, orient) if orient else (u1, u4)
        entropy_safe = entropy_check(b1, u23, b4, orient)
    return MergeOutcome(x23=x23, u23=float(u23), removed=(i, i + 1), tv_safe=tv_safe, entropy_safe=entropy_safe)


def _widen(residual, lo, hi, region):
    """Grow a failed bracket towards the ends of the convexity region."""
    for _ in range(60):
        if residual(lo) <= 0 <= residual(hi):
            return lo, hi
        width = max(hi - lo, 1e-12 * max(1.0, abs(lo), abs(hi)))
        if residual(lo) > 0:
            lo = max(lo - width, region.lo)
        if residual(hi) < 0:
            hi = min(hi + width, region.hi)
        if (lo == region.lo or not math.isfinite(lo)) and (hi == region.hi or not math.isfinite(hi)):
            break
    if residual(lo) <= 0 <= residual(hi):
        return lo, hi
    raise MergeInfeasibleError(f"merge value not bracketed on [{lo}, {hi}]")


def _apply_merge(fld, out, events, rounds):
    i = out.removed[0]
    old = (fld.ids[i], fld.ids[i + 1])
    pair_x = [float(fld.x[i]), float(fld.x[i + 1])]
    pair_u = [float(fld.u[i]), float(fld.u[i + 1])]
    fld.delete(i + 1)
    fld.x[i] = out.x23
    fld.u[i] = out.u23
    fld.inflection[i] = out.u23 in fld.flux.inflection_points
    fld.merged[i] = True
    fld.ids[i] = fld.new_id()
    if events is not None:
        events.append(
            "merge",
            t=fld.t,
            index=i,
            id=int(fld.ids[i]),
            replaced=[int(old[0]), int(old[1])],
            positions=pair_x,
            values=pair_u,
            x23=out.x23,
            u23=out.u23,
            tv_safe=out.tv_safe,
            entropy_safe=out.entropy_safe,
            fix_rounds=rounds,
        )


def _rounding_gap(a, b):
    return b - a <= POSITION_TIE_ULPS * np.spacing(max(abs(a), abs(b)))


def _snap_flanks(fld, i, events):
    """Move a neighbor lying only rounding error away from the pair onto it."""
    left, right = _merge_window(fld, i)
    for j, k in ((left, i), (right, i + 1)):
        if j is not None and fld.x[j] != fld.x[k] and _rounding_gap(*sorted((float(fld.x[j]), float(fld.x[k])))):
            if events is not None:
                events.append("snap", t=fld.t, index=int(j), shift=float(fld.x[k] - fld.x[j]))
            fld.x[j] = fld.x[k]


def merge_with_fix(fld, i, cfg=None, events=None):
    """Merge the colliding pair (i, i+1), refining the flanks if needed.

    When the merged value violates the entropy condition and the fix is
    enabled, one particle is inserted on each flanking segment and the merge
    is recomputed with the closer neighbors. Returns the index of the merged
    particle.
    """
    if cfg is None:
        cfg = ManagementConfig.for_field(fld)
    rounds = 0
    while True:
        _snap_flanks(fld, i, events)
        out = merge_value(fld, i, cfg)
        if out.entropy_safe or not cfg.entropy_fix_enabled:
            _apply_merge(fld, out, events, rounds)
            return out.removed[0]
        if rounds >= cfg.max_fix_insertions:
            raise UnresolvedMergeError(
                f"entropy fix gave up after {rounds} rounds at x={out.x23!r}, t={fld.t!r}",
                events=events,
            )
        left, right = _merge_window(fld, i)
        inserted = False
        if right is not None and not _rounding_gap(float(fld.x[i + 1]), float(fld.x[right])):
            _insert_on_interpolant(fld, i + 1, events, reason="fix_insert")
            inserted = True
        if left is not None and not _rounding_gap(float(fld.x[left]), float(fld.x[i])):
            _insert_on_interpolant(fld, left, events, reason="fix_insert")
            i += 1
            inserted = True
        if events is not None:
            events.append("fix_retry", t=fld.t, index=i, round=rounds + 1, u23=out.u23)
        if not inserted:
            raise UnresolvedMergeError(f"entropy fix cannot refine degenerate flanks at t={fld.t!r}", events=events)
        rounds += 1


# ---------------------------------------------------------------------------
# five-particle merge around an inflection particle


def _five_point(xs, us, flux):
    """Merge particles 2 and 3 (x2 = x3, particle 3 the inflection particle).

    Orientation is the one where the inflection particle is the slowest, so
    particle 2 has caught it from the left. Returns the step taken and the
    surviving particles as (label, x, u) tuples, labels 1-5 as in the input.
    """
    avg = flux.average
    x1, x2, x3, x4, x5 = xs
    u1, u2, u3, u4, u5 = us
    total = (x2 - x1) * avg(u1, u2) + (x3 - x2) * avg(u2, u3) + (x4 - x3) * avg(u3, u4) + (x5 - x4) * avg(u4, u5)
    slack = 1e-12 * max(1.0, abs(x1), abs(x5))

    a13 = avg(u1, u3)
    a34 = avg(u3, u4)
    a45 = avg(u4, u5)
    # step 1: drop particle 2, slide the inflection particle towards x4
    if a13 != a34:
        X = (total - (x5 - x4) * a45 - x4 * a34 + x1 * a13) / (a13 - a34)
        if x1 - slack <= X <= x4 + slack:
            X = min(max(X, x1), x4)
            return 1, [(1, x1, u1), (3, X, u3), (4, x4, u4), (5, x5, u5)]
    # step 2: drop particle 2, move 3 and 4 together towards x5
    if a13 != a45:
        X = (total - x5 * a45 + x1 * a13) / (a13 - a45)
        if x4 - slack <= X <= x5 + slack:
            X = min(max(X, x4), x5)
            return 2, [(1, x1, u1), (3, X, u3), (4, X, u4), (5, x5, u5)]
    # step 3: drop particle 4, park the inflection particle at x5, re-solve u2
    def residual(v):
        return (x2 - x1) * avg(u1, v) + (x5 - x2) * avg(v, u3) - total

    def slope(v):
        return (x2 - x1) * flux.average_derivative(u1, v) + (x5 - x2) * flux.average_derivative(u3, v)

    side = u2 if u2 != u3 else u1
    region = flux.convex_interval(0.5 * (side + u3))
    lo, hi = (u3, region.hi) if side > u3 else (region.lo, u3)
    if not math.isfinite(lo):
        lo = u3 - 2 * max(1.0, abs(u3 - min(us)))
    if not math.isfinite(hi):
        hi = u3 + 2 * max(1.0, abs(max(us) - u3))
    try:
        v = safeguarded_newton(residual, slope, lo, hi, x0=u2)
    except Exception as exc:
        raise MergeInfeasibleError(f"five-particle merge failed in all three steps: {exc}") from exc
    return 3, [(1, x1, u1), (2, x2, v), (3, x5, u3), (5, x5, u5)]


def inflection_merge(fld, i, cfg=None, events=None):
    """Resolve a collision of pair (i, i+1) involving one inflection particle.

    If the inflection particle is the right member it is the slower one and
    the five-particle rules apply directly; otherwise the window is mirrored
    (x -> -x with reversed order), which leaves all averages unchanged.
    Exactly one particle is removed. Returns the step number taken.
    """
    infl_l, infl_r = bool(fld.inflection[i]), bool(fld.inflection[i + 1])
    if infl_l and infl_r:
        raise UnsupportedInteractionError(f"collision of two inflection particles at x={fld.x[i]!r}")
    if not (infl_l or infl_r):
        raise ValueError("inflection_merge needs an inflection particle in the pair")
    if infl_r:
        window = [i - 1, i, i + 1, i + 2, i + 3]
        sign = 1.0
    else:
        window = [i + 2, i + 1, i, i - 1, i - 2]
        sign = -1.0
    if min(window) < 0 or max(window) >= len(fld):
        raise UnsupportedInteractionError(f"inflection-particle collision too close to the field boundary (index {i})")
    xs = [sign * float(fld.x[k]) for k in window]
    us = [float(fld.u[k]) for k in window]
    step, survivors = _five_point(xs, us, fld.flux)

    lo = min(window)
    old_ids = {lab: int(fld.ids[window[lab - 1]]) for lab in range(1, 6)}
    old_infl = {lab: bool(fld.inflection[window[lab - 1]]) for lab in range(1, 6)}
    old_merged = {lab: bool(fld.merged[window[lab - 1]]) for lab in range(1, 6)}
    rows = []
    for lab, x, u in survivors:
        keep_id = old_ids[lab] if u == us[lab - 1] else fld.new_id()
        rows.append((sign * x, u, old_infl[lab], old_merged[lab], keep_id))
    if sign < 0:
        rows.reverse()
    for _ in range(5):
        fld.delete(lo)
    for k, (x, u, fl, mg, pid) in enumerate(rows):
        fld.x = np.insert(fld.x, lo + k, x)
        fld.u = np.insert(fld.u, lo + k, u)
        fld.inflection = np.insert(fld.inflection, lo + k, fl)
        fld.merged = np.insert(fld.merged, lo + k, mg)
        fld.ids = np.insert(fld.ids, lo + k, pid)
    if events is not None:
        events.append(
            "inflection_merge",
            t=fld.t,
            index=i,
            step=step,
            mirrored=sign < 0,
            positions=[sign * x for x in xs],
            values=us,
        )
    return step


# ---------------------------------------------------------------------------
# full pass


@dataclass
class PassStats:
    insertions: int = 0
    merges: int = 0
    inflection_merges: int = 0
    deferred: int = 0
    order: list = field(default_factory=list)

    @property
    def changed(self):
        return bool(self.insertions or self.merges or self.inflection_merges)


def _insertion_candidates(fld, d_max):
    if len(fld) < 2:
        return np.empty(0, dtype=int)
    s = fld.speeds
    ds = s[1:] - s[:-1]
    tol = SPEED_TOL * np.maximum(1.0, np.maximum(np.abs(s[1:]), np.abs(s[:-1])))
    return np.flatnonzero((np.diff(fld.x) > d_max) & (ds > tol))


def _merge_candidates(fld, d_min):
    if len(fld) < 2:
        return np.empty(0, dtype=int)
    s = fld.speeds
    ds = s[:-1] - s[1:]
    tol = SPEED_TOL * np.maximum(1.0, np.maximum(np.abs(s[1:]), np.abs(s[:-1])))
    return np.flatnonzero((np.diff(fld.x) <= d_min) & (ds > tol))


def management_pass(fld, cfg=None, events=None):
    """Insert into oversized rarefaction gaps, then merge colliding pairs."""
    if cfg is None:
        cfg = ManagementConfig.for_field(fld)
    stats = PassStats()
    while True:
        cand = _insertion_candidates(fld, cfg.d_max)
        if len(cand) == 0:
            break
        for i in cand[::-1]:
            _insert_on_interpolant(fld, int(i), events)
            stats.insertions += 1
            stats.order.append("insert")

    deferred = set()
    while True:
        cand = [int(i) for i in _merge_candidates(fld, cfg.d_min) if (fld.ids[i], fld.ids[i + 1]) not in deferred]
        if not cand:
            break
        i = cand[0]
        if fld.inflection[i] or fld.inflection[i + 1]:
            inflection_merge(fld, i, cfg, events)
            stats.inflection_merges += 1
            stats.order.append("inflection_merge")
            continue
        if cfg.defer_unsafe_merges and fld.x[i + 1] > fld.x[i]:
            left, right = _merge_window(fld, i)
            if left is not None and right is not None:
                quad = [fld[left], fld[i], fld[i + 1], fld[right]]
                if not tvd_safety_check(quad, fld.flux):
                    deferred.add((fld.ids[i], fld.ids[i + 1]))
                    stats.deferred += 1
                    continue
        merge_with_fix(fld, i, cfg, events)
        stats.merges += 1
        stats.order.append("merge")
    return stats


# ---------------------------------------------------------------------------
# postprocessing


def postprocess_shocks(fld):
    """Replace merged particles by area-preserving jump discontinuities.

    Around each merged particle the two interpolant pieces to its neighbors
    are replaced by the neighbors' values held constant up to a jump, placed
    so that the area between the neighbors is unchanged. Clusters of
    adjacent merged particles are left as they are (with a warning).
    Returns a :class:`PiecewiseSolution`.
    """
    n = len(fld)
    xa, ua = list(fld.x[:-1]), list(fld.u[:-1])
    xb, ub = list(fld.x[1:]), list(fld.u[1:])
    if n < 3:
        return PiecewiseSolution(xa, ua, xb, ub, fld.flux)
    avg = fld.flux.average
    merged = np.flatnonzero(fld.merged & ~fld.inflection)
    merged = [int(i) for i in merged if 0 < i < n - 1]
    mset = set(merged)
    for i in merged:
        if i - 1 in mset or i + 1 in mset:
            warnings.warn(f"overlapping shock reconstruction regions at particle {i}; left unreconstructed", RuntimeWarning, stacklevel=2)
            continue
        xl, ul = float(fld.x[i - 1]), float(fld.u[i - 1])
        xm, um = float(fld.x[i]), float(fld.u[i])
        xr, ur = float(fld.x[i + 1]), float(fld.u[i + 1])
        if ul == ur:
            continue
        wedge = (xm - xl) * avg(ul, um) + (xr - xm) * avg(um, ur)
        xs = (wedge - xr * ur + xl * ul) / (ul - ur)
        if not xl <= xs <= xr:
            warnings.warn(f"shock position for particle {i} falls outside its neighbors; left unreconstructed", RuntimeWarning, stacklevel=2)
            continue
        # pieces i-1 and i become constant states meeting at the jump
        xa[i - 1], ua[i - 1], xb[i - 1], ub[i - 1] = xl, ul, xs, ul
        xa[i], ua[i], xb[i], ub[i] = xs, ur, xr, ur
    return PiecewiseSolution(xa, ua, xb, ub, fld.flux)
