"""Conservative interpolation between neighboring particles.

Between (x1, u1) and (x2, u2) the solution is the curve

    x(u) = x1 + (f'(u) - f'(u1)) / (f'(u2) - f'(u1)) * (x2 - x1),

i.e. every intermediate value travels on its own characteristic. Area,
total variation and Kruzkov entropy of the particle solution are all
evaluated through this curve, mostly in the u variable where everything
reduces to nonlinear averages.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvexityError, DomainError
from .flux import FluxModel, ValueInterval, inflection_points_in
from .rootfind import newton_bisect_vec
from .state import Particle


@dataclass(frozen=True)
class Segment:
    left: Particle
    right: Particle
    flux: FluxModel

    def __post_init__(self):
        if self.left.x > self.right.x:
            raise DomainError(f"segment endpoints out of order: {self.left.x} > {self.right.x}")
        lo, hi = sorted((self.left.u, self.right.u))
        if inflection_points_in(self.flux, ValueInterval(lo, hi)):
            raise ConvexityError(f"segment values [{lo}, {hi}] straddle an inflection point")

    @classmethod
    def of(cls, fld, i):
        return cls(fld[i], fld[i + 1], fld.flux)


def _x_of_u(flux, x1, u1, x2, u2, u):
    d1 = flux.df(u1)
    d2 = flux.df(u2)
    den = d2 - d1
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(den != 0, (flux.df(u) - d1) / den, (u - u1) / (u2 - u1))
    return x1 + theta * (x2 - x1)


def x_of_u(seg, u):
    """Position on the interpolant where it takes the value ``u``."""
    (x1, u1), (x2, u2) = (seg.left.x, seg.left.u), (seg.right.x, seg.right.u)
    if u1 == u2:
        raise DomainError("constant segment: x(u) is not a function")
    lo, hi = min(u1, u2), max(u1, u2)
    ua = np.asarray(u, dtype=float)
    if np.any(ua < lo) or np.any(ua > hi):
        raise DomainError(f"value outside segment range [{lo}, {hi}]")
    out = _x_of_u(seg.flux, x1, u1, x2, u2, ua)
    # pin the endpoints against rounding in theta
    out = np.where(ua == u1, x1, np.where(ua == u2, x2, out))
    return float(out) if np.ndim(u) == 0 else out


def invert(flux, x1, u1, x2, u2, x):
    """Vectorized inverse of the interpolant: u(x) on segments given elementwise.

    Constant segments return their value; zero-length segments return the
    left value. Solves f'(u) = f'(u1) + theta (f'(u2) - f'(u1)) by Newton
    with a bisection safeguard on [min(u1,u2), max(u1,u2)].
    """
    x1, u1, x2, u2, x = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (x1, u1, x2, u2, x)))
    width = x2 - x1
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.clip(np.where(width > 0, (x - x1) / width, 0.0), 0.0, 1.0)
    d1 = flux.df(u1)
    d2 = flux.df(u2)
    den = d2 - d1
    out = np.where(theta == 0.0, u1, np.where(theta == 1.0, u2, u1))
    linear = (den == 0) & (u1 != u2)
    out = np.where(linear, u1 + theta * (u2 - u1), out)
    solve = (u1 != u2) & (den != 0) & (theta > 0) & (theta < 1)
    if solve.any():
        target = (d1 + theta * den)[solve]
        lo = np.minimum(u1, u2)[solve]
        hi = np.maximum(u1, u2)[solve]
        sgn = np.sign(flux.df(hi) - flux.df(lo))
        # start from the straight-line guess
        guess = (u1 + theta * (u2 - u1))[solve]

        def fun(v, m):
            return sgn[m] * (flux.df(v) - target[m])

        def dfun(v, m):
            return sgn[m] * flux.ddf(v)

        out = out.copy()
        out[solve] = newton_bisect_vec(fun, dfun, lo, hi, x0=guess)
    return out


def u_of_x(seg, x):
    """Value of the interpolant at position ``x`` in the segment."""
    (x1, u1), (x2, u2) = (seg.left.x, seg.left.u), (seg.right.x, seg.right.u)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < x1) or np.any(xa > x2):
        raise DomainError(f"position outside segment [{x1}, {x2}]")
    if u1 == u2:
        out = np.full(xa.shape, u1)
    elif x1 == x2:
        raise DomainError("zero-length segment: u(x) is multivalued")
    else:
        out = invert(seg.flux, x1, u1, x2, u2, xa)
    return float(out) if np.ndim(x) == 0 else out


def segment_area(seg):
    return (seg.right.x - seg.left.x) * seg.flux.average(seg.left.u, seg.right.u)


def segment_areas(fld):
    return np.diff(fld.x) * fld.flux.average(fld.u[:-1], fld.u[1:])


def total_area(fld):
    """Area under the interpolant between the first and last particle."""
    if len(fld) < 2:
        return 0.0
    return float(np.sum(segment_areas(fld)))


def total_variation(fld):
    return float(np.sum(np.abs(np.diff(fld.u))))


def _entropy_density(flux, u1, u2, k):
    """Mean of |u - k| over segments, weighted by the interpolant (vectorized)."""
    lo = np.minimum(u1, u2)
    hi = np.maximum(u1, u2)
    a = flux.average(lo, hi)
    out = np.where(k <= lo, a - k, k - a)
    inner = (lo < k) & (k < hi)
    if inner.any():
        l, h = lo[inner], hi[inner]
        dl, dk, dh = flux.df(l), flux.df(k), flux.df(h)
        den = dh - dl
        with np.errstate(divide="ignore", invalid="ignore"):
            pl = (dk - dl) / den
            ph = (dh - dk) / den
            val = pl * (k - flux.average(l, np.full_like(l, k))) + ph * (flux.average(np.full_like(h, k), h) - k)
        # linear flux: weight is uniform in u
        flat = den == 0
        val = np.where(flat, ((k - l) ** 2 + (h - k) ** 2) / (2 * (h - l)), val)
        out = out.copy()
        out[inner] = val
    return np.where(u1 == u2, np.abs(u1 - k), out)


def kruzkov_entropy(fld, k):
    """Integral of |u(x) - k| over the field support."""
    if len(fld) < 2:
        return 0.0
    k = float(k)
    dens = _entropy_density(fld.flux, fld.u[:-1], fld.u[1:], k)
    return float(np.sum(np.diff(fld.x) * dens))


def sample_curve(fld, points_per_segment=16):
    """Polyline (xs, us) tracing the interpolant through every segment.

    Values are sampled uniformly in u per segment and mapped through x(u);
    constant segments contribute their two endpoints and coincident
    particles give a vertical piece.
    """
    if points_per_segment < 2:
        raise ValueError("points_per_segment must be at least 2")
    if len(fld) == 0:
        return np.empty(0), np.empty(0)
    xs, us = [fld.x[:1]], [fld.u[:1]]
    s = np.linspace(0.0, 1.0, points_per_segment)[1:]
    for i in range(len(fld) - 1):
        x1, u1, x2, u2 = fld.x[i], fld.u[i], fld.x[i + 1], fld.u[i + 1]
        if u1 == u2:
            xs.append(np.array([x2]))
            us.append(np.array([u2]))
            continue
        uu = u1 + s * (u2 - u1)
        uu[-1] = u2
        xx = _x_of_u(fld.flux, x1, u1, x2, u2, uu)
        xx[-1] = x2
        xs.append(np.clip(xx, min(x1, x2), max(x1, x2)))
        us.append(uu)
    return np.concatenate(xs), np.concatenate(us)


class PiecewiseSolution:
    """An evaluable solution made of interpolant pieces.

    Piece ``j`` spans ``[xa[j], xb[j]]`` and interpolates from ``ua[j]`` to
    ``ub[j]`` (constant when they agree). Neighboring pieces share
    endpoints; a value mismatch there is a jump discontinuity.
    """

    def __init__(self, xa, ua, xb, ub, flux):
        self.xa = np.asarray(xa, dtype=float)
        self.ua = np.asarray(ua, dtype=float)
        self.xb = np.asarray(xb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)
        self.flux = flux
        areas = (self.xb - self.xa) * flux.average(self.ua, self.ub)
        self._cum = np.concatenate(([0.0], np.cumsum(areas)))

    @classmethod
    def from_field(cls, fld):
        return cls(fld.x[:-1], fld.u[:-1], fld.x[1:], fld.u[1:], fld.flux)

    @property
    def support(self):
        return float(self.xa[0]), float(self.xb[-1])

    def breakpoints(self):
        return np.unique(np.concatenate((self.xa, self.xb)))

    def jumps(self):
        """Positions where consecutive pieces disagree."""
        mis = self.ub[:-1] != self.ua[1:]
        return self.xb[:-1][mis]

    def _locate(self, x):
        j = np.searchsorted(self.xb, x, side="left")
        return np.clip(j, 0, len(self.xb) - 1)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        j = self._locate(x)
        u = invert(self.flux, self.xa[j], self.ua[j], self.xb[j], self.ub[j], x)
        lo, hi = self.support
        return np.where((x < lo) | (x > hi), np.nan, u)

    def cumulative_area(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        xc = np.clip(x, lo, hi)
        j = self._locate(xc)
        u = invert(self.flux, self.xa[j], self.ua[j], self.xb[j], self.ub[j], xc)
        part = (xc - self.xa[j]) * self.flux.average(self.ua[j], u)
        return self._cum[j] + part

    def area(self):
        return float(self._cum[-1])
