"""Independent reference solutions for validation.

``fv_solve`` is a conservative finite-volume scheme on a uniform grid
(Godunov or local Lax-Friedrichs fluxes, forward Euler; an experimental
second-order MUSCL/Heun variant is available). ``exact_riemann`` evaluates
the similarity solution of a Riemann problem for a flux that is convex or
concave between the two states.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .diagnostics import GridFunction
from .errors import CFLViolationError, ConfigurationError, ConvexityError
from .flux import ValueInterval, inflection_points_in
from .rootfind import newton_bisect_vec

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


class NumericalFlux(enum.Enum):
    GODUNOV = "godunov"
    LOCAL_LAX_FRIEDRICHS = "llf"


@dataclass
class FvConfig:
    cells: int
    domain: ValueInterval
    cfl: float = 0.45
    numerical_flux: NumericalFlux = NumericalFlux.GODUNOV
    second_order: bool = False
    dt: float = None  # fixed step; None picks it from the CFL number

    def __post_init__(self):
        if isinstance(self.numerical_flux, str):
            self.numerical_flux = NumericalFlux(self.numerical_flux)
        if self.cells < 10:
            raise ConfigurationError(f"need at least 10 cells, got {self.cells}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")


def project(ic, edges):
    """Cell averages of the initial data, splitting cells at its jumps."""
    pts = np.asarray(sorted(ic.breakpoints), dtype=float)
    out = np.empty(len(edges) - 1)
    a, b = edges[:-1], edges[1:]

    def gl(lo, hi):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        xs = mid[:, None] + half[:, None] * _GL_X
        return (np.asarray(ic(xs)) * _GL_W).sum(axis=1) * half

    out = gl(a, b)
    for p in pts:
        k = np.flatnonzero((a < p) & (p < b))
        if len(k):
            out[k] = gl(a[k], np.full(len(k), p)) + gl(np.full(len(k), p), b[k])
    return out / (b - a)


def _extreme_candidates(flux, lo, hi, points):
    """f evaluated at the given interior points where they fall inside [lo, hi]."""
    cands = []
    for c in points:
        inside = (lo < c) & (c < hi)
        cands.append(np.where(inside, flux.f(np.full_like(lo, c)), np.nan))
    return cands


def godunov_flux(flux, ul, ur):
    """Exact Godunov flux: min of f over [ul, ur] if ul <= ur, else max over [ur, ul]."""
    fl, fr = flux.f(ul), flux.f(ur)
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    fmin = np.minimum(fl, fr)
    fmax = np.maximum(fl, fr)
    for c in _extreme_candidates(flux, lo, hi, flux.critical_points):
        fmin = np.fmin(fmin, c)
        fmax = np.fmax(fmax, c)
    return np.where(ul <= ur, fmin, fmax)


def extremum_godunov_flux(flux, ul, ur, crit, shape):
    """Godunov flux for f convex (``shape > 0``) or concave (``shape < 0``) with its extremum at ``crit``."""
    if shape > 0:
        return np.maximum(flux.f(np.maximum(ul, crit)), flux.f(np.minimum(ur, crit)))
    return np.minimum(flux.f(np.minimum(ul, crit)), flux.f(np.maximum(ur, crit)))


def _max_speed(flux, lo, hi):
    s = np.maximum(np.abs(flux.df(lo)), np.abs(flux.df(hi)))
    for p in flux.inflection_points:
        inside = (lo < p) & (p < hi)
        s = np.where(inside, np.maximum(s, abs(float(flux.df(p)))), s)
    return s


def llf_flux(flux, ul, ur):
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    alpha = _max_speed(flux, lo, hi)
    return 0.5 * (flux.f(ul) + flux.f(ur)) - 0.5 * alpha * (ur - ul)


def _monotone_direction(flux, lo, hi):
    """+1/-1 if f is monotone on [lo, hi] (Godunov reduces to upwinding), else 0."""
    if any(lo < c < hi for c in flux.critical_points):
        return 0
    us = np.linspace(lo, hi, 65)
    s = np.asarray(flux.df(us), dtype=float)
    if np.all(s >= 0):
        return 1
    if np.all(s <= 0):
        return -1
    return 0


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def fv_solve(ic, flux, cfg, t_end):
    """Advance cell averages of ``ic`` to ``t_end``; returns a cell GridFunction."""
    return fv_solve_series(ic, flux, cfg, [t_end])[0]


def fv_solve_series(ic, flux, cfg, times):
    """Like ``fv_solve`` but one integration yields a GridFunction per output time."""
    times = [float(t) for t in times]
    if any(t < 0 for t in times) or times != sorted(times):
        raise ValueError("output times must be sorted and non-negative")
    lo, hi = cfg.domain.lo, cfg.domain.hi
    n = cfg.cells
    edges = np.linspace(lo, hi, n + 1)
    dx = (hi - lo) / n
    centers = 0.5 * (edges[1:] + edges[:-1])
    u = project(ic, edges)
    flux.check_range(u)
    umin, umax = float(u.min()), float(u.max())
    # values stay in the initial range, so the speed bound is global
    smax = float(_max_speed(flux, np.array([umin]), np.array([umax]))[0])
    direction = _monotone_direction(flux, umin, umax) if umax > umin else 1

    # convex or concave on the data range: closed-form Godunov flux around the extremum
    shape, crit = 0, None
    if direction == 0 and not any(umin < p < umax for p in flux.inflection_points):
        inside = [c for c in flux.critical_points if umin < c < umax]
        if len(inside) == 1:
            shape, crit = flux.orientation(umin, umax), inside[0]

    def numerical(ul, ur):
        if cfg.numerical_flux is NumericalFlux.LOCAL_LAX_FRIEDRICHS:
            return llf_flux(flux, ul, ur)
        if direction > 0:
            return flux.f(ul)
        if direction < 0:
            return flux.f(ur)
        if shape:
            return extremum_godunov_flux(flux, ul, ur, crit, shape)
        return godunov_flux(flux, ul, ur)

    def rhs(v):
        g = np.concatenate(([v[0], v[0]], v, [v[-1], v[-1]]))  # outflow ghosts
        if cfg.second_order:
            slope = _minmod(g[1:-1] - g[:-2], g[2:] - g[1:-1])
            left = g[1:-1] + 0.5 * slope  # right face of each cell
            right = g[1:-1] - 0.5 * slope  # left face of each cell
            ul, ur = left[:-1], right[1:]
        else:
            ul, ur = g[1:-2], g[2:-1]
        F = numerical(ul, ur)
        return -(F[1:] - F[:-1]) / dx

    t = 0.0
    out = []
    dt_max = cfg.cfl * dx / smax if smax > 0 else np.inf
    if cfg.dt is not None:
        dt_max = cfg.dt
        if smax * dt_max / dx > 1.0 + 1e-12:
            raise CFLViolationError(f"time step {dt_max} gives CFL number {smax * dt_max / dx:.3f} > 1")
    for t_out in times:
        while t < t_out and smax > 0:
            dt = min(dt_max, t_out - t)
            if cfg.second_order:
                u1 = u + dt * rhs(u)
                u = 0.5 * (u + u1 + dt * rhs(u1))
            else:
                u = u + dt * rhs(u)
            t = t_out if dt == t_out - t else t + dt
        out.append(GridFunction(centers, u.copy(), "cell"))
    return out


def exact_riemann(flux, u_l, u_r, x_over_t):
    """Entropy solution of the Riemann problem at similarity coordinate x/t."""
    lo, hi = min(u_l, u_r), max(u_l, u_r)
    if inflection_points_in(flux, ValueInterval(lo, hi)):
        raise ConvexityError("Riemann states straddle an inflection point; use fv_solve")
    xi = np.asarray(x_over_t, dtype=float)
    sl, sr = float(flux.df(u_l)), float(flux.df(u_r))
    if u_l == u_r:
        out = np.full(xi.shape, float(u_l))
    elif sl > sr:
        s = (float(flux.f(u_l)) - float(flux.f(u_r))) / (u_l - u_r)
        out = np.where(xi < s, float(u_l), float(u_r))
    else:
        inner = (xi > sl) & (xi < sr)
        out = np.where(xi <= sl, float(u_l), float(u_r)).astype(float)
        if inner.any():
            target = xi[inner]
            sgn = 1.0 if flux.df(hi) > flux.df(lo) else -1.0
            fan = newton_bisect_vec(
                lambda v, m: sgn * (flux.df(v) - target[m]),
                lambda v, m: sgn * flux.ddf(v),
                np.full(target.shape, lo),
                np.full(target.shape, hi),
            )
            out = out.copy()
            out[inner] = fan
    return float(out) if np.ndim(x_over_t) == 0 else out
