"""Flux functions and the nonlinear average.

A :class:`FluxModel` bundles ``f``, ``f'`` and ``f''`` (all numpy
vectorized), the inflection points of ``f`` and an admissible value range.
The nonlinear average

    a(u1, u2) = [f'(u) u - f(u)]_{u1}^{u2} / [f'(u)]_{u1}^{u2}

is the f''-weighted mean of u over [u1, u2]; the area between two
characteristic particles is their distance times this average.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, ConvexityError, DomainError
from .rootfind import bisect

# Below this ratio |[f']| / max|f'| the boundary form loses too many digits.
_CANCELLATION_RATIO = 1e-3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_GL_S = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


class AverageForm(enum.Enum):
    CLOSED_FORM = "closed_form"
    QUADRATURE = "quadrature"


@dataclass(frozen=True)
class ValueInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ConfigurationError(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    def __contains__(self, u):
        return self.lo <= u <= self.hi

    @property
    def length(self):
        return self.hi - self.lo


REAL_LINE = ValueInterval(-math.inf, math.inf)


@dataclass(frozen=True)
class FluxModel:
    """Scalar flux f with derivatives and convexity structure.

    ``closed_average`` (optional) evaluates a(u1, u2) exactly; otherwise the
    boundary form is used, with Gauss-Legendre quadrature of the integral
    form when the boundary form would cancel. ``critical_points`` are the
    zeros of f' (needed by the Godunov flux).
    """

    name: str
    f: Callable
    df: Callable
    ddf: Callable
    inflection_points: tuple = ()
    admissible: ValueInterval = REAL_LINE
    closed_average: Optional[Callable] = None
    critical_points: tuple = ()
    quadratic: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def average_form(self):
        return AverageForm.CLOSED_FORM if self.closed_average is not None else AverageForm.QUADRATURE

    def check_range(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.admissible.lo, self.admissible.hi
        if np.any(u < lo) or np.any(u > hi) or np.any(np.isnan(u)):
            raise DomainError(f"value outside admissible range [{lo}, {hi}] of flux {self.name!r}")

    def G(self, u):
        """Antiderivative of u f''(u): u f'(u) - f(u)."""
        return u * self.df(u) - self.f(u)

    def average(self, u1, u2):
        """Nonlinear average without convexity checks (vectorized)."""
        scalar = np.ndim(u1) == 0 and np.ndim(u2) == 0
        u1, u2 = np.broadcast_arrays(np.asarray(u1, float), np.asarray(u2, float))
        # ordered arguments make the result exactly symmetric
        u1, u2 = np.minimum(u1, u2), np.maximum(u1, u2)
        if self.closed_average is not None:
            out = np.asarray(self.closed_average(u1, u2), dtype=float)
        else:
            out = self._boundary_average(u1, u2)
        out = np.where(u1 == u2, u1, out)
        return float(out) if scalar else out

    def _boundary_average(self, u1, u2):
        d1 = self.df(u1)
        d2 = self.df(u2)
        den = d2 - d1
        scale = np.maximum(np.maximum(np.abs(d1), np.abs(d2)), 1e-300)
        well = np.abs(den) > _CANCELLATION_RATIO * scale
        out = np.empty(u1.shape)
        if well.any():
            a1, a2 = u1[well], u2[well]
            out[well] = (self.G(a2) - self.G(a1)) / den[well]
        if (~well).any():
            out[~well] = self._gauss_average(u1[~well], u2[~well])
        return out

    def _gauss_average(self, u1, u2):
        du = u2 - u1
        uu = u1[..., None] + _GL_S * du[..., None]
        w = self.ddf(uu) * _GL_W
        mass = w.sum(axis=-1)
        first = (w * _GL_S).sum(axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(mass != 0.0, first / mass, 0.5)
        return u1 + du * frac

    def average_derivative(self, u_fixed, u):
        """Partial derivative of a(u_fixed, u) with respect to ``u``."""
        if u == u_fixed:
            return 0.5
        den = float(self.df(u) - self.df(u_fixed))
        scale = max(abs(float(self.df(u))), abs(float(self.df(u_fixed))), 1e-300)
        if abs(den) <= _CANCELLATION_RATIO * scale:
            h = 1e-7 * max(abs(u), abs(u - u_fixed), 1e-8)
            return (self.average(u_fixed, u + h) - self.average(u_fixed, u - h)) / (2 * h)
        return float(self.ddf(u)) * (u - self.average(u_fixed, u)) / den

    def convex_interval(self, u):
        """The maximal interval around ``u`` free of inflection points.

        If ``u`` is itself an inflection point the interval is degenerate on
        one side; callers pass a value strictly inside the region of interest.
        """
        lo, hi = self.admissible.lo, self.admissible.hi
        for p in self.inflection_points:
            if p <= u:
                lo = max(lo, p)
            if p >= u:
                hi = min(hi, p)
        return ValueInterval(lo, hi)

    def orientation(self, ulo, uhi):
        """+1 where f is convex on [ulo, uhi], -1 where concave, 0 if linear."""
        d = float(self.df(uhi) - self.df(ulo))
        if uhi < ulo:
            d = -d
        return int(np.sign(d))

    def negated(self):
        """The flux -f (same averages, reversed convexity)."""
        return FluxModel(
            name=f"-{self.name}",
            f=lambda u: -self.f(u),
            df=lambda u: -self.df(u),
            ddf=lambda u: -self.ddf(u),
            inflection_points=self.inflection_points,
            admissible=self.admissible,
            closed_average=self.closed_average,
            critical_points=self.critical_points,
            quadratic=self.quadratic,
        )

    def reflected(self):
        """Flux g(v) = f(-v), governing v(x, t) = -u(-x, t)."""
        lo, hi = self.admissible.lo, self.admissible.hi
        ca = self.closed_average
        return FluxModel(
            name=f"{self.name}(-u)",
            f=lambda v: self.f(-np.asarray(v)),
            df=lambda v: -self.df(-np.asarray(v)),
            ddf=lambda v: self.ddf(-np.asarray(v)),
            inflection_points=tuple(sorted(-p for p in self.inflection_points)),
            admissible=ValueInterval(-hi, -lo),
            closed_average=None if ca is None else (lambda a, b: -ca(-np.asarray(a), -np.asarray(b))),
            critical_points=tuple(sorted(-p for p in self.critical_points)),
            quadratic=self.quadratic,
        )


def eval_flux(model, u):
    model.check_range(u)
    out = model.f(np.asarray(u, dtype=float))
    return float(out) if np.ndim(u) == 0 else out


def inflection_points_in(model, interval):
    """Inflection points of ``model`` strictly inside ``interval``, ordered."""
    return [p for p in model.inflection_points if interval.lo < p < interval.hi]


def nonlinear_average(model, u1, u2, method="auto"):
    """a(u1, u2) for a flux that is convex or concave between the arguments.

    ``method`` selects the evaluation route: ``"auto"`` (closed form when
    available, else boundary form with a quadrature fallback near u1 = u2),
    ``"boundary"`` (always [f'u - f] / [f']) or ``"quadrature"`` (adaptive
    quadrature of the f''-weighted integral form; slow, meant for checks).
    """
    u1 = float(u1)
    u2 = float(u2)
    model.check_range([u1, u2])
    lo, hi = min(u1, u2), max(u1, u2)
    inside = inflection_points_in(model, ValueInterval(lo, hi))
    if inside:
        raise ConvexityError(f"[{lo}, {hi}] contains inflection point(s) {inside} of {model.name!r}")
    if u1 == u2:
        return u1
    if method == "auto":
        return model.average(u1, u2)
    if method == "boundary":
        d1, d2 = float(model.df(u1)), float(model.df(u2))
        if d1 == d2:
            return 0.5 * (u1 + u2)
        return float((model.G(u2) - model.G(u1)) / (d2 - d1))
    if method == "quadrature":
        return quadrature_average(model, u1, u2)
    raise ValueError(f"unknown method {method!r}")


def quadrature_average(model, u1, u2, epsabs=1e-14, epsrel=1e-13):
    """a(u1, u2) by adaptive Gauss-Kronrod quadrature of the integral form.

    The integrand is shifted by u1 so the ratio is computed as an offset,
    which keeps full relative accuracy for nearby arguments.
    """
    if u1 == u2:
        return u1
    ddf = lambda u: float(model.ddf(u))
    num, _ = integrate.quad(lambda u: ddf(u) * (u - u1), u1, u2, epsabs=epsabs * abs(u2 - u1) ** 2, epsrel=epsrel, limit=200)
    den, _ = integrate.quad(ddf, u1, u2, epsabs=epsabs * abs(u2 - u1), epsrel=epsrel, limit=200)
    if den == 0.0:
        return 0.5 * (u1 + u2)
    return u1 + num / den


# ---------------------------------------------------------------------------
# built-in models


def _burgers():
    return FluxModel(
        name="burgers",
        f=lambda u: 0.5 * np.asarray(u) ** 2,
        df=lambda u: np.asarray(u, dtype=float) * 1.0,
        ddf=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        closed_average=lambda a, b: 0.5 * (np.asarray(a) + np.asarray(b)),
        critical_points=(0.0,),
        quadratic=True,
    )


def _quartic_average(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    # 3/4 (b^4 - a^4) / (b^3 - a^3) with the common factor (b - a) removed
    den = a * a + a * b + b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.75 * (a + b) * (a * a + b * b) / den
    return np.where(den == 0.0, 0.5 * (a + b), out)


def _quartic():
    return FluxModel(
        name="quartic",
        # explicit products: numpy's pow is very slow for negative bases
        f=lambda u: 0.25 * np.square(np.square(np.asarray(u, dtype=float))),
        df=lambda u: np.asarray(u, dtype=float) * np.square(np.asarray(u, dtype=float)),
        ddf=lambda u: 3.0 * np.square(np.asarray(u, dtype=float)),
        closed_average=_quartic_average,
        critical_points=(0.0,),
    )


def _bl_f(u):
    u = np.asarray(u, dtype=float)
    return u * u / (u * u + 0.5 * (1.0 - u) ** 2)


def _bl_df(u):
    u = np.asarray(u, dtype=float)
    d = u * u + 0.5 * (1.0 - u) ** 2
    return u * (1.0 - u) / (d * d)


def _bl_ddf(u):
    u = np.asarray(u, dtype=float)
    d = u * u + 0.5 * (1.0 - u) ** 2
    return (3.0 * u**3 - 4.5 * u**2 + 0.5) / d**3


def _buckley_leverett():
    ustar = bisect(lambda u: float(_bl_ddf(u)), 0.0, 1.0)
    return FluxModel(
        name="buckley_leverett",
        f=_bl_f,
        df=_bl_df,
        ddf=_bl_ddf,
        inflection_points=(ustar,),
        admissible=ValueInterval(0.0, 1.0),
        critical_points=(0.0, 1.0),
    )


def linear_flux(speed=1.0):
    """Linear advection f(u) = c u; f'' vanishes identically."""
    c = float(speed)
    return FluxModel(
        name="linear",
        f=lambda u: c * np.asarray(u, dtype=float),
        df=lambda u: np.full_like(np.asarray(u, dtype=float), c),
        ddf=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        closed_average=lambda a, b: 0.5 * (np.asarray(a) + np.asarray(b)),
        quadratic=True,
        extra={"speed": c},
    )


BURGERS = _burgers()
QUARTIC = _quartic()
BUCKLEY_LEVERETT = _buckley_leverett()

_BUILTIN = {m.name: m for m in (BURGERS, QUARTIC, BUCKLEY_LEVERETT)}


def get_flux(name, **params):
    """Look up a built-in flux by name ("burgers", "quartic", "buckley_leverett", "linear")."""
    if name == "linear":
        return linear_flux(params.get("speed", 1.0))
    try:
        return _BUILTIN[name]
    except KeyError:
        raise ConfigurationError(f"unknown flux {name!r}; choose from {sorted(_BUILTIN) + ['linear']}") from None


def custom_flux(name, f, df, ddf, inflection_points=(), admissible=REAL_LINE, critical_points=(), check_range=None, samples=401):
    """Build and validate a user-supplied flux.

    Derivatives are checked against central differences, and the declared
    inflection points against the sign changes of ``ddf`` sampled on
    ``check_range`` (default: the admissible range, clipped to [-5, 5]).
    """
    if check_range is None:
        check_range = ValueInterval(max(admissible.lo, -5.0), min(admissible.hi, 5.0))
    model = FluxModel(
        name=name,
        f=f,
        df=df,
        ddf=ddf,
        inflection_points=tuple(sorted(float(p) for p in inflection_points)),
        admissible=admissible,
        critical_points=tuple(sorted(float(p) for p in critical_points)),
    )
    validate_flux(model, check_range, samples)
    return model


def validate_flux(model, check_range, samples=401, tol=1e-6):
    lo, hi = check_range.lo, check_range.hi
    span = hi - lo
    h = 1e-5 * max(1.0, span)
    us = np.linspace(lo + 2 * h, hi - 2 * h, samples)
    for name, g, dg in (("df", model.f, model.df), ("ddf", model.df, model.ddf)):
        fd = (np.asarray(g(us + h)) - np.asarray(g(us - h))) / (2 * h)
        exact = np.asarray(dg(us), dtype=float)
        err = np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))
        if np.max(err) > tol:
            bad = us[np.argmax(err)]
            raise ConfigurationError(f"{name} of flux {model.name!r} disagrees with finite differences near u={bad:.6g}")
    # sign changes of f'' on the sampled range
    dense = np.linspace(lo, hi, 20 * samples + 1)
    s = np.sign(np.asarray(model.ddf(dense), dtype=float))
    nz = s != 0
    found = []
    ds, ss = dense[nz], s[nz]
    for k in np.flatnonzero(ss[1:] != ss[:-1]):
        found.append(bisect(lambda u: float(model.ddf(u)), ds[k], ds[k + 1]))
    declared = [p for p in model.inflection_points if lo < p < hi]
    if len(found) != len(declared) or any(abs(a - b) > 1e-6 * max(1.0, span) for a, b in zip(found, declared)):
        raise ConfigurationError(f"declared inflection points {declared} of {model.name!r} do not match sign changes of f'' {found}")
