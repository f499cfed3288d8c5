"""Built-in initial conditions, selectable by name from run configurations."""

import numpy as np

from .errors import ConfigurationError
from .flux import ValueInterval
from .state import InitialCondition


def gauss_cos(domain=(-3.0, 3.0)):
    """u0(x) = exp(-x^2) cos(pi x)."""
    return InitialCondition(lambda x: np.exp(-x * x) * np.cos(np.pi * x), ValueInterval(*domain), name="gauss_cos")


def riemann(u_l, u_r, x0=0.0, domain=(-1.0, 1.0)):
    u_l, u_r, x0 = float(u_l), float(u_r), float(x0)
    return InitialCondition(lambda x: np.where(x < x0, u_l, u_r), ValueInterval(*domain), breakpoints=(x0,), name="riemann")


def piecewise_constant(breaks, values, domain):
    """Constant ``values[j]`` between consecutive ``breaks`` (len(values) == len(breaks) + 1)."""
    breaks = np.asarray(breaks, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(values) != len(breaks) + 1 or np.any(np.diff(breaks) <= 0):
        raise ConfigurationError("piecewise_constant needs increasing breaks and one more value than breaks")
    return InitialCondition(
        lambda x: values[np.searchsorted(breaks, x, side="right")],
        ValueInterval(*domain),
        breakpoints=tuple(breaks),
        name="piecewise_constant",
    )


def triangle(height=1.0, left=-1.0, peak=0.0, right=1.0, domain=(-2.0, 3.0)):
    """Hat function rising from ``left`` to ``peak`` and dropping to zero at ``right``."""

    def u0(x):
        up = height * (x - left) / (peak - left)
        down = height * (right - x) / (right - peak)
        return np.where((x >= left) & (x <= peak), up, np.where((x > peak) & (x <= right), down, 0.0))

    return InitialCondition(u0, ValueInterval(*domain), name="triangle")


def sawtooth(teeth=10, amplitude=1.0, domain=(0.0, 10.0), jitter=0.0, seed=0):
    """Periodic ramps with zero mean, optionally with random per-tooth amplitudes.

    Each tooth rises linearly and then drops steeply over a tenth of its
    width, which makes a shock per tooth with rarefactions in between.
    """
    lo, hi = domain
    width = (hi - lo) / teeth
    rng = np.random.default_rng(seed)
    amps = amplitude * (1.0 + jitter * rng.uniform(-1.0, 1.0, teeth))

    def u0(x):
        s = (x - lo) / width
        k = np.clip(np.floor(s).astype(int), 0, teeth - 1)
        r = s - k
        ramp = np.where(r < 0.9, -1.0 + 2.0 * r / 0.9, 1.0 - 2.0 * (r - 0.9) / 0.1)
        return amps[k] * ramp

    return InitialCondition(u0, ValueInterval(lo, hi), name="sawtooth")


def linear(slope=1.0, intercept=0.0, domain=(0.0, 1.0)):
    return InitialCondition(lambda x: slope * x + intercept, ValueInterval(*domain), name="linear")


def tabulated(xs, us):
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    if len(xs) < 2 or np.any(np.diff(xs) <= 0):
        raise ConfigurationError("tabulated data needs at least two increasing positions")
    return InitialCondition(lambda x: np.interp(x, xs, us), ValueInterval(float(xs[0]), float(xs[-1])), name="tabulated")


BUILTIN = {
    "gauss_cos": gauss_cos,
    "riemann": riemann,
    "piecewise_constant": piecewise_constant,
    "triangle": triangle,
    "sawtooth": sawtooth,
    "linear": linear,
    "tabulated": tabulated,
}


def make_initial_condition(name, domain=None, **params):
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise ConfigurationError(f"unknown initial condition {name!r}; choose from {sorted(BUILTIN)}") from None
    if domain is not None and name != "tabulated":
        params["domain"] = tuple(domain)
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for initial condition {name!r}: {exc}") from None
