"""Scalar root finding: bisection and Newton safeguarded by a bracket.

Both a scalar and an elementwise (numpy) variant are provided. The
vectorized one is used to invert the interpolant at many points at once.
"""

import math

import numpy as np

from .errors import DomainError


def bisect(fun, lo, hi, xtol=0.0, maxiter=200):
    """Locate a sign change of ``fun`` in ``[lo, hi]`` by plain bisection.

    Iterates until the bracket is no wider than ``xtol`` or cannot be split
    any further in floating point.
    """
    flo = fun(lo)
    fhi = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi) or abs(hi - lo) <= xtol:
            break
        fmid = fun(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def safeguarded_newton(fun, dfun, lo, hi, x0=None, rtol=1e-12, atol=0.0, maxiter=50):
    """Find a root of ``fun`` in the bracket ``[lo, hi]``.

    ``fun(lo)`` and ``fun(hi)`` must differ in sign (or one of them vanish).
    Newton steps are taken from ``x0`` (default: midpoint) and replaced by a
    bisection step whenever they leave the current bracket or fail to halve
    the residual. Convergence is declared once a step is below
    ``rtol * |x| + atol``; since that last step is still applied the
    returned value is typically accurate to a few ulps.

    Raises DomainError if the bracket does not enclose a sign change.
    """
    if lo > hi:
        lo, hi = hi, lo
    flo = fun(lo)
    fhi = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"root not bracketed on [{lo}, {hi}]: f={flo}, {fhi}")
    rising = fhi > 0

    x = 0.5 * (lo + hi) if x0 is None or not (lo < x0 < hi) else x0
    fx = fun(x)
    best = min((abs(flo), lo), (abs(fhi), hi), (abs(fx), x))
    for _ in range(maxiter):
        if fx == 0.0:
            return x
        if (fx > 0) == rising:
            hi = x
        else:
            lo = x
        d = dfun(x)
        step = None
        if d != 0.0 and math.isfinite(d):
            cand = x - fx / d
            if cand == x:
                # the Newton correction is below the resolution of x
                return x
            if lo < cand < hi:
                step = cand - x
        if step is None:
            cand = 0.5 * (lo + hi)
            step = cand - x
        x_new = x + step
        f_new = fun(x_new)
        # Newton made poor progress: fall back to the midpoint.
        if abs(f_new) > 0.5 * abs(fx) and abs(step) > rtol * abs(x_new) + atol:
            mid = 0.5 * (lo + hi)
            if lo < mid < hi:
                x_new, f_new = mid, fun(mid)
                step = x_new - x
        x, fx = x_new, f_new
        best = min(best, (abs(fx), x))
        if abs(step) <= rtol * abs(x) + atol or hi - lo <= rtol * abs(x) + atol:
            x = _polish(fun, dfun, x, fx, lo, hi)
            return x if abs(fun(x)) <= best[0] else best[1]
    return best[1]


def _polish(fun, dfun, x, fx, lo, hi):
    # one last Newton step, kept only if it lowers the residual
    for _ in range(3):
        if fx == 0.0:
            break
        d = dfun(x)
        if d == 0.0 or not math.isfinite(d):
            break
        cand = x - fx / d
        if not lo <= cand <= hi or cand == x:
            break
        fc = fun(cand)
        if abs(fc) >= abs(fx):
            break
        x, fx = cand, fc
    return x


def newton_bisect_vec(fun, dfun, lo, hi, x0=None, rtol=1e-14, maxiter=80):
    """Elementwise safeguarded Newton for increasing functions.

    ``fun`` must be increasing on each ``[lo_i, hi_i]`` with
    ``fun(lo) <= 0 <= fun(hi)``. Arrays are broadcast together; the result
    has the broadcast shape.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    lo = lo.copy()
    hi = hi.copy()
    if x0 is None:
        x = 0.5 * (lo + hi)
    else:
        x = np.clip(np.broadcast_to(np.asarray(x0, float), lo.shape), lo, hi).copy()
    active = hi > lo
    for _ in range(maxiter):
        if not active.any():
            break
        xa = x[active]
        fx = fun(xa, active)
        la, ha = lo[active], hi[active]
        pos = fx > 0
        ha = np.where(pos, xa, ha)
        la = np.where(pos, la, xa)
        d = dfun(xa, active)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = xa - fx / d
        ok = np.isfinite(cand) & (cand > la) & (cand < ha)
        cand = np.where(ok, cand, 0.5 * (la + ha))
        done = (fx == 0.0) | (np.abs(cand - xa) <= rtol * np.maximum(np.abs(xa), 1e-300)) | (ha - la <= rtol * np.abs(xa))
        cand = np.where(fx == 0.0, xa, cand)
        lo[active] = la
        hi[active] = ha
        x[active] = cand
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x
