"""Conservation/TV/entropy time series and L1 errors between solutions."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .interpolation import PiecewiseSolution, kruzkov_entropy, total_area, total_variation
from .state import ParticleField


def default_entropy_grid(fld, count=17):
    """``count`` values spanning the field's value range padded by 10% each side."""
    lo, hi = float(fld.u.min()), float(fld.u.max())
    pad = 0.1 * (hi - lo)
    return np.linspace(lo - pad, hi + pad, count)


@dataclass
class DiagnosticsSeries:
    entropy_grid: np.ndarray
    times: list = field(default_factory=list)
    area: list = field(default_factory=list)
    tv: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    events: dict = field(default_factory=dict)
    # net area carried in through the moving end particles since t = 0
    inflow: list = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def entropy_matrix(self):
        return np.array(self.entropy, dtype=float).reshape(len(self.times), len(self.entropy_grid))

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "area", "boundary_inflow", "tv"] + [f"entropy_k{j + 1}" for j in range(len(self.entropy_grid))])
        inflow = self.inflow if len(self.inflow) == len(self.times) else [0.0] * len(self.times)
        for t, a, q, v, e in zip(self.times, self.area, inflow, self.tv, self.entropy):
            w.writerow([repr(t), repr(a), repr(q), repr(v)] + [repr(float(x)) for x in e])
        return out.getvalue()

    def to_json(self):
        return json.dumps(
            {
                "entropy_grid": [float(k) for k in self.entropy_grid],
                "times": self.times,
                "area": self.area,
                "inflow": self.inflow,
                "tv": self.tv,
                "entropy": [[float(x) for x in e] for e in self.entropy],
                "events": self.events,
            }
        )


def entropy_vector(fld, grid):
    return [kruzkov_entropy(fld, k) for k in grid]


def record(fld, series, inflow=0.0):
    series.times.append(fld.t)
    series.area.append(total_area(fld))
    series.inflow.append(float(inflow))
    series.tv.append(total_variation(fld))
    series.entropy.append(entropy_vector(fld, series.entropy_grid))
    return series


class GridFunction:
    """Reference data on a grid.

    ``convention`` is ``"cell"`` (``us`` are averages over cells centred at
    ``xs``; edges halfway between centres) or ``"point"`` (nodal values,
    linear in between).
    """

    def __init__(self, xs, us, convention="cell"):
        self.xs = np.asarray(xs, dtype=float)
        self.us = np.asarray(us, dtype=float)
        if self.xs.shape != self.us.shape or self.xs.ndim != 1 or len(self.xs) < 2:
            raise ValueError("xs and us must be equal-length 1-d arrays with at least two entries")
        if np.any(np.diff(self.xs) <= 0):
            raise ValueError("grid positions must be strictly increasing")
        if convention not in ("cell", "point"):
            raise ValueError(f"unknown convention {convention!r}")
        self.convention = convention
        if convention == "cell":
            mid = 0.5 * (self.xs[1:] + self.xs[:-1])
            first = self.xs[0] - (mid[0] - self.xs[0])
            last = self.xs[-1] + (self.xs[-1] - mid[-1])
            self.edges = np.concatenate(([first], mid, [last]))
            self._cum = np.concatenate(([0.0], np.cumsum(np.diff(self.edges) * self.us)))
        else:
            self.edges = self.xs
            self._cum = np.concatenate(([0.0], np.cumsum(np.diff(self.xs) * 0.5 * (self.us[1:] + self.us[:-1]))))

    @property
    def support(self):
        return float(self.edges[0]), float(self.edges[-1])

    def breakpoints(self):
        return self.edges

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        j = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.edges) - 2)
        if self.convention == "cell":
            u = self.us[j]
        else:
            x0, x1 = self.xs[j], self.xs[j + 1]
            u = self.us[j] + (x - x0) / (x1 - x0) * (self.us[j + 1] - self.us[j])
        lo, hi = self.support
        return np.where((x < lo) | (x > hi), np.nan, u)

    def cumulative_area(self, x):
        x = np.clip(np.asarray(x, dtype=float), *self.support)
        j = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.edges) - 2)
        dx = x - self.edges[j]
        if self.convention == "cell":
            part = dx * self.us[j]
        else:
            x0, x1 = self.xs[j], self.xs[j + 1]
            slope = (self.us[j + 1] - self.us[j]) / (x1 - x0)
            part = dx * (self.us[j] + 0.5 * slope * dx)
        return self._cum[j] + part

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x_center" if self.convention == "cell" else "x", "u"])
        for x, u in zip(self.xs.tolist(), self.us.tolist()):
            w.writerow([repr(x), repr(u)])
        return out.getvalue()


def as_solution(obj):
    """Coerce a field, piecewise solution or grid function to an evaluable solution."""
    if isinstance(obj, ParticleField):
        if len(obj) < 2:
            raise DomainError("a particle field needs at least two particles to define a solution")
        return PiecewiseSolution.from_field(obj)
    if isinstance(obj, (PiecewiseSolution, GridFunction)):
        return obj
    raise TypeError(f"cannot evaluate {type(obj).__name__}")


# interior sample fractions used to detect sign changes inside a subinterval
_PROBES = np.concatenate(([1e-9], np.linspace(0.125, 0.875, 7), [1 - 1e-9]))


def l1_error(a, b, bisect_iter=60):
    """L1 distance between two solutions over their common support.

    The common support is split at every breakpoint of either solution, so
    that both are monotone and continuous on each subinterval. Sign changes
    of the difference are located by bisection; on each resulting piece the
    integral of |a - b| equals the difference of the exact areas.
    """
    sa, sb = as_solution(a), as_solution(b)
    lo = max(sa.support[0], sb.support[0])
    hi = min(sa.support[1], sb.support[1])
    if not lo < hi:
        raise DomainError(f"supports do not overlap: {sa.support} vs {sb.support}")
    pts = np.concatenate(([lo, hi], sa.breakpoints(), sb.breakpoints()))
    pts = np.unique(pts[(pts >= lo) & (pts <= hi)])
    left, right = pts[:-1], pts[1:]
    keep = right > left
    left, right = left[keep], right[keep]

    probes = left[:, None] + _PROBES * (right - left)[:, None]
    diff = sa.evaluate(probes) - sb.evaluate(probes)
    sgn = np.sign(diff)
    change = (sgn[:, :-1] * sgn[:, 1:]) < 0
    rows, cols = np.nonzero(change)
    roots = probes[diff == 0]  # probes that hit a crossing exactly
    if len(rows):
        p = probes[rows, cols].copy()
        q = probes[rows, cols + 1].copy()
        sp = sgn[rows, cols]
        for _ in range(bisect_iter):
            mid = 0.5 * (p + q)
            sm = np.sign(sa.evaluate(mid) - sb.evaluate(mid))
            same = sm == sp
            p = np.where(same, mid, p)
            q = np.where(same, q, mid)
        roots = np.concatenate((roots, 0.5 * (p + q)))
    cuts = np.unique(np.concatenate((pts, roots)))
    area_a = np.diff(sa.cumulative_area(cuts))
    area_b = np.diff(sb.cumulative_area(cuts))
    return float(np.sum(np.abs(area_a - area_b)))


def fit_slope(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    lh = np.log(np.asarray(hs, dtype=float))
    le = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(lh, le, 1)[0])
