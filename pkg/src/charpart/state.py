"""Particle field representation, initial sampling and validation."""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError
from .flux import ValueInterval, inflection_points_in


@dataclass(frozen=True)
class Particle:
    x: float
    u: float
    is_inflection: bool = False
    merged_origin: bool = False


@dataclass
class InitialCondition:
    """Initial data u0 on a position interval.

    ``breakpoints`` lists positions where u0 jumps; the finite-volume oracle
    uses them for exact cell projection. Boundary treatment is outflow.
    """

    u0: Callable
    domain: ValueInterval
    breakpoints: Sequence[float] = ()
    name: str = "custom"

    def __call__(self, x):
        return self.u0(np.asarray(x, dtype=float))


class ParticleField:
    """Position-ordered particles bound to a flux.

    Storage is columnar: ``x``, ``u``, ``inflection``, ``merged`` and
    ``ids`` are parallel numpy arrays. ``ids`` identify particles across
    events (inserted and merged particles get fresh ids).
    """

    def __init__(self, x, u, flux, t=0.0, d_max=math.inf, d_min=0.0, inflection=None, merged=None, ids=None):
        self.x = np.array(x, dtype=float)
        self.u = np.array(u, dtype=float)
        if self.x.shape != self.u.shape or self.x.ndim != 1:
            raise ConfigurationError("x and u must be 1-d arrays of equal length")
        self.flux = flux
        self.t = float(t)
        if not (d_min >= 0 and d_max > 0 and d_min < d_max):
            raise ConfigurationError(f"need 0 <= d_min < d_max, got d_min={d_min}, d_max={d_max}")
        self.d_max = float(d_max)
        self.d_min = float(d_min)
        m = len(self.x)
        if inflection is None:
            inflection = np.isin(self.u, np.asarray(flux.inflection_points, dtype=float))
        self.inflection = np.array(inflection, dtype=bool)
        self.merged = np.zeros(m, dtype=bool) if merged is None else np.array(merged, dtype=bool)
        self.ids = np.arange(m) if ids is None else np.array(ids, dtype=np.int64)
        self.next_id = int(self.ids.max()) + 1 if m else 0

    def __len__(self):
        return len(self.x)

    def __getitem__(self, i):
        return Particle(float(self.x[i]), float(self.u[i]), bool(self.inflection[i]), bool(self.merged[i]))

    @property
    def particles(self):
        return [self[i] for i in range(len(self))]

    @property
    def speeds(self):
        return np.asarray(self.flux.df(self.u), dtype=float)

    def copy(self):
        new = ParticleField.__new__(ParticleField)
        new.x = self.x.copy()
        new.u = self.u.copy()
        new.flux = self.flux
        new.t = self.t
        new.d_max = self.d_max
        new.d_min = self.d_min
        new.inflection = self.inflection.copy()
        new.merged = self.merged.copy()
        new.ids = self.ids.copy()
        new.next_id = self.next_id
        return new

    def insert(self, k, x, u, inflection=False, merged=False):
        """Insert a particle so that it gets index ``k``; returns its id."""
        pid = self.next_id
        self.next_id += 1
        self.x = np.insert(self.x, k, x)
        self.u = np.insert(self.u, k, u)
        self.inflection = np.insert(self.inflection, k, inflection)
        self.merged = np.insert(self.merged, k, merged)
        self.ids = np.insert(self.ids, k, pid)
        return pid

    def delete(self, k):
        self.x = np.delete(self.x, k)
        self.u = np.delete(self.u, k)
        self.inflection = np.delete(self.inflection, k)
        self.merged = np.delete(self.merged, k)
        self.ids = np.delete(self.ids, k)

    def new_id(self):
        pid = self.next_id
        self.next_id += 1
        return pid

    def to_csv(self, fh=None, header=True):
        """Snapshot rows ``t,x,u,is_inflection,merged_origin``."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        if header:
            w.writerow(["t", "x", "u", "is_inflection", "merged_origin"])
        t = repr(self.t)
        for xi, ui, fi, mi in zip(self.x.tolist(), self.u.tolist(), self.inflection.tolist(), self.merged.tolist()):
            w.writerow([t, repr(xi), repr(ui), int(fi), int(mi)])
        if fh is None:
            return out.getvalue()
        return None


def read_snapshots_csv(text):
    """Parse snapshot CSV text into ``{t: rows}`` with rows (x, u, infl, merged)."""
    rows = {}
    for rec in csv.DictReader(io.StringIO(text)):
        t = float(rec["t"])
        rows.setdefault(t, []).append((float(rec["x"]), float(rec["u"]), bool(int(rec["is_inflection"])), bool(int(rec["merged_origin"]))))
    return rows


def sample_initial(ic, n, flux, d_max=None, d_min=0.0):
    """Sample ``ic`` at ``n`` equidistant positions and add inflection particles.

    Every adjacent pair whose values straddle an inflection point of the
    flux receives an inflection particle where the straight chord between
    the pair attains that value. ``d_max`` defaults to 1.9 times the
    sampling spacing.
    """
    if n < 2:
        raise ConfigurationError(f"need at least 2 particles, got {n}")
    lo, hi = ic.domain.lo, ic.domain.hi
    xs = np.linspace(lo, hi, int(n))
    us = np.asarray(ic(xs), dtype=float)
    h = (hi - lo) / (n - 1)
    return field_from_samples(xs, us, flux, 1.9 * h if d_max is None else d_max, d_min)


def field_from_samples(xs, us, flux, d_max, d_min=0.0):
    """Field through the given particles, with inflection particles added on chords."""
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    if xs.shape != us.shape or xs.ndim != 1 or len(xs) < 2:
        raise ConfigurationError("need matching 1-d position and value arrays with at least two entries")
    if np.any(np.diff(xs) < 0):
        raise ConfigurationError("particle positions must be non-decreasing")
    flux.check_range(us)
    x_out, u_out = [float(xs[0])], [float(us[0])]
    for i in range(len(xs) - 1):
        x1, u1, x2, u2 = float(xs[i]), float(us[i]), float(xs[i + 1]), float(us[i + 1])
        crossings = inflection_points_in(flux, ValueInterval(min(u1, u2), max(u1, u2)))
        if u2 < u1:
            crossings = crossings[::-1]
        for p in crossings:
            x_out.append(x1 + (p - u1) / (u2 - u1) * (x2 - x1))
            u_out.append(p)
        x_out.append(x2)
        u_out.append(u2)
    return ParticleField(x_out, u_out, flux, t=0.0, d_max=d_max, d_min=d_min)


@dataclass
class Violation:
    kind: str
    index: int
    message: str


def validate(fld):
    """Check the field invariants; returns a list of violations (empty if valid)."""
    out = []
    if not (fld.d_min >= 0 and fld.d_max > 0 and fld.d_min < fld.d_max):
        out.append(Violation("distances", -1, f"bad d_min={fld.d_min}, d_max={fld.d_max}"))
    x, u = fld.x, fld.u
    for i in np.flatnonzero(np.diff(x) < 0):
        out.append(Violation("ordering", int(i), f"x[{i}]={x[i]!r} > x[{i + 1}]={x[i + 1]!r}"))
    pts = np.asarray(fld.flux.inflection_points, dtype=float)
    flagged = np.isin(u, pts)
    for i in np.flatnonzero(flagged != fld.inflection):
        out.append(Violation("inflection_flag", int(i), f"particle {i} flag does not match its value {u[i]!r}"))
    for p in pts:
        straddle = (u[:-1] - p) * (u[1:] - p) < 0
        for i in np.flatnonzero(straddle):
            out.append(Violation("straddle", int(i), f"particles {i},{i + 1} straddle inflection value {p!r} without an inflection particle"))
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(u)):
        out.append(Violation("finite", -1, "non-finite positions or values"))
    return out
