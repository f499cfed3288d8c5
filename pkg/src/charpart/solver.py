"""Event loop: advance to the next collision or output time, then manage particles."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import DiagnosticsSeries, default_entropy_grid, entropy_vector, record
from .dynamics import advance, next_event
from .errors import CharpartError, ConfigurationError
from .flux import get_flux
from .interpolation import total_area, total_variation
from .management import EventLog, ManagementConfig, management_pass, postprocess_shocks
from .problems import make_initial_condition
from .state import field_from_samples, sample_initial


@dataclass
class RunConfig:
    flux: str = "quartic"
    ic: dict = field(default_factory=lambda: {"name": "gauss_cos"})
    domain: tuple = (-3.0, 3.0)
    n: int = 100
    d_max_factor: float = 1.9
    d_min: float = 0.0
    t_end: float = 1.0
    output_times: list = field(default_factory=list)
    entropy_fix: bool = True
    postprocess: bool = False
    seed: int = 0
    max_events: int = None
    # record area/TV/entropy before and after every management pass that merges
    event_diagnostics: bool = False
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_fix_insertions: int = 8
    flux_params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.output_times = [float(t) for t in self.output_times]
        if any(b < a for a, b in zip(self.output_times, self.output_times[1:])):
            raise ConfigurationError("output times must be sorted")
        if any(t < 0 or t > self.t_end for t in self.output_times):
            raise ConfigurationError(f"output times must lie in [0, {self.t_end}]")
        if self.n < 2 and self.n != 0:
            raise ConfigurationError("n must be 0 (empty field) or at least 2")
        if self.d_max_factor <= 0 or self.d_min < 0:
            raise ConfigurationError("d_max_factor must be positive and d_min non-negative")

    @property
    def spacing(self):
        if self.ic.get("name") == "particles":
            xs = self.ic["xs"]
            return (xs[-1] - xs[0]) / (len(xs) - 1)
        return (self.domain[1] - self.domain[0]) / (self.n - 1)

    def to_dict(self):
        return asdict(self)

    def build(self):
        """Flux, initial condition and the sampled initial field."""
        flux = get_flux(self.flux, **self.flux_params)
        params = dict(self.ic)
        name = params.pop("name", None)
        if name is None:
            raise ConfigurationError("initial condition needs a name")
        if self.n == 0:
            raise ConfigurationError("cannot run an empty field")
        if name == "particles":
            # explicit particles; n and domain are ignored
            if set(params) != {"xs", "us"}:
                raise ConfigurationError("'particles' initial condition takes exactly xs and us")
            fld = field_from_samples(params["xs"], params["us"], flux, self.d_max_factor * self.spacing, self.d_min)
            ic = make_initial_condition("tabulated", xs=fld.x, us=fld.u) if np.all(np.diff(fld.x) > 0) else None
            return flux, ic, fld
        ic = make_initial_condition(name, domain=self.domain, **params)
        fld = sample_initial(ic, self.n, flux, d_max=self.d_max_factor * self.spacing, d_min=self.d_min)
        return flux, ic, fld


@dataclass
class EventRecord:
    t: float
    area_before: float
    area_after: float
    tv_before: float
    tv_after: float
    entropy_before: list
    entropy_after: list
    merges: int
    entropy_safe: bool


@dataclass
class RunResult:
    snapshots: list
    diagnostics: DiagnosticsSeries
    events: EventLog
    postprocessed: list = None
    event_times: list = field(default_factory=list)
    event_diagnostics: list = field(default_factory=list)
    n_events: int = 0
    final: object = None
    # total area entering through the end particles (G(u_right) - G(u_left) per unit time)
    boundary_inflow: float = 0.0

    def snapshot_at(self, t):
        for ts, fld in self.snapshots:
            if ts == t:
                return fld
        raise KeyError(t)


def run(cfg, fld=None):
    """Run the particle method described by ``cfg``.

    Outputs land exactly on the requested times. A management pass follows
    every collision event and precedes every snapshot. Stops at ``t_end`` or
    after ``max_events`` collision events.
    """
    if fld is None:
        _, _, fld = cfg.build()
    mcfg = ManagementConfig(
        d_max=fld.d_max,
        d_min=fld.d_min,
        newton_tol=cfg.newton_tol,
        newton_max_iter=cfg.newton_max_iter,
        entropy_fix_enabled=cfg.entropy_fix,
        max_fix_insertions=cfg.max_fix_insertions,
    )
    events = EventLog()
    series = DiagnosticsSeries(entropy_grid=default_entropy_grid(fld))
    result = RunResult(snapshots=[], diagnostics=series, events=events, postprocessed=[] if cfg.postprocess else None)
    pending = list(cfg.output_times)

    def output():
        while pending and pending[0] <= fld.t:
            pending.pop(0)
            snap = fld.copy()
            result.snapshots.append((fld.t, snap))
            record(snap, series, result.boundary_inflow)
            if cfg.postprocess:
                result.postprocessed.append((fld.t, postprocess_shocks(snap)))

    def manage():
        before = None
        if cfg.event_diagnostics:
            before = (total_area(fld), total_variation(fld), entropy_vector(fld, series.entropy_grid))
            n_log = len(events)
        stats = management_pass(fld, mcfg, events)
        if before is not None and (stats.merges or stats.inflection_merges):
            new = events.records[n_log:]
            safe = all(r.get("entropy_safe", True) for r in new if r["type"] == "merge")
            result.event_diagnostics.append(
                EventRecord(
                    t=fld.t,
                    area_before=before[0],
                    area_after=total_area(fld),
                    tv_before=before[1],
                    tv_after=total_variation(fld),
                    entropy_before=before[2],
                    entropy_after=entropy_vector(fld, series.entropy_grid),
                    merges=stats.merges + stats.inflection_merges,
                    entropy_safe=safe,
                )
            )
        return stats

    try:
        _loop(cfg, fld, result, pending, manage, output)
    except CharpartError as exc:
        # hand the full event history to the caller
        exc.events = events
        raise
    series.events = events.counts()
    result.final = fld
    return result


def _loop(cfg, fld, result, pending, manage, output):
    manage()
    output()
    while fld.t < cfg.t_end:
        if cfg.max_events is not None and result.n_events >= cfg.max_events:
            break
        horizon = next_event(fld)
        t_stop = pending[0] if pending else cfg.t_end
        remaining = t_stop - fld.t
        ends = float(fld.flux.G(fld.u[-1]) - fld.flux.G(fld.u[0]))
        if horizon.dt_s <= remaining:
            result.boundary_inflow += horizon.dt_s * ends
            advance(fld, horizon.dt_s, horizon)
            if horizon.dt_s == remaining:
                fld.t = t_stop
            result.n_events += 1
            result.event_times.append(fld.t)
            manage()
        else:
            result.boundary_inflow += remaining * ends
            advance(fld, remaining, horizon)
            fld.t = t_stop
            manage()
        output()
