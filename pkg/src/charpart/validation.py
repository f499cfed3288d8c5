"""Built-in invariant suite run by ``charpart validate``."""

import numpy as np

from .dynamics import advance, next_event
from .flux import ValueInterval, inflection_points_in, nonlinear_average
from .interpolation import _x_of_u
from .solver import run
from .state import validate as validate_field


def _check(name, violations, **details):
    return {"check": name, "passed": not violations, "violations": violations, **details}


def conservation(result, tol):
    """Area minus boundary inflow is constant; every management pass preserves area."""
    area = np.asarray(result.diagnostics.area)
    inflow = np.asarray(result.diagnostics.inflow)
    bad = []
    if len(area):
        base = area[0] - inflow[0]
        scale = max(abs(area[0]), float(np.abs(inflow).max()), 1e-300)
        for t, a, q in zip(result.diagnostics.times, area, inflow):
            if abs(a - q - base) > tol * scale:
                bad.append({"t": t, "area": a, "boundary_inflow": q, "expected": base + q})
        for e in result.event_diagnostics:
            if abs(e.area_after - e.area_before) > tol * max(abs(e.area_before), 1e-300):
                bad.append({"t": e.t, "area_before": e.area_before, "area_after": e.area_after})
    return _check("conservation", bad, tolerance=tol)


def tvd(result, tol):
    tv = result.diagnostics.tv
    times = result.diagnostics.times
    bad = [{"t0": times[j], "t1": times[j + 1], "increase": tv[j + 1] - tv[j]} for j in range(len(tv) - 1) if tv[j + 1] > tv[j] + tol]
    bad += [{"t": e.t, "increase": e.tv_after - e.tv_before} for e in result.event_diagnostics if e.tv_after > e.tv_before + tol]
    return _check("tvd", bad, tolerance=tol)


def entropy(result, tol):
    bad = []
    grid = result.diagnostics.entropy_grid
    for e in result.event_diagnostics:
        d = np.asarray(e.entropy_after) - np.asarray(e.entropy_before)
        if np.any(d > tol):
            j = int(np.argmax(d))
            bad.append({"t": e.t, "k": float(grid[j]), "increase": float(d[j]), "entropy_check_passed": e.entropy_safe})
    merges = sum(e.merges for e in result.event_diagnostics)
    return _check("entropy", bad, tolerance=tol, merge_passes=len(result.event_diagnostics), merges=merges)


def averages(flux, lo, hi, samples, seed):
    """Symmetry, bounds and quadrature agreement of the nonlinear average."""
    rng = np.random.default_rng(seed)
    bad = []
    checked = 0
    for _ in range(samples):
        u1, u2 = rng.uniform(lo, hi, 2)
        if inflection_points_in(flux, ValueInterval(min(u1, u2), max(u1, u2))):
            continue
        checked += 1
        a = nonlinear_average(flux, u1, u2)
        q = nonlinear_average(flux, u1, u2, method="quadrature")
        b = nonlinear_average(flux, u2, u1)
        scale = max(1.0, abs(a))
        if abs(a - b) > 1e-14 * scale:
            bad.append({"u1": u1, "u2": u2, "issue": "asymmetric", "a12": a, "a21": b})
        if not min(u1, u2) - 1e-14 * scale <= a <= max(u1, u2) + 1e-14 * scale:
            bad.append({"u1": u1, "u2": u2, "issue": "outside [u1, u2]", "a": a})
        if abs(a - q) > 1e-10 * scale:
            bad.append({"u1": u1, "u2": u2, "issue": "quadrature mismatch", "a": a, "quad": q})
    return _check("averages", bad, pairs=checked)


def interpolant_pde(result, points=9):
    """Points on the interpolant moved at their characteristic speed stay on the moved interpolant."""
    bad = []
    for t, fld in result.snapshots:
        if len(fld) < 2:
            continue
        horizon = next_event(fld)
        dt = 0.5 * horizon.dt_s if np.isfinite(horizon.dt_s) else 0.1
        moved = fld.copy()
        advance(moved, dt)
        flux = fld.flux
        theta = np.linspace(0.0, 1.0, points)[1:-1]
        scale = max(1.0, float(np.abs(fld.x).max()))
        for i in range(len(fld) - 1):
            u1, u2 = fld.u[i], fld.u[i + 1]
            if u1 == u2:
                continue
            us = u1 + theta * (u2 - u1)
            x0 = _x_of_u(flux, fld.x[i], u1, fld.x[i + 1], u2, us)
            x1 = _x_of_u(flux, moved.x[i], u1, moved.x[i + 1], u2, us)
            err = np.abs(x0 + flux.df(us) * dt - x1)
            if err.max() > 1e-10 * scale:
                bad.append({"t": t, "segment": i, "error": float(err.max())})
    return _check("interpolant_pde", bad)


def field_validity(result):
    bad = []
    for t, fld in result.snapshots:
        bad += [{"t": t, "kind": v.kind, "index": v.index, "message": v.message} for v in validate_field(fld)]
    return _check("field", bad)


def run_suite(exp):
    """Run the configured problem with event diagnostics and check every invariant."""
    cfg = exp.run
    if cfg.n == 0:
        return {"status": "empty", "passed": True, "checks": [], "note": "empty field: nothing to check"}
    cfg.event_diagnostics = True
    if not cfg.output_times:
        cfg.output_times = [0.0, cfg.t_end]
    result = run(cfg)
    vc = exp.validate
    fld = result.snapshots[0][1]
    lo, hi = float(fld.u.min()), float(fld.u.max())
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    checks = [
        conservation(result, vc.tol_area),
        tvd(result, vc.tol_tv),
        entropy(result, vc.tol_entropy),
        averages(fld.flux, lo, hi, vc.average_samples, vc.seed),
        interpolant_pde(result),
        field_validity(result),
    ]
    passed = all(c["passed"] for c in checks)
    return {
        "status": "ok" if passed else "violations",
        "passed": passed,
        "events": result.n_events,
        "event_counts": result.events.counts(),
        "checks": checks,
    }
