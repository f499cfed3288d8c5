"""Command-line front end.

    charpart run CONFIG -o OUT [--set key=value ...]
    charpart converge CONFIG -o OUT [--jobs N]
    charpart compare CONFIG -o OUT
    charpart validate CONFIG -o OUT

Exit codes: 0 success, 1 solver or validation failure, 2 configuration failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .diagnostics import fit_slope, l1_error
from .errors import CharpartError, ConfigurationError
from .flux import ValueInterval, get_flux
from .interpolation import PiecewiseSolution, sample_curve
from .oracle import FvConfig, fv_solve_series
from .solver import run
from .validation import run_suite

log = logging.getLogger("charpart")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _write(out_dir, name, text):
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def _echo_config(exp, out_dir):
    _write(out_dir, "effective_config.json", json.dumps(exp.raw, indent=2, sort_keys=True) + "\n")


def _curve_name(t):
    return f"curve_t{t!r}.csv"


def _events_path(out_dir):
    return os.path.join(out_dir, "events.jsonl")


def cmd_run(exp, out_dir):
    result = run(exp.run)
    with open(os.path.join(out_dir, "snapshots.csv"), "w", newline="") as fh:
        for j, (_, fld) in enumerate(result.snapshots):
            fld.to_csv(fh, header=j == 0)
        if not result.snapshots:
            fh.write("t,x,u,is_inflection,merged_origin\n")
    for t, fld in result.snapshots:
        xs, us = sample_curve(fld)
        rows = "x,u\n" + "".join(f"{x!r},{u!r}\n" for x, u in zip(xs.tolist(), us.tolist()))
        _write(out_dir, _curve_name(t), rows)
    if result.postprocessed:
        for t, sol in result.postprocessed:
            rows = ["xa,ua,xb,ub"] + [f"{a!r},{b!r},{c!r},{d!r}" for a, b, c, d in zip(sol.xa.tolist(), sol.ua.tolist(), sol.xb.tolist(), sol.ub.tolist())]
            _write(out_dir, f"postprocessed_t{t!r}.csv", "\n".join(rows) + "\n")
    _write(out_dir, "diagnostics.csv", result.diagnostics.to_csv())
    with open(_events_path(out_dir), "w") as fh:
        result.events.to_jsonl(fh)
    return EXIT_OK


def _level_run(args):
    """Worker: one resolution of a convergence study; returns plain arrays."""
    run_cfg, h = args
    res = run(run_cfg)
    snaps = {t: (fld.x.copy(), fld.u.copy()) for t, fld in res.snapshots}
    pps = {t: (s.xa, s.ua, s.xb, s.ub) for t, s in res.postprocessed}
    return h, snaps, pps


def _n_for(domain, h):
    n = (domain[1] - domain[0]) / h + 1
    if abs(n - round(n)) > 1e-9 * n:
        raise ConfigurationError(f"spacing {h} does not divide the domain {domain}")
    return int(round(n))


def cmd_converge(exp, out_dir):
    cc = exp.converge
    base = exp.run
    hs = sorted((float(h) for h in cc.resolutions), reverse=True)
    if len(hs) < 3:
        raise ConfigurationError("a convergence study needs at least 3 resolutions")
    times = sorted(float(t) for t in (cc.times or base.output_times))
    if not times:
        raise ConfigurationError("a convergence study needs evaluation times")
    t_end = max(times)
    jobs = [(replace(base, n=_n_for(base.domain, h), output_times=times, t_end=t_end, postprocess=True), h) for h in hs]
    flux = get_flux(base.flux, **base.flux_params)

    if cc.reference == "particle":
        h_ref = hs[-1] / cc.reference_factor
        jobs.append((replace(base, n=_n_for(base.domain, h_ref), output_times=times, t_end=t_end, postprocess=True), h_ref))
    elif cc.reference != "fv":
        raise ConfigurationError(f"unknown reference {cc.reference!r}; use 'particle' or 'fv'")

    if cc.jobs > 1:
        with ProcessPoolExecutor(max_workers=cc.jobs) as pool:
            outs = list(pool.map(_level_run, jobs))
    else:
        outs = [_level_run(j) for j in jobs]

    if cc.reference == "particle":
        _, _, ref_pp = outs.pop()
        refs = {t: PiecewiseSolution(*ref_pp[t], flux) for t in times}
    else:
        _, ic, _ = base.build()
        fv = FvConfig(cc.fv_cells, ValueInterval(*base.domain), cfl=cc.fv_cfl)
        refs = dict(zip(times, fv_solve_series(ic, flux, fv, times)))

    rows = []
    for h, snaps, pps in outs:
        for t in times:
            x, u = snaps[t]
            raw = l1_error(PiecewiseSolution(x[:-1], u[:-1], x[1:], u[1:], flux), refs[t])
            post = l1_error(PiecewiseSolution(*pps[t], flux), refs[t])
            rows.append((h, t, raw, post))
    lines = ["h,t,raw_error,postprocessed_error"] + [f"{h!r},{t!r},{r!r},{p!r}" for h, t, r, p in rows]
    _write(out_dir, "errors.csv", "\n".join(lines) + "\n")

    k = max(3, cc.fit_levels)
    slopes = ["t,kind,slope,levels"]
    summary = {}
    for t in times:
        sel = [r for r in rows if r[1] == t][-k:]
        h_fit = [r[0] for r in sel]
        for kind, col in (("raw", 2), ("postprocessed", 3)):
            s = fit_slope(h_fit, [r[col] for r in sel])
            slopes.append(f"{t!r},{kind},{s!r},{len(sel)}")
            summary[f"{t}/{kind}"] = s
    _write(out_dir, "slopes.csv", "\n".join(slopes) + "\n")
    log.info("fitted slopes: %s", summary)
    return EXIT_OK


def cmd_compare(exp, out_dir):
    cc = exp.compare
    base = exp.run
    times = sorted(float(t) for t in (cc.times or base.output_times))
    if not times:
        raise ConfigurationError("compare needs evaluation times")
    run_cfg = replace(base, output_times=times, t_end=max(max(times), 0.0))
    flux, ic, _ = run_cfg.build()
    if ic is None:
        raise ConfigurationError("compare needs an initial condition defined on the whole domain")
    result = run(run_cfg)
    dom = ValueInterval(*base.domain)
    coarse = fv_solve_series(ic, flux, FvConfig(cc.fv_cells, dom, cfl=cc.fv_cfl, numerical_flux=cc.fv_numerical_flux, second_order=cc.fv_second_order), times)
    fine = fv_solve_series(ic, flux, FvConfig(cc.reference_cells, dom, cfl=cc.reference_cfl), times)
    lines = ["t,particle_error,fv_error,particles,fv_cells"]
    for (t, fld), c, f in zip(result.snapshots, coarse, fine):
        lines.append(f"{t!r},{l1_error(fld, f)!r},{l1_error(c, f)!r},{len(fld)},{cc.fv_cells}")
    _write(out_dir, "compare.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_validate(exp, out_dir):
    report = run_suite(exp)
    _write(out_dir, "validate_report.json", json.dumps(report, indent=2, default=float) + "\n")
    for c in report["checks"]:
        log.info("%s: %s", c["check"], "ok" if c["passed"] else f"{len(c['violations'])} violation(s)")
    return EXIT_OK if report["passed"] else EXIT_FAILURE


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "compare": cmd_compare, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="charpart", description="Characteristic particle solver for 1-d scalar conservation laws.")
    p.add_argument("verb", choices=sorted(COMMANDS))
    p.add_argument("config", help="TOML experiment file")
    p.add_argument("-o", "--output", default=".", help="output directory (created if missing)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config entry, e.g. d_min=0.01 or converge.jobs=4")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for converge")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        overrides = list(args.overrides)
        if args.jobs is not None:
            overrides.append(f"converge.jobs={args.jobs}")
        exp = config_mod.load(args.config, overrides)
        os.makedirs(args.output, exist_ok=True)
        _echo_config(exp, args.output)
    except (ConfigurationError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.verb](exp, args.output)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CharpartError as exc:
        path = _events_path(args.output)
        events = getattr(exc, "events", None)
        if events is not None:
            with open(path, "w") as fh:
                events.to_jsonl(fh)
            print(f"solver error: {exc} (event log: {path})", file=sys.stderr)
        else:
            print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
