"""Command-line front end: ``uplink-meta {meta,validate,moments}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 validation tolerance exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .dominant import meta_proposed, tables_for
from .moments import beta_meta, gil_pelaez_meta, moment_b
from .numerics import INNER_TOL, MIDDLE_TOL, OUTER_TOL, NumericalError, random_stream
from .results import MOMENT_COLUMNS, ResultRow, ResultTable
from .simulation import (dump_realization, empirical_moment, meta_from_samples, sample_network,
                         simulate_links)

log = logging.getLogger("uplink_meta")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_TOLERANCE = 0, 1, 2, 3

LAMBDA_NOTE = ("The BS density is not given with the published curves; "
               "1e-5 BS/m^2 is this tool's default.")


# ---------------------------------------------------------------------------
# analytic tasks (one per method, epsilon, theta); run in a pool when asked


def _task(args):
    method, cfg, eps, theta_db = args
    params = cfg.params_for(eps)
    theta = 10.0 ** (theta_db / 10.0)
    gammas = list(cfg.gamma)
    t0 = time.perf_counter()
    try:
        if method == "proposed":
            tables = tables_for(params)
            rows = []
            for g in gammas:
                t1 = time.perf_counter()
                v = meta_proposed(theta, g, params, tables)
                rows.append(ResultRow(method, eps, theta_db, g, float(v), None,
                                      1e3 * (time.perf_counter() - t1)))
            return rows, None
        if method.startswith("beta"):
            kernel = method[5:-1] if "[" in method else cfg.kernel
            vals = np.atleast_1d(beta_meta(theta, gammas, params, kernel))
        elif method == "gilpelaez":
            vals = gil_pelaez_meta(theta, gammas, params).value
        else:
            raise ValueError(f"unknown method {method}")
    except (NumericalError, ValueError) as exc:
        ms = 1e3 * (time.perf_counter() - t0) / len(gammas)
        rows = [ResultRow(method, eps, theta_db, g, math.nan, None, ms) for g in gammas]
        return rows, f"{method} eps={eps:g} theta_db={theta_db:g}: {exc}"
    ms = 1e3 * (time.perf_counter() - t0) / len(gammas)
    return [ResultRow(method, eps, theta_db, g, float(v), None, ms) for g, v in zip(gammas, vals)], None


def _map(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _mc_rows(cfg: RunConfig, samples, runtime_s):
    rows = []
    n_cells = len(cfg.epsilon) * len(cfg.theta_db) * len(cfg.gamma)
    ms = 1e3 * runtime_s / n_cells
    for eps in cfg.epsilon:
        est = meta_from_samples(samples.for_epsilon(eps), cfg.theta_linear, cfg.gamma, samples.weights)
        for i, tdb in enumerate(cfg.theta_db):
            for j, g in enumerate(cfg.gamma):
                rows.append(ResultRow("mc", eps, tdb, g, float(est.value[i, j]), float(est.ci[i, j]), ms))
    return rows


def _simulate(cfg: RunConfig):
    t0 = time.perf_counter()
    sim = replace(cfg.sim, workers=max(cfg.sim.workers, cfg.workers))
    samples = simulate_links(cfg.params_for(cfg.epsilon[0]), sim, cfg.theta_linear, cfg.epsilon)
    return samples, time.perf_counter() - t0


def _metadata(cfg: RunConfig, command: str, failures) -> dict:
    return {
        "command": command,
        "code_version": __version__,
        "seed": cfg.sim.seed,
        "bs_density": cfg.params.bs_density,
        "bs_density_note": LAMBDA_NOTE,
        "tolerances": {"inner": INNER_TOL, "middle": MIDDLE_TOL, "outer": OUTER_TOL},
        "kernel": cfg.kernel,
        "config": cfg.to_dict(),
        "failures": list(failures),
    }


def _dump(cfg: RunConfig, outdir: Path):
    n = min(cfg.output.dump_realizations, cfg.sim.n_realizations)
    if n == 0:
        return
    d = outdir / "realizations"
    d.mkdir(parents=True, exist_ok=True)
    params = cfg.params_for(cfg.epsilon[0])
    for i in range(n):
        real = sample_network(params, cfg.sim, random_stream(cfg.sim.seed, i))
        dump_realization(real, d / f"realization_{i:04d}.csv")


def run_meta(cfg: RunConfig, extra_methods=()) -> ResultTable:
    """Evaluate every configured method on the (epsilon, theta, gamma) grid."""
    table = ResultTable()
    failures = []
    analytic = [m for m in cfg.methods if m != "mc"] + list(extra_methods)
    jobs = [(m, cfg, e, t) for m in analytic for e in cfg.epsilon for t in cfg.theta_db]
    for rows, err in _map(_task, jobs, cfg.workers):
        for r in rows:
            table.add(r)
        if err:
            log.warning("method failure: %s", err)
            failures.append(err)
    if "mc" in cfg.methods:
        samples, runtime = _simulate(cfg)
        for r in _mc_rows(cfg, samples, runtime):
            table.add(r)
    table.metadata = _metadata(cfg, "meta", failures)
    return table


def validation_report(table: ResultTable, cfg: RunConfig) -> dict:
    """Max/mean absolute deviation of each analytic method from the simulation."""
    ref = {(r.epsilon, r.theta_db, r.gamma): r.value for r in table.rows if r.method == "mc"}
    methods = sorted({r.method for r in table.rows if r.method != "mc"})
    report = {"reference": "mc", "methods": {}, "passed": True}
    for m in methods:
        dev = np.array([abs(r.value - ref[(r.epsilon, r.theta_db, r.gamma)])
                        for r in table.rows if r.method == m])
        failed = int(np.sum(~np.isfinite(dev)))
        finite = dev[np.isfinite(dev)]
        base = m.split("[")[0]
        tol = cfg.tolerances.get(base)
        entry = {
            "max_abs_deviation": float(finite.max()) if finite.size else None,
            "mean_abs_deviation": float(finite.mean()) if finite.size else None,
            "cells": int(dev.size),
            "failed_cells": failed,
            "tolerance": tol,
        }
        per_eps = {}
        for e in cfg.epsilon:
            d = np.array([abs(r.value - ref[(r.epsilon, r.theta_db, r.gamma)])
                          for r in table.rows if r.method == m and math.isclose(r.epsilon, e)])
            d = d[np.isfinite(d)]
            per_eps[f"{e:g}"] = float(d.max()) if d.size else None
        entry["max_abs_deviation_by_epsilon"] = per_eps
        if "[" in m:
            entry["informational"] = True
        else:
            ok = failed == 0 and finite.size > 0 and tol is not None and float(finite.max()) <= tol
            entry["passed"] = bool(ok)
            report["passed"] = report["passed"] and bool(ok)
        report["methods"][m] = entry
    return report


def run_moments(cfg: RunConfig, b_list=None) -> ResultTable:
    b_list = tuple(cfg.b_list if b_list is None else b_list)
    table = ResultTable(columns=MOMENT_COLUMNS)
    failures = []
    for eps in cfg.epsilon:
        params = cfg.params_for(eps)
        for tdb, th in zip(cfg.theta_db, cfg.theta_linear):
            for b in b_list:
                for kernel in ("pgfl-exact", "paper-literal"):
                    t0 = time.perf_counter()
                    try:
                        v = moment_b(th, b, params, kernel).real
                    except NumericalError as exc:
                        failures.append(f"{kernel} eps={eps:g} theta_db={tdb:g} b={b:g}: {exc}")
                        v = math.nan
                    table.add(ResultRow(kernel, eps, tdb, float(b), v, None, 1e3 * (time.perf_counter() - t0)))
    if "mc" in cfg.methods:
        samples, runtime = _simulate(cfg)
        ms = 1e3 * runtime / (len(cfg.epsilon) * len(cfg.theta_db) * len(b_list))
        for eps in cfg.epsilon:
            params = cfg.params_for(eps)
            for tdb, th in zip(cfg.theta_db, cfg.theta_linear):
                for b in b_list:
                    est = empirical_moment(params, cfg.sim, th, b, samples)
                    table.add(ResultRow("mc", eps, tdb, float(b), est.value, 1.96 * est.std_error, ms))
    table.metadata = _metadata(cfg, "moments", failures)
    return table


# ---------------------------------------------------------------------------
# command wrappers


def _outdir(cfg: RunConfig, override):
    d = Path(override) if override else Path(cfg.output.directory)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(table: ResultTable, outdir: Path, name: str):
    csv_path = outdir / name
    table.write_csv(csv_path)
    table.write_metadata(csv_path.with_suffix(".meta.json"))
    return csv_path


def cmd_meta(cfg: RunConfig, outdir=None) -> int:
    out = _outdir(cfg, outdir)
    table = run_meta(cfg)
    path = _write(table, out, cfg.output.csv)
    if cfg.output.svg:
        from .plotting import write_figures

        write_figures(table, out)
    _dump(cfg, out)
    log.info("wrote %s", path)
    return EXIT_NUMERICAL if table.metadata["failures"] else EXIT_OK


def cmd_validate(cfg: RunConfig, outdir=None) -> int:
    if "mc" not in cfg.methods:
        raise ConfigError("methods", "validation requires simulation reference (add \"mc\")")
    out = _outdir(cfg, outdir)
    # the beta curve under the other kernel is reported alongside, for comparison
    other = "paper-literal" if cfg.kernel == "pgfl-exact" else "pgfl-exact"
    extra = [f"beta[{other}]"] if "beta" in cfg.methods else []
    table = run_meta(cfg, extra)
    table.metadata["command"] = "validate"
    _write(table, out, cfg.output.csv)
    if cfg.output.svg:
        from .plotting import write_figures

        write_figures(ResultTable([r for r in table.rows if "[" not in r.method]), out)
    report = validation_report(table, cfg)
    report["kernel"] = cfg.kernel
    report["seed"] = cfg.sim.seed
    report["failures"] = table.metadata["failures"]
    (out / cfg.output.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _dump(cfg, out)
    if table.metadata["failures"]:
        return EXIT_NUMERICAL
    return EXIT_OK if report["passed"] else EXIT_TOLERANCE


def cmd_moments(cfg: RunConfig, b_list=None, outdir=None) -> int:
    out = _outdir(cfg, outdir)
    table = run_moments(cfg, b_list)
    _write(table, out, Path(cfg.output.csv).with_name("moments.csv").name)
    return EXIT_NUMERICAL if table.metadata["failures"] else EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="uplink-meta", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("meta", "evaluate the meta distribution on a grid"),
                        ("validate", "compare analytic methods against the simulation"),
                        ("moments", "tabulate moments of the conditional success probability")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("-c", "--config", help="JSON configuration file (defaults apply without one)")
        s.add_argument("-o", "--out", help="output directory (overrides output.directory)")
        s.add_argument("--seed", type=int, help="simulation seed (overrides sim.seed)")
        s.add_argument("--workers", type=int, help="worker processes (overrides workers)")
        s.add_argument("--no-svg", action="store_true", help="skip the SVG figures")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "moments":
            s.add_argument("-b", type=float, nargs="+", dest="b_list", help="real moment orders >= 0")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("sim.seed", "must be a 64-bit unsigned integer")
            cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("workers", "must be >= 1")
            cfg = replace(cfg, workers=args.workers)
        if args.no_svg:
            cfg = replace(cfg, output=replace(cfg.output, svg=False))
        if args.command == "moments" and args.b_list is not None and min(args.b_list) < 0:
            raise ConfigError("b_list", "orders must be >= 0")
        if args.command == "meta":
            return cmd_meta(cfg, args.out)
        if args.command == "validate":
            return cmd_validate(cfg, args.out)
        return cmd_moments(cfg, args.b_list, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
