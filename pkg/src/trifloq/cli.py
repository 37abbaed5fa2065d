"""Scenario-driven command line front end.

Commands: ``run <scenario.json>``, ``catalog``, ``schema``. Exit code 0
means success with all structure checks passed, 2 means a structure
check (a property the system class guarantees) failed, 1 means usage,
validation or IO trouble. Reports are deterministic for a fixed scenario
and seed; wall-clock data goes to a separate .runinfo.json sidecar.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
import time

import numpy as np

from . import __version__, signchain
from .bundles import (dimension_check, floquet_bundle_pushforward,
                      floquet_solution_truncation, frame_evolution,
                      angle_between)
from .catalog import catalog_records
from .errors import StructureError, TrifloqError
from .integrate import integrate_linear
from .periodic import floquet_decompose_system
from .scenario import (DEFAULT_NUMERIC, SCENARIO_SCHEMA, build_system,
                       load_scenario, render_csv, render_report, write_atomic)
from .skew import (cover_cardinality, hyperbolicity_check, omega_limit)
from .spectrum import rate_trace, sacker_sell_estimate

SEED_ENV = "TRIFLOQ_SEED"


def _analysis_params(doc):
    return dict(doc["analysis"].get("params", {}))


def _run_sigma_profile(doc, built, numeric):
    p = _analysis_params(doc)
    A = built.system
    x0 = np.asarray(p.get("x0", built.x0), dtype=float)
    t0, t1 = p.get("t_span", (0.0, 20.0))
    traj = integrate_linear(A, x0, float(t0), float(t1),
                            rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"])
    prof = signchain.sigma_profile(traj, zero_band=numeric["zero_band"],
                                   refine_tol=numeric["refine_tol"],
                                   max_dt=p.get("max_dt", 0.02))
    results = {
        "segments": [[a, b, v] for a, b, v in prof.segments],
        "sigma_values": prof.values,
        "drop_times": prof.drop_times,
        "drop_margins": prof.drop_margins,
        "undefined_times": prof.undefined_times,
    }
    return results, {}


def _run_periodic_floquet(doc, built, numeric):
    dec = floquet_decompose_system(built.system,
                                   rel_tol=numeric["rel_tol"],
                                   abs_tol=numeric["abs_tol"],
                                   eigen_tol=numeric["eigen_tol"])
    return dec.to_record(), {}


def _run_bundles(doc, built, numeric):
    p = _analysis_params(doc)
    A = built.system
    frame = floquet_bundle_pushforward(
        A, t_center=float(p.get("t_center", 0.0)), warmup=p.get("warmup"),
        dir_tol=numeric["dir_tol"], qr_interval=numeric["qr_interval"],
        rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"],
        seed=numeric["seed"], zero_band=numeric["zero_band"])
    results = {"frame": frame.to_record()}
    dims = []
    for l in range(A.n):
        rep = dimension_check(A, 0, l, samples=int(p.get("dimension_samples", 100)),
                              frame=frame, seed=numeric["seed"],
                              zero_band=numeric["zero_band"])
        dims.append(rep.to_record())
    results["dimension_checks"] = dims
    if p.get("compare_truncation", False):
        agreements = []
        for m in range(A.n):
            v = floquet_solution_truncation(
                A, m, k_schedule=tuple(p.get("k_schedule", (8, 16, 32, 64))),
                dir_tol=float(p.get("truncation_dir_tol", 1e-7)),
                rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"],
                seed=numeric["seed"], zero_band=numeric["zero_band"])
            agreements.append(angle_between(v, frame.vectors[:, m]))
        results["truncation_agreement_angles"] = agreements
    return results, {}


def _run_separation(doc, built, numeric):
    from .spectrum import fit_separation
    p = _analysis_params(doc)
    A = built.system
    reports = []
    pairs = p.get("pairs", list(range(A.n - 1)))
    for m in pairs:
        rep = fit_separation(A, int(m), horizon=float(p.get("horizon", 20.0)),
                             grid_dt=float(p.get("grid_dt", 0.1)),
                             warmup=p.get("warmup"),
                             rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"],
                             seed=numeric["seed"], zero_band=numeric["zero_band"])
        reports.append(rep.to_record())
    bad = [r for r in reports if not r["ok"]]
    if bad:
        raise StructureError(
            f"nonpositive separation rate on pairs {[r['pair'] for r in bad]}",
            module="spectrum", check="separation-positive")
    return {"pairs": reports}, {}


def _run_spectrum(doc, built, numeric):
    p = _analysis_params(doc)
    A = built.system
    horizon = float(p.get("horizon", 200.0))
    grid_dt = float(p.get("grid_dt", 0.5))
    windows = tuple(p.get("windows", (10.0, 20.0, 50.0)))
    times = np.linspace(0.0, horizon, int(round(horizon / grid_dt)) + 1)
    ev = frame_evolution(A, times, warmup=p.get("warmup"),
                         qr_interval=numeric["qr_interval"],
                         rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"],
                         seed=numeric["seed"], zero_band=numeric["zero_band"])
    est = sacker_sell_estimate(A, horizon=horizon, window_lengths=windows,
                               grid_dt=grid_dt, ev=ev)
    traces = [rate_trace(A, ev, m, rel_tol=numeric["rel_tol"],
                         abs_tol=numeric["abs_tol"]) for m in range(A.n)]
    header = ["t"] + [f"lambda_{m}" for m in range(A.n)]
    rows = [[float(t)] + [float(tr.values[k]) for tr in traces]
            for k, t in enumerate(ev.times)]
    results = {"spectrum": est.to_record(),
               "rate_validation_residuals": [tr.validation_residual for tr in traces]}
    return results, {"rates": (header, rows)}


def _omega_from_params(built, p, numeric):
    f = built.system
    x0 = np.asarray(p.get("x0", built.x0), dtype=float)
    theta0 = np.asarray(p.get("theta0", built.theta0), dtype=float)
    return omega_limit(
        f, x0, theta0,
        transient=float(p.get("transient", 50.0)),
        horizon=float(p.get("horizon", 300.0)),
        sample_dt=float(p.get("sample_dt", 0.05)),
        bound=p.get("bound", built.bound),
        rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"])


def _run_omega(doc, built, numeric):
    p = _analysis_params(doc)
    oset = _omega_from_params(built, p, numeric)
    d = oset.thetas.shape[1]
    header = [f"theta_{j}" for j in range(d)] + [f"x_{i}" for i in range(oset.points.shape[1])]
    rows = [[float(v) for v in np.concatenate([oset.thetas[k], oset.points[k]])]
            for k in range(oset.sample_count)]
    return oset.to_record(), {"omega_set": (header, rows)}


def _run_hyperbolicity(doc, built, numeric):
    p = _analysis_params(doc)
    oset = _omega_from_params(built, p, numeric)
    orbits = None
    if p.get("use_bounded_solution", False):
        from .skew import AnalyticOrbit, bounded_solution_linear, omega_set_from_orbit
        if "matrix" not in built.extras:
            raise StructureError(
                "fixture has no linear form for a bounded-solution orbit",
                module="cli", check="bounded-solution-availability")
        span = (0.0, float(p.get("spectrum_horizon", 150.0))
                + 2.0 * float(p.get("warmup", 50.0)) + 5.0)
        sol = bounded_solution_linear(built.extras["matrix"],
                                      built.extras["forcing"], span=span)
        orbit = AnalyticOrbit(x_eval=sol, theta_anchor=np.asarray(built.theta0),
                              t_anchor=0.0, omega=built.system.omega, t_span=span)
        oset = omega_set_from_orbit(built.system, orbit, 0.0,
                                    float(p.get("horizon", 60.0)),
                                    float(p.get("sample_dt", 0.1)))
        orbits = [orbit]
    rep = hyperbolicity_check(
        built.system, oset,
        probes=int(p.get("probes", 1)),
        horizon=float(p.get("spectrum_horizon", 150.0)),
        window_lengths=tuple(p.get("windows", (10.0, 25.0))),
        grid_dt=float(p.get("grid_dt", 0.5)),
        warmup=float(p.get("warmup", 50.0)),
        bound=p.get("bound", built.bound),
        orbits=orbits,
        rel_tol=numeric["rel_tol"], abs_tol=numeric["abs_tol"])
    return rep.to_record(), {}


def _run_cover(doc, built, numeric):
    p = _analysis_params(doc)
    oset = _omega_from_params(built, p, numeric)
    probes = p.get("theta_probes")
    if probes is None:
        k = int(p.get("probe_count", 10))
        probes = [[float(v)] * oset.thetas.shape[1] for v in np.linspace(0.05, 0.95, k)]
    reports = []
    for th in probes:
        rep = cover_cardinality(oset, th,
                                cluster_tol=float(p.get("cluster_tol", 1e-3)),
                                r_fiber=float(p.get("r_fiber", 1e-2)),
                                fiber_min=int(p.get("fiber_min", 30)))
        reports.append({"theta": list(th), **rep.to_record()})
    return {"omega_set": oset.to_record(), "fibers": reports}, {}


_HANDLERS = {
    "sigma-profile": (_run_sigma_profile, "linear"),
    "periodic-floquet": (_run_periodic_floquet, "linear"),
    "bundles": (_run_bundles, "linear"),
    "separation": (_run_separation, "linear"),
    "spectrum": (_run_spectrum, "linear"),
    "omega": (_run_omega, "skew"),
    "hyperbolicity": (_run_hyperbolicity, "skew"),
    "cover": (_run_cover, "skew"),
}


def run_scenario(path) -> int:
    started = time.time()
    doc = load_scenario(path)
    numeric = dict(DEFAULT_NUMERIC)
    numeric.update(doc.get("numeric", {}))
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        numeric["seed"] = int(env_seed)

    kind, built, info = build_system(doc)
    analysis = doc["analysis"]["kind"]
    handler, wants = _HANDLERS[analysis]
    if kind != wants:
        raise TrifloqError(
            f"analysis {analysis!r} needs a {wants} system, got {kind}")

    results, tables = handler(doc, built, numeric)
    results = {"system": info, **results}

    out = doc.get("output", {})
    directory = out.get("directory", ".")
    basename = out.get("basename",
                       os.path.splitext(os.path.basename(path))[0])
    formats = out.get("formats", ["json"])

    if "json" in formats:
        report = render_report(doc, results, numeric["seed"], numeric, __version__)
        write_atomic(os.path.join(directory, f"{basename}.report.json"), report)
    if "csv" in formats:
        for name, (header, rows) in tables.items():
            write_atomic(os.path.join(directory, f"{basename}.{name}.csv"),
                         render_csv(header, rows))
    runinfo = {
        "started_utc": datetime.datetime.fromtimestamp(
            started, datetime.timezone.utc).isoformat(),
        "duration_seconds": time.time() - started,
        "scenario_path": os.path.abspath(path),
    }
    write_atomic(os.path.join(directory, f"{basename}.runinfo.json"),
                 json.dumps(runinfo, sort_keys=True, indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trifloq",
        description="Floquet analysis of cooperative tridiagonal systems")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", help="path to scenario JSON")
    sub.add_parser("catalog", help="list registered example systems")
    sub.add_parser("schema", help="print the scenario JSON schema")
    args = parser.parse_args(argv)

    if args.command == "catalog":
        print(json.dumps(catalog_records(), indent=2, sort_keys=True))
        return 0
    if args.command == "schema":
        print(json.dumps(SCENARIO_SCHEMA, indent=2, sort_keys=True))
        return 0

    try:
        return run_scenario(args.scenario)
    except StructureError as exc:
        print(f"structure-failure [{exc.module}/{exc.check}]: {exc}",
              file=sys.stderr)
        return 2
    except TrifloqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
