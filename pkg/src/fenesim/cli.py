"""Command line interface: ``fenesim run|check|sweep|equilibrium <config>``.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 solver non-convergence. The output directory is taken from ``--out``,
then the ``FENESIM_OUT`` environment variable, then the config.
"""

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import build_setup, dump_config, load_config
from .diagnostics import energy, fluid_mass, invariant_suite, pdf_mass
from .errors import ConfigError, PicardDivergence
from .model import validate_setup
from .solver import Simulation, level_sweep

log = logging.getLogger("fenesim")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
OUT_ENV = "FENESIM_OUT"
SCHEMA_VERSION = 1
EQUILIBRIUM_STEPS = 100
EQUILIBRIUM_TOL = 1e-9

SERIES_COLUMNS = {
    "step": "time step index",
    "time": "simulation time",
    "kinetic": "kinetic energy 1/2 int rho |v|^2",
    "entropy": "k int int M zeta F(psi) with F(s) = s log s + 1 (M^m weight in approximate mode)",
    "viscous_dissipation": "rate int mu |D(v)|^2",
    "x_dissipation": "rate k int int M |grad_x psi|^2 / psi",
    "q_dissipation": "rate k int int M A grad_q psi : grad_q psi / psi",
    "forcing_work": "rate int rho f . v",
    "residual": "E(t) - E(0) + int (dissipation - forcing work) dt; nonpositive for the exact solution",
    "rho_min": "minimum density on the grid",
    "rho_max": "maximum density on the grid",
    "psi_min": "minimum PDF ratio over grid and configuration nodes",
    "fluid_mass_drift": "int rho(t) - int rho(0)",
    "pdf_mass_drift": "int int M zeta psi(t) minus its initial value",
    "picard_iterations": "fixed-point iterations of the step ending at this time",
}


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _versions():
    import pydantic
    import scipy
    import yaml

    return {
        "fenesim": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.__version__,
        "pyyaml": yaml.__version__,
        "kernel_backend": kernels.BACKEND,
    }


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    out = args.out or os.environ.get(OUT_ENV) or cfg.output.directory
    cadence = args.cadence if args.cadence is not None else cfg.output.cadence
    if cadence < 1:
        raise ConfigError("output.cadence: must be a positive integer")
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"directory": out, "cadence": cadence})})
    setup = build_setup(cfg)
    setup.n_steps  # raises when the final time is not a multiple of dt
    report = validate_setup(setup)
    if not report.ok:
        v = report.violations[0]
        raise ConfigError(f"{v.check}: {v.message} at {v.location}")
    return cfg, setup


def series_rows(traj, cadence=1):
    """Diagnostic rows (dicts keyed by :data:`SERIES_COLUMNS`) every ``cadence`` steps."""
    disc = traj.disc
    rep = energy(traj)
    fm0 = fluid_mass(disc, traj.rho[0])
    pm0 = pdf_mass(disc, traj.pdf[0], traj.rho[0])
    last = len(traj) - 1
    rows = []
    for i, term in enumerate(rep.terms):
        if i % cadence and i != last:
            continue
        psi = disc.pdf_values(traj.pdf[i])
        rows.append({
            "step": i,
            "time": term.time,
            "kinetic": term.kinetic,
            "entropy": term.entropy,
            "viscous_dissipation": term.viscous_dissipation,
            "x_dissipation": term.x_dissipation,
            "q_dissipation": term.q_dissipation,
            "forcing_work": term.forcing_work,
            "residual": rep.residual[i],
            "rho_min": float(np.min(traj.rho[i])),
            "rho_max": float(np.max(traj.rho[i])),
            "psi_min": float(np.min(psi)),
            "fluid_mass_drift": fluid_mass(disc, traj.rho[i]) - fm0,
            "pdf_mass_drift": pdf_mass(disc, traj.pdf[i], traj.rho[i]) - pm0,
            "picard_iterations": traj.iterations[i],
        })
    return rows


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])


def write_snapshot(directory, traj, i):
    """Dump velocity, density and PDF node values of state ``i`` as raw float64 plus a JSON sidecar."""
    disc = traj.disc
    fields = {
        "velocity": disc.velocity(traj.velocity[i]),
        "density": np.asarray(traj.rho[i]),
        "pdf": disc.pdf_values(traj.pdf[i]),
    }
    order = {"velocity": "x-grid x component", "density": "x-grid", "pdf": "x-grid x q-node"}
    stem = f"step_{i:06d}"
    meta = {"step": i, "time": traj.times[i], "dtype": "float64", "byteorder": sys.byteorder,
            "layout": "row-major; x-grid index runs over x1 slowest, x2 fastest", "fields": {}}
    offset = 0
    with open(directory / f"{stem}.bin", "wb") as fh:
        for name, arr in fields.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            fh.write(arr.tobytes())
            meta["fields"][name] = {"offset_bytes": offset, "shape": list(arr.shape), "index_order": order[name]}
            offset += arr.nbytes
    (directory / f"{stem}.json").write_text(json.dumps(meta, indent=2))


def _meta(cfg, command, timings, extra=None):
    meta = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": cfg.model_dump(mode="json"),
        "versions": _versions(),
        "timings_seconds": timings,
        "series_columns": SERIES_COLUMNS,
    }
    meta.update(extra or {})
    return meta


def _simulate(setup):
    sim = Simulation(setup)
    return sim.run()


def _report_divergence(exc):
    print(f"error: {exc}", file=sys.stderr)
    if getattr(exc, "change", None):
        print("residual history: " + " ".join(f"{c:.3e}" for c in exc.change), file=sys.stderr)
    return EXIT_SOLVER


def cmd_run(args):
    cfg, setup = _prepare(args)
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    traj = _simulate(setup)
    t1 = time.perf_counter()
    rows = series_rows(traj, cfg.output.cadence)
    write_csv(out / "series.csv", list(SERIES_COLUMNS), rows)
    if cfg.output.snapshots:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for r in rows:
            write_snapshot(snap, traj, r["step"])
    t2 = time.perf_counter()
    (out / "config.yaml").write_text(dump_config(cfg))
    meta = _meta(cfg, "run", {"solve": t1 - t0, "output": t2 - t1})
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    print(f"wrote {len(rows)} rows to {out / 'series.csv'}")
    return EXIT_OK


def _print_table(rows):
    print(f"{'invariant':<24}{'worst':>14}{'tolerance':>12}  status  location")
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<24}{r.worst:>14.4e}{r.tolerance:>12.1e}  {status:<6}  {r.location}")


def cmd_check(args):
    cfg, setup = _prepare(args)
    traj = _simulate(setup)
    rows = invariant_suite(traj, cfg.tolerances)
    _print_table(rows)
    failed = [r.name for r in rows if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed))
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_sweep(args):
    cfg, setup = _prepare(args)
    ladders = cfg.sweep.ladders()
    if not ladders:
        raise ConfigError("sweep: no ladder given (set at least one of ell, m, n, n_conf, dt)")
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = level_sweep(setup, ladders)
    cols = ["axis", "level_lo", "level_hi", "distance", "ratio"]
    write_csv(out / "sweep.csv", cols, [r.__dict__ for r in rows])
    meta = _meta(cfg, "sweep", {"sweep": time.perf_counter() - t0},
                 {"sweep_columns": {"axis": "swept level", "level_lo": "coarser level",
                                    "level_hi": "finer level", "distance": "trajectory distance",
                                    "ratio": "previous distance / this distance"}})
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    for r in rows:
        print(f"{r.axis:<7}{_fmt(r.level_lo):>10} -> {_fmt(r.level_hi):<10} distance {r.distance:.4e}  ratio {r.ratio:.3f}")
    return EXIT_OK


def cmd_equilibrium(args):
    cfg, setup = _prepare(args)
    setup = replace(setup, final_time=EQUILIBRIUM_STEPS * setup.dt)
    x = setup.grid_points()
    if np.max(np.abs(setup.v0(x))) > 0:
        print("not an equilibrium: initial velocity is nonzero")
        return EXIT_INVARIANT
    sim = Simulation(setup)
    traj = sim.run()
    disc = traj.disc
    dev = max(
        max(np.max(np.abs(c - traj.velocity[0])) for c in traj.velocity),
        max(np.max(np.abs(d - traj.pdf[0])) for d in traj.pdf),
    )
    tau = max(float(np.max(np.abs(disc.stress(r, disc.pdf_values(d))))) for d, r in zip(traj.pdf, traj.rho))
    ok = dev <= EQUILIBRIUM_TOL and tau <= EQUILIBRIUM_TOL
    print(f"max coefficient deviation {dev:.3e}, max |tau| {tau:.3e} over {EQUILIBRIUM_STEPS} steps: "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {"run": cmd_run, "check": cmd_check, "sweep": cmd_sweep, "equilibrium": cmd_equilibrium}


def build_parser():
    p = argparse.ArgumentParser(prog="fenesim", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("config", help="YAML run configuration")
    p.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    p.add_argument("--cadence", type=int, help="write diagnostics every N steps")
    p.add_argument("--seed", type=int, help="seed for random initial data")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PicardDivergence as exc:
        return _report_divergence(exc)
    except np.linalg.LinAlgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
