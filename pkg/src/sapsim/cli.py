"""Command-line entry point.

Subcommands:

  groundstate   relax a single-well ground state and dump the profile
  run           full transport run: propagation, trajectories, node track
  sweep         pulse-duration/interaction sweep with power-law fits

Each writes deterministic CSV/JSON artifacts plus a config echo into
--out.  Exit codes: 0 success, 2 configuration, 3 state preparation,
4 propagation, 5 trajectory integration, 6 analysis.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import driver
from .bohm import IntegrationError, StiffnessError
from .config import RunConfig, apply_overrides, load_config
from .grid import ConfigurationError
from .potential import schedule_snapshot
from .propagator import PropagationError
from .stationary import PreparationError, prepare_ground_state

EXIT_CONFIG = 2
EXIT_PREPARATION = 3
EXIT_PROPAGATION = 4
EXIT_TRAJECTORY = 5
EXIT_ANALYSIS = 6


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return f"{x:.12g}" if isinstance(x, (float, np.floating)) else str(x)


def _prepare_out(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.yaml")


def cmd_groundstate(cfg: RunConfig, out: Path, args) -> int:
    grid = cfg.make_grid()
    p = cfg.potential_params()
    g = cfg.raw["dynamics"]["g"]
    prep = prepare_ground_state(p, grid, args.well, g)
    psi = prep.psi.values
    v = schedule_snapshot(0.0, p, grid)
    _write_csv(
        out / "groundstate.csv",
        ["x", "density", "psi_re", "psi_im", "potential"],
        (
            (_fmt(x), _fmt(abs(a) ** 2), _fmt(a.real), _fmt(a.imag), _fmt(vv))
            for x, a, vv in zip(grid.x, psi, v)
        ),
    )
    summary = {
        "well": args.well,
        "g": g,
        "energy": prep.energy,
        "chemical_potential": prep.chemical_potential,
        "relaxation_steps": prep.steps,
        "norm": prep.psi.norm,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(f"ground state ({args.well}, g={g}): E = {prep.energy:.8f}")
    return 0


def _write_run(result: driver.RunResult, out: Path) -> None:
    _write_csv(
        out / "populations.csv",
        ["t", "P_L", "P_M", "P_R", "mean_x"],
        (
            tuple(map(_fmt, (t, *pop, mx)))
            for t, pop, mx in zip(result.times, result.pops, result.mean_x)
        ),
    )
    if result.track is not None:
        tr = result.track
        _write_csv(
            out / "node_track.csv",
            ["t", "x_n", "density_n", "current_n", "xdot_n"],
            (
                tuple(map(_fmt, row))
                for row in zip(tr.times, tr.x_n, tr.rho_n, tr.j_n, tr.xdot_n)
            ),
        )
    if result.traj_x.size:
        _write_csv(
            out / "trajectories.csv",
            ["trajectory", "t", "x", "v"],
            (
                (k, _fmt(t), _fmt(result.traj_x[i, k]), _fmt(result.traj_v[i, k]))
                for i, t in enumerate(result.traj_times)
                for k in range(result.traj_x.shape[1])
            ),
        )
    if result.crossings.size:
        _write_csv(
            out / "crossings.csv",
            ["trajectory", "t_cross", "x_cross", "v_cross"],
            (
                (int(row[0]), _fmt(row[1]), _fmt(row[2]), _fmt(row[3]))
                for row in result.crossings
            ),
        )
    summary = {"status": result.status, **result.scalars}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))


def cmd_run(cfg: RunConfig, out: Path, args) -> int:
    if args.fresh:
        result = driver.run_transport(cfg, with_trajectories=not args.no_trajectories)
    else:
        result = driver.run_cached(cfg, with_trajectories=not args.no_trajectories)
    _write_run(result, out)
    print(f"status: {result.status}   final P_R = {result.final_P_R:.6f}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, args) -> int:
    points, fits = driver.sweep(cfg)
    cols = [
        "t_p", "g", "v_max_mean", "v_max_integral", "max_mean_velocity",
        "max_node_density", "node_flux", "final_P_R", "max_P_M", "status",
    ]
    _write_csv(
        out / "sweep.csv",
        cols,
        (
            tuple("" if pt.get(c) is None else _fmt(pt.get(c)) for c in cols)
            for pt in points
        ),
    )
    fit_doc = {
        str(g): {
            name: {**asdict(fit), "residuals": [float(r) for r in fit.residuals]}
            for name, fit in by_obs.items()
        }
        for g, by_obs in fits.items()
    }
    (out / "fits.json").write_text(json.dumps(fit_doc, indent=2))
    if not fits:
        print("not enough adiabatic points for power-law fits (need >= 3 per g)",
              file=sys.stderr)
    for g, by_obs in sorted(fits.items()):
        exps = ", ".join(f"{k}: {v.exponent:+.3f}" for k, v in by_obs.items())
        print(f"g = {g}: {exps}")
    bad = [pt for pt in points if str(pt["status"]).startswith("error")]
    if bad:
        print(f"{len(bad)} sweep point(s) failed", file=sys.stderr)
        return EXIT_ANALYSIS
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sapsim", description="triple-well matter-wave transport simulator"
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, default=None, help="YAML config file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument(
            "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
            help="config override (repeatable)",
        )

    gs = sub.add_parser("groundstate", help="relax and dump a single-well ground state")
    common(gs)
    gs.add_argument("--well", choices=["left", "middle", "right"], default="left")
    gs.set_defaults(func=cmd_groundstate)

    rn = sub.add_parser("run", help="full transport run")
    common(rn)
    rn.add_argument("--fresh", action="store_true", help="ignore the result cache")
    rn.add_argument("--no-trajectories", action="store_true")
    rn.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="scaling sweep over pulse duration and g")
    common(sw)
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, args.override)
        out = Path(args.out)
        _prepare_out(cfg, out)
        return args.func(cfg, out, args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreparationError as exc:
        print(f"state preparation failed: {exc}", file=sys.stderr)
        return EXIT_PREPARATION
    except PropagationError as exc:
        print(f"propagation failed: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    except (StiffnessError, IntegrationError) as exc:
        print(f"trajectory integration failed: {exc}", file=sys.stderr)
        return EXIT_TRAJECTORY
    except ValueError as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
