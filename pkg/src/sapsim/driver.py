"""Single-run pipeline and parameter sweeps, with on-disk result caching.

A "run" is: prepare the left-well ground state, propagate over the full
barrier schedule while streaming velocity frames into the trajectory
ensemble, then track the node and reduce everything to the scaling
observables.  Full runs are minutes each, so results are cached under a
hash of the physics-relevant configuration; sweeps reuse the cache.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis
from .bohm import TrajectoryEnsemble, detect_crossings, sample_initial
from .config import RunConfig
from .propagator import propagate
from .stationary import prepare_ground_state

__all__ = ["RunResult", "run_transport", "run_cached", "sweep", "default_cache_dir"]

CACHE_VERSION = "5"
ADIABATIC_P_R = 0.99
# Crossing detection uses the track segment where the node sits in real
# density; below this floor the tracked minimum is numerical noise and
# its frame-to-frame hops would fake crossings.
NODE_DENSITY_FLOOR = 1e-10


@dataclass
class RunResult:
    config: dict
    status: str
    times: np.ndarray
    pops: np.ndarray
    mean_x: np.ndarray
    norms: np.ndarray
    j_integral: np.ndarray
    ks: np.ndarray
    ensemble_mean_v: np.ndarray
    track: analysis.NodeTrack | None
    crossings: np.ndarray  # columns (k, t_n, x_n, v_n)
    n_missing: int
    traj_times: np.ndarray
    traj_x: np.ndarray
    traj_v: np.ndarray
    psi_frames: dict
    final_psi: np.ndarray
    scalars: dict = field(default_factory=dict)

    @property
    def final_P_R(self) -> float:
        return float(self.pops[-1, 2])


def _scalars(result_args) -> dict:
    times, pops, mean_x, norms, track, crossings, n_missing, j_int = result_args
    s = {
        "final_P_L": float(pops[-1, 0]),
        "final_P_M": float(pops[-1, 1]),
        "final_P_R": float(pops[-1, 2]),
        "max_P_M": float(np.max(pops[:, 1])),
        "norm_drift": float(np.max(np.abs(norms - norms[0]))),
        "max_mean_velocity": float(np.max(np.abs(np.diff(mean_x) / np.diff(times)))),
        "n_missing_crossings": int(n_missing),
    }
    if track is not None:
        s["node_flux"] = analysis.node_flux(track)
        s["max_node_density"] = float(np.max(track.rho_n))
        total, first, second = analysis.vmax_integral(track)
        s["v_max_integral"] = total
        s["v_max_integral_first"] = first
        s["v_max_integral_second"] = second
    if crossings.shape[0]:
        s["v_max_mean"] = float(np.mean(crossings[:, 3]))
        s["n_crossings"] = int(crossings.shape[0])
    return s


def run_transport(cfg: RunConfig, with_trajectories: bool = True) -> RunResult:
    """Execute the full transport pipeline for one configuration."""
    grid = cfg.make_grid()
    p = cfg.potential_params()
    pcfg = cfg.propagation_config()
    g = pcfg.g

    prep = prepare_ground_state(p, grid, "left", g)
    psi0 = prep.psi

    ensemble = None
    if with_trajectories:
        tcfg = cfg.trajectory_config()
        x_init = sample_initial(psi0, tcfg.n_traj)
        ensemble = TrajectoryEnsemble(
            grid, x_init, 0.0, tcfg, p.x0,
            history_stride=int(cfg.raw["trajectories"]["history_stride"]),
        )

    store_times = [0.25 * p.total_time, 0.5 * p.total_time, 0.75 * p.total_time]
    status = "ok"
    record = propagate(psi0, pcfg, p, consumer=ensemble, store_times=store_times)

    times, pops, mean_x, norms = record.as_arrays()
    j_int = np.asarray(record.j_integral)

    track = None
    try:
        track = analysis.track_node(record)
    except ValueError:
        status = "no-node-track"

    crossings = np.zeros((0, 4))
    n_missing = 0
    traj_times = traj_x = traj_v = np.zeros(0)
    ks = mean_v = np.zeros(0)
    if ensemble is not None:
        if track is not None:
            sig = np.nonzero(track.rho_n > NODE_DENSITY_FLOOR)[0]
            seg = slice(sig[0], sig[-1] + 1) if sig.size else slice(0, 0)
            found, missing = detect_crossings(
                ensemble, track.times[seg], track.x_n[seg]
            )
            crossings = np.asarray(
                [(c.index, c.time, c.position, c.velocity) for c in found]
            ).reshape(-1, 4)
            n_missing = len(missing)
        traj_times, traj_x, traj_v = ensemble.history()
        ks = np.asarray(ensemble.ks)
        mean_v = np.asarray(ensemble.mean_velocity)

    if status == "ok" and float(pops[-1, 2]) < ADIABATIC_P_R:
        status = "breakdown"

    scalars = _scalars((times, pops, mean_x, norms, track, crossings, n_missing, j_int))
    scalars["ground_state_energy"] = prep.energy
    scalars["chemical_potential"] = prep.chemical_potential
    if ensemble is not None:
        scalars["order_violations"] = ensemble.check_order()
        scalars["min_traj_step"] = float(ensemble.min_step)

    return RunResult(
        config=cfg.resolved,
        status=status,
        times=times,
        pops=pops,
        mean_x=mean_x,
        norms=norms,
        j_integral=j_int,
        ks=ks,
        ensemble_mean_v=mean_v,
        track=track,
        crossings=crossings,
        n_missing=n_missing,
        traj_times=traj_times,
        traj_x=traj_x,
        traj_v=traj_v,
        psi_frames=record.psi_frames,
        final_psi=record.final_psi.values,
        scalars=scalars,
    )


# ---------------------------------------------------------------------------
# caching
# ---------------------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("SAPSIM_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "sapsim"


def _cache_key(cfg: RunConfig, with_trajectories: bool) -> str:
    relevant = {
        k: cfg.resolved[k] for k in ("grid", "potential", "dynamics", "trajectories")
    }
    if not with_trajectories:
        relevant.pop("trajectories")
    payload = json.dumps({"v": CACHE_VERSION, "cfg": relevant}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:20]


def _save(path: Path, result: RunResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {
        "times": result.times,
        "pops": result.pops,
        "mean_x": result.mean_x,
        "norms": result.norms,
        "j_integral": result.j_integral,
        "ks": result.ks,
        "ensemble_mean_v": result.ensemble_mean_v,
        "crossings": result.crossings,
        "traj_times": result.traj_times,
        "traj_x": result.traj_x,
        "traj_v": result.traj_v,
        "final_psi": result.final_psi,
    }
    for t, psi in result.psi_frames.items():
        arrays[f"psi_frame_{t}"] = psi
    if result.track is not None:
        for name in ("times", "x_n", "rho_n", "j_n", "xdot_n", "frame_indices"):
            arrays[f"track_{name}"] = getattr(result.track, name)
    meta = {
        "config": result.config,
        "status": result.status,
        "scalars": result.scalars,
        "n_missing": result.n_missing,
    }
    np.savez_compressed(path.with_suffix(".npz"), **arrays)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))


def _load(path: Path) -> RunResult:
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.load(path.with_suffix(".npz"))
    track = None
    if "track_x_n" in data:
        track = analysis.NodeTrack(
            times=data["track_times"],
            x_n=data["track_x_n"],
            rho_n=data["track_rho_n"],
            j_n=data["track_j_n"],
            xdot_n=data["track_xdot_n"],
            frame_indices=data["track_frame_indices"],
        )
    psi_frames = {
        float(k[len("psi_frame_"):]): data[k] for k in data.files if k.startswith("psi_frame_")
    }
    return RunResult(
        config=meta["config"],
        status=meta["status"],
        times=data["times"],
        pops=data["pops"],
        mean_x=data["mean_x"],
        norms=data["norms"],
        j_integral=data["j_integral"],
        ks=data["ks"],
        ensemble_mean_v=data["ensemble_mean_v"],
        track=track,
        crossings=data["crossings"],
        n_missing=meta["n_missing"],
        traj_times=data["traj_times"],
        traj_x=data["traj_x"],
        traj_v=data["traj_v"],
        psi_frames=psi_frames,
        final_psi=data["final_psi"],
        scalars=meta["scalars"],
    )


def run_cached(cfg: RunConfig, with_trajectories: bool = True, cache_dir: Path | None = None) -> RunResult:
    cache = (cache_dir or default_cache_dir())
    key = _cache_key(cfg, with_trajectories)
    path = cache / f"run_{key}"
    if path.with_suffix(".json").exists() and path.with_suffix(".npz").exists():
        return _load(path)
    t0 = time.time()
    result = run_transport(cfg, with_trajectories)
    result.scalars["wall_time_s"] = time.time() - t0
    _save(path, result)
    return result


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def _sweep_one(args):
    cfg_raw, t_p, g, cache_dir = args
    cfg = RunConfig(cfg_raw).with_updates(**{"potential.t_p": t_p, "dynamics.g": g})
    try:
        r = run_cached(cfg, cache_dir=Path(cache_dir) if cache_dir else None)
        point = {"t_p": t_p, "g": g, "status": r.status}
        point.update(
            {
                k: r.scalars.get(k)
                for k in (
                    "v_max_mean",
                    "v_max_integral",
                    "v_max_integral_first",
                    "v_max_integral_second",
                    "n_crossings",
                    "n_missing_crossings",
                    "order_violations",
                    "max_mean_velocity",
                    "max_node_density",
                    "node_flux",
                    "final_P_R",
                    "max_P_M",
                )
            }
        )
    except Exception as exc:  # per-point failures must not abort the sweep
        point = {"t_p": t_p, "g": g, "status": f"error: {exc}"}
    return point


def sweep(cfg: RunConfig, cache_dir: Path | None = None, max_workers: int | None = None):
    """Run the (t_p, g) grid and fit the three scaling laws per g.

    Returns (points, fits) where fits maps g -> {observable: PowerLawFit}.
    Points whose run is not adiabatic (final P_R < 0.99) are excluded
    from the fits so breakdown does not contaminate the scaling.
    """
    t_ps = cfg.raw["analysis"]["sweep_t_p"]
    gs = cfg.raw["analysis"]["sweep_g"]
    jobs = [(cfg.raw, float(t_p), float(g), str(cache_dir) if cache_dir else None)
            for g in gs for t_p in t_ps]
    workers = max_workers if max_workers is not None else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_one, jobs))
    else:
        points = [_sweep_one(j) for j in jobs]
    points.sort(key=lambda d: (d["g"], d["t_p"]))

    fits: dict[float, dict] = {}
    for g in gs:
        rows = [
            pt for pt in points
            if pt["g"] == g and pt["status"] == "ok" and pt.get("final_P_R", 0) >= ADIABATIC_P_R
        ]
        if len(rows) < 3:
            continue
        tp = np.array([pt["t_p"] for pt in rows])
        fits[g] = {
            "v_max_mean": analysis.fit_powerlaw(tp, np.array([pt["v_max_mean"] for pt in rows])),
            "max_mean_velocity": analysis.fit_powerlaw(
                tp, np.array([pt["max_mean_velocity"] for pt in rows])
            ),
            "max_node_density": analysis.fit_powerlaw(
                tp, np.array([pt["max_node_density"] for pt in rows])
            ),
        }
    return points, fits
