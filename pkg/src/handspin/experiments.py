"""Experiment pipelines behind the command line: simulate, analyze, compare
strategies, wrist profile and the controller demo. Everything here returns
plain data; writing files is left to the caller."""

from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import dataclass, replace

import numpy as np

from . import analysis as an
from .cloth import SimulationDiverged
from .config import RunConfig
from .controller import (
    PlantConfig,
    SpinCommand,
    fingertip_trajectory,
    high_level_plan,
    low_level_commands,
    simulate_plant,
    tracking_metrics,
)
from .driving import DriveState, strategy_to_dict
from .simulation import Scenario, Trajectory, period_propagator, simulate
from .wrist import AntiParallelogramParams, WristParams, optimize_profile, profile_deviation, rolling_radius

CSV_FORMAT = "%.9g"


# -- output helpers -----------------------------------------------------------

def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else CSV_FORMAT % v) for v in row) + "\n")
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    """Stable JSON (sorted keys, non-finite numbers as null)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


# -- trajectory storage ---------------------------------------------------------

_TRAJ_FIELDS = ("t", "pos", "vel", "phi", "radius", "speed", "center", "ledger", "mass", "driven")


def trajectory_bytes(traj: Trajectory) -> bytes:
    """Full-precision ``.npz`` archive with a fixed timestamp, so equal
    trajectories give equal bytes."""
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        arrays = {name: getattr(traj, name) for name in _TRAJ_FIELDS}
        arrays["dt"] = np.array(traj.dt)
        for name, arr in arrays.items():
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            body = io.BytesIO()
            np.lib.format.write_array(body, np.ascontiguousarray(arr), allow_pickle=False)
            zf.writestr(info, body.getvalue())
    return buf.getvalue()


def load_trajectory(path) -> Trajectory:
    with np.load(path, allow_pickle=False) as z:
        a = {k: z[k] for k in z.files}
    drive = np.flatnonzero(a["driven"])[0]
    states = [
        DriveState(float(a["t"][k]), float(a["phi"][k]), float(a["radius"][k]), float(a["speed"][k]),
                   a["center"][k].copy(), a["pos"][k, drive].copy(), a["vel"][k, drive].copy())
        for k in range(len(a["t"]))
    ]
    return Trajectory(a["t"], a["pos"], a["vel"], a["phi"], a["radius"], a["speed"], a["center"], a["ledger"],
                      states, a["mass"], a["driven"].astype(bool), a["dt"].item())


def trajectory_csv(traj: Trajectory) -> str:
    rows = []
    for k, t in enumerate(traj.t):
        for i in range(traj.pos.shape[1]):
            rows.append((float(t), i, *traj.pos[k, i], *traj.vel[k, i]))
    return csv_text(("t", "particle_index", "x", "y", "z", "vx", "vy", "vz"), rows)


def unfolding_csv(t, degree) -> str:
    return csv_text(("t", "degree"), zip(map(float, t), map(float, degree)))


# -- simulate -------------------------------------------------------------------

@dataclass
class SimulationResult:
    name: str
    scenario: Scenario
    trajectory: Trajectory
    degree: np.ndarray
    summary: dict


def steady_start(scenario: Scenario, cfg: RunConfig) -> float:
    """First time used for steady-state statistics, on the frame grid."""
    t = max(cfg.analysis.steady_start, scenario.strategy.settle_time)
    dt = scenario.integrator.dt
    return math.ceil(t / dt - 1e-9) * dt


def summarize(scenario: Scenario, traj: Trajectory, degree: np.ndarray, cfg: RunConfig) -> dict:
    t_ss = steady_start(scenario, cfg)
    window = degree[traj.t >= t_ss - 1e-9]
    out = {
        "strategy": strategy_to_dict(scenario.strategy),
        "frames": int(len(traj.t)),
        "duration": float(traj.t[-1]) if len(traj.t) else 0.0,
        "final_unfolding": float(degree[-1]) if len(degree) else None,
        "max_unfolding": float(degree.max()) if len(degree) else None,
        "time_to_threshold": an.time_to_threshold(traj.t, degree, cfg.analysis.unfold_threshold) if len(degree) else None,
        "threshold": cfg.analysis.unfold_threshold,
        "steady_start": t_ss,
        "steady_mean": float(window.mean()) if len(window) else None,
        "steady_cv": an.coefficient_of_variation(window) if len(window) else None,
    }
    return out


def run_simulation(cfg: RunConfig, name: str | None = None, duration: float | None = None) -> SimulationResult:
    name = name or cfg.strategy
    scenario = cfg.scenario(name)
    if duration is not None:
        scenario = replace(scenario, duration=duration)
    traj = simulate(scenario)
    ref = an.reference_area(scenario.mesh.circumradius)
    degree = an.unfolding_series(traj, ref)
    return SimulationResult(name, scenario, traj, degree, summarize(scenario, traj, degree, cfg))


# -- analyze --------------------------------------------------------------------

@dataclass
class AnalysisResult:
    report: dict
    converged: bool
    stability: an.StabilityReport


def analyze(cfg: RunConfig, scenario: Scenario, traj: Trajectory, monodromy: bool = True) -> AnalysisResult:
    """Poincare, Floquet, energy, phase-lock and harmonic checks.

    Only the window after the strategy's rise time is used.
    """
    opts = cfg.analysis
    T = scenario.strategy.period
    t0 = scenario.strategy.settle_time
    need = t0 + opts.min_periods * T
    if len(traj.t) == 0 or traj.t[-1] < need - 1e-9:
        raise ValueError(f"trajectory ends at {traj.t[-1] if len(traj.t) else 0:g} s; analysis needs {need:g} s "
                         f"(rise time plus {opts.min_periods} periods)")
    samples = an.poincare_sample(traj, T, t0)
    fp = an.fixed_point(samples, opts.fixed_point_tol)
    n_per = int(round(T / traj.dt))
    k_last = int(math.ceil(t0 / traj.dt - 1e-9)) + n_per * (len(samples) - 1)
    report = an.StabilityReport(fp.residuals, fp.state, fp.converged)
    if monodromy:
        x_star = fp.state if fp.converged else samples[-1]
        prop = period_propagator(scenario, traj.drive_states[k_last], T)
        report.monodromy = an.monodromy(x_star, prop, opts.fd_eps)
        report.multipliers, report.verdict = an.floquet_multipliers(report.monodromy, opts.margin)

    t_end = float(traj.t[k_last])
    energy = an.energy_balance(traj, t_end - n_per * traj.dt, n_per * traj.dt)
    t_ss = steady_start(scenario, cfg)
    lock = an.trajectory_phase_lock(traj, t_ss)
    i_ss = traj.frame_index(t_ss)
    drive_x = traj.pos[i_ss:, traj.driven][:, 0, 0] - traj.center[i_ss:, 0]
    omega = 2 * math.pi / T
    try:
        spectrum = an.harmonic_spectrum(drive_x, traj.dt, omega, opts.harmonic_threshold)
        harmonics = {"fundamental": omega, "peaks": spectrum.peaks, "off_harmonic": spectrum.off_harmonic, "flagged": spectrum.flagged}
    except ValueError as exc:
        harmonics = {"fundamental": omega, "error": str(exc)}
    out = {
        "strategy": strategy_to_dict(scenario.strategy),
        "period": T,
        "t_start": t0,
        "stability": report.to_json(),
        "energy": {**energy.to_json(), "window": [t_end - n_per * traj.dt, t_end]},
        "phase_lock": {"mean_offset": lock.mean_offset, "std_offset": lock.std_offset, "skipped": lock.skipped},
        "harmonics": harmonics,
    }
    return AnalysisResult(out, fp.converged, report)


# -- compare --------------------------------------------------------------------

COMPARE_COLUMNS = ("strategy", "max_unfolding", "final_unfolding", "steady_cv", "verdict", "max_multiplier", "error")


def compare_strategies(cfg: RunConfig, monodromy: bool = True) -> list[dict]:
    rows = []
    for name in cfg.compare:
        row = dict.fromkeys(COMPARE_COLUMNS)
        row["strategy"] = name
        try:
            sim = run_simulation(cfg, name)
            row.update(max_unfolding=sim.summary["max_unfolding"], final_unfolding=sim.summary["final_unfolding"],
                       steady_cv=sim.summary["steady_cv"])
            res = analyze(cfg, sim.scenario, sim.trajectory, monodromy=monodromy)
            row.update(verdict=res.stability.verdict, max_multiplier=res.stability.max_multiplier)
        except (SimulationDiverged, an.PropagationError, ValueError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def comparison_csv(rows) -> str:
    out = []
    for r in rows:
        out.append(tuple("" if r[c] is None else (r[c] if isinstance(r[c], str) else float(r[c])) for c in COMPARE_COLUMNS))
    return csv_text(COMPARE_COLUMNS, out)


# -- wrist profile ----------------------------------------------------------------

def wrist_profile(cfg: RunConfig) -> tuple[dict, str]:
    """Rolling-radius table and deviation; runs the optimiser when a sweep is configured."""
    o = cfg.wrist_profile
    result = {}
    if o.sweep:
        sw = dict(o.sweep)
        res = int(sw.pop("resolution", 11))
        unknown = set(sw) - {"h_o", "w_c", "h_c"}
        if unknown:
            raise ValueError(f"unknown sweep keys {sorted(unknown)}")
        best, dev = optimize_profile(sw.get("h_o", (o.h_o, o.h_o)), sw.get("w_c", (o.w_c, o.w_c)),
                                     sw.get("h_c", (o.h_c, o.h_c)), resolution=res, n_samples=o.n_samples)
        params = best
        result["optimizer"] = {"h_o": best.h_o, "w_c": best.w_c, "h_c": best.h_c, "max_deviation": dev, "resolution": res}
    else:
        params = AntiParallelogramParams(o.h_o, o.w_c, o.h_c)
        if not params.is_feasible():
            raise ValueError(f"infeasible linkage parameters: need h_c > 2 h_o, got {params}")
    dev, psi_worst = profile_deviation(params, o.n_samples)
    psi = np.linspace(0.0, math.pi / 4, o.n_samples)
    r = [rolling_radius(params, float(p)) for p in psi]
    result.update({
        "params": {"h_o": params.h_o, "w_c": params.w_c, "h_c": params.h_c},
        "r0": rolling_radius(params, 0.0),
        "max_deviation": dev,
        "worst_psi": psi_worst,
        "below_1mm": dev < 1.0,
        "n_samples": o.n_samples,
    })
    return result, csv_text(("psi", "r"), zip(psi.tolist(), r))


# -- controller demo ---------------------------------------------------------------

def _wrist(cfg: RunConfig) -> WristParams:
    w = cfg.controller.wrist
    return WristParams(D=w.D, w=w.w, theta=math.radians(w.theta_deg))


def controller_paths(cfg: RunConfig, tau: float):
    """Reference (perfect plant) and lagged fingertip paths for the configured command."""
    c = cfg.controller
    params = _wrist(cfg)
    cmd = SpinCommand(c.alpha_rate, math.radians(c.beta_deg), c.spin_rate, c.duration)
    plan = high_level_plan(cmd, c.ramp_time, c.step)
    motor = low_level_commands(plan, params)
    ref = fingertip_trajectory(motor, params, c.extension)
    act = fingertip_trajectory(simulate_plant(motor, PlantConfig(tau, c.step)), params, c.extension)
    return plan.t, ref, act


def controller_demo(cfg: RunConfig):
    c = cfg.controller
    t, ref, act = controller_paths(cfg, c.tau)
    report = tracking_metrics(ref, act) if len(t) >= 2 else None
    grid = []
    for tau in c.tau_grid:
        _, r, a = controller_paths(cfg, tau)
        if len(r) >= 2:
            grid.append({"tau": tau, **tracking_metrics(r, a).to_json()})
    summary = {
        "command": {"alpha_rate": c.alpha_rate, "beta_deg": c.beta_deg, "spin_rate": c.spin_rate,
                    "duration": c.duration, "ramp_time": c.ramp_time, "step": c.step},
        "tau": c.tau,
        "tracking": report.to_json() if report else None,
        "tau_grid": grid,
    }
    return summary, path_csv(t, ref), path_csv(t, act)


def path_csv(t, path) -> str:
    return csv_text(("t", "x", "y", "z"), ((float(tk), *pk) for tk, pk in zip(t, path)))
