"""Acceptance criteria 1-10, one test each.

Every test records a single PASS/FAIL line (listed again in the pytest
terminal summary) and then asserts the same condition. The default
acceleration-ramp run is simulated once and shared by criteria 4-8.
"""

import math
import time

import numpy as np
import pytest

from handspin import analysis as an
from handspin import experiments as ex
from handspin.cli import main
from handspin.cloth import ClothEngine, ClothParams, ClothState, IntegratorConfig, Spring
from handspin.config import load
from handspin.controller import MotorCommand, PlantConfig, simulate_plant, tracking_metrics
from handspin.wrist import AntiParallelogramParams, WristParams, WristPose, forward_kinematics, pose_from_tendons, profile_deviation, rolling_radius, tendon_lengths


class Timed:
    def __init__(self, fn):
        t0 = time.perf_counter()
        self.value = fn()
        self.seconds = time.perf_counter() - t0


@pytest.fixture(scope="module")
def cfg():
    return load()


@pytest.fixture(scope="module")
def runs(cfg):
    """Default simulations of every compared strategy, timed."""
    return {name: Timed(lambda n=name: ex.run_simulation(cfg, n)) for name in cfg.compare}


@pytest.fixture(scope="module")
def analyses(cfg, runs):
    """Noise-off analysis with monodromy for every strategy, timed."""
    return {
        name: Timed(lambda r=r.value: ex.analyze(cfg, r.scenario, r.trajectory, monodromy=True))
        for name, r in runs.items()
    }


def test_criterion_01_rolling_radius(acceptance):
    t0 = time.perf_counter()
    p = AntiParallelogramParams(8.0, 35.0, 47.0)
    dev, _ = profile_deviation(p, 1000)
    r0 = rolling_radius(p, 0.0)
    dt = time.perf_counter() - t0
    ok = dev < 1.0 and abs(r0 - 31.5) < 1e-9 and dt < 1.0
    acceptance(1, ok, f"max |r - r0| = {dev:.4f} mm, r(0) = {r0:.12g} mm, {dt:.3f} s")
    assert ok


def test_criterion_02_kinematics(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    params = WristParams()
    n = 10_000
    alpha = rng.uniform(-math.pi, math.pi, n)
    beta = rng.uniform(0.0, math.pi / 2, n)
    beta[beta == 0.0] = 1e-3
    worst = dict(ortho=0.0, norm=0.0, pyth=0.0, trip=0.0)
    for a, b in zip(alpha, beta):
        pose = WristPose(float(a), float(b))
        t = forward_kinematics(pose, params.D)
        worst["ortho"] = max(worst["ortho"], float(np.abs(t.rotation.T @ t.rotation - np.eye(3)).max()))
        worst["norm"] = max(worst["norm"], abs(float(np.linalg.norm(t.translation)) - params.D))
        lr, lp = tendon_lengths(pose, params)
        worst["pyth"] = max(worst["pyth"], abs(lr * lr + lp * lp - params.w**2 * math.sin(b) ** 2))
        lr2, lp2 = tendon_lengths(pose_from_tendons(lr, lp, params), params)
        worst["trip"] = max(worst["trip"], abs(lr2 - lr), abs(lp2 - lp))
    dt = time.perf_counter() - t0
    ok = all(v <= 1e-9 for v in worst.values()) and dt < 1.0
    acceptance(2, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {dt:.3f} s")
    assert ok


def test_criterion_03_integrator(acceptance):
    t0 = time.perf_counter()
    g = -9.81
    cfg = IntegratorConfig(dt=1e-3, substeps=10)
    h = cfg.h
    eng = ClothEngine([], [], ClothParams(gravity=g), cfg)
    s = ClothState([[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], [1.0], [False])
    fall_err = 0.0
    for n in range(1, 10_001):
        eng.substep(s)
        fall_err = max(fall_err, abs(s.vel[0, 2] - n * h * g) / abs(n * h * g),
                       abs(s.pos[0, 2] - g * h * h * n * (n + 1) / 2) / abs(g * h * h * n * (n + 1) / 2))
    pair = ClothEngine([Spring(0, 1, 1.0, 1e4, 1e4)], [], ClothParams(gravity=0.0), IntegratorConfig(dt=1e-4, substeps=10))
    s2 = ClothState([[0.0, 0, 0], [1.2, 0, 0]], [[0.1, 0.3, 0], [-0.1, -0.3, 0]], [0.01, 0.01], [False, False])
    mom_err = 0.0
    for _ in range(300):  # about seven oscillation periods
        s2 = pair.step(s2)
        mom_err = max(mom_err, float(np.abs(s2.pos.mean(axis=0) - [0.6, 0, 0]).max()),
                      float(np.abs(s2.vel.sum(axis=0)).max()))
    dt = time.perf_counter() - t0
    ok = fall_err < 1e-12 and mom_err < 1e-6 and dt < 1.0
    acceptance(3, ok, f"free fall rel err {fall_err:.1e} over 1e4 substeps, two-body {mom_err:.1e}, {dt:.3f} s")
    assert ok


def test_criterion_04_accel_unfolding(acceptance, cfg, runs):
    run = runs["accel_ramp"]
    r = run.value
    t, d = r.trajectory.t, r.degree
    t90 = an.time_to_threshold(t, d, 0.90)
    after = d[t >= t90 - 1e-9] if t90 is not None else np.zeros(1)
    steady = d[t >= r.summary["steady_start"] - 1e-9]
    mean_a, cv_a = float(after.mean()), an.coefficient_of_variation(after)
    mean_s, cv_s = float(steady.mean()), an.coefficient_of_variation(steady)
    ok = (t90 is not None and t90 <= 5.0 and mean_a >= 0.90 and cv_a <= 0.05
          and mean_s >= 0.90 and cv_s <= 0.05 and run.seconds < 30)
    acceptance(4, ok, f"t90 {t90} s; after t90 mean {mean_a:.4f} cv {cv_a:.4f}; "
                      f"t>={r.summary['steady_start']:g} s mean {mean_s:.4f} cv {cv_s:.4f}; {run.seconds:.1f} s")
    assert ok


def test_criterion_05_ordering(acceptance, runs):
    mx = {k: float(v.value.degree.max()) for k, v in runs.items()}
    total = sum(v.seconds for v in runs.values())
    ok = mx["accel_ramp"] > mx["directional_throw"] > mx["periodic_injection"] and total < 90
    acceptance(5, ok, ", ".join(f"{k} {v:.4f}" for k, v in mx.items()) + f"; {total:.1f} s")
    assert ok


def test_criterion_06_floquet(acceptance, analyses):
    x = np.random.default_rng(0).normal(size=48)
    oracle = float(np.abs(an.monodromy(x, lambda y: 0.5 * y) - 0.5 * np.eye(48)).max())
    lam = {k: v.value.stability.max_multiplier for k, v in analyses.items()}
    total = sum(v.seconds for v in analyses.values())
    ok = (lam["accel_ramp"] < 0.95 and lam["directional_throw"] > 1.05 and lam["periodic_injection"] > 1.05
          and oracle < 1e-6 and total < 300)
    acceptance(6, ok, ", ".join(f"{k} |lambda| {v:.4f}" for k, v in lam.items())
               + f"; contraction oracle {oracle:.1e}; {total:.1f} s")
    assert ok


def test_criterion_07_energy(acceptance, analyses):
    e = analyses["accel_ramp"].value.report["energy"]
    ok = e["residual"] <= 0.10
    acceptance(7, ok, f"W_in {e['w_in']:.5g} J, W_diss {e['w_diss']:.5g} J, residual {e['residual']:.4f}")
    assert ok


def test_criterion_08_poincare(acceptance, analyses):
    res = analyses["accel_ramp"].value.stability.residuals
    tail = res[-5:]
    ok = len(tail) == 5 and bool(np.all(np.diff(tail) < 0))
    acceptance(8, ok, "last 5 residuals " + ", ".join(f"{r:.4g}" for r in tail))
    assert ok


def _brute_metrics(ref, act):
    n = len(ref)
    sq = 0.0
    for a, b in zip(ref, act):
        sq += sum((a[i] - b[i]) ** 2 for i in range(len(a)))
    mean = [sum(p[i] for p in ref) / n for i in range(len(ref[0]))]
    tot = 0.0
    for p in ref:
        tot += sum((p[i] - mean[i]) ** 2 for i in range(len(p)))
    return math.sqrt(sq / n), 1.0 - sq / tot


def test_criterion_09_controller(acceptance, cfg):
    t_start = time.perf_counter()
    _, ref, act = ex.controller_paths(cfg, 0.0)
    perfect = tracking_metrics(ref, act)
    grid = [tracking_metrics(*ex.controller_paths(cfg, tau)[1:]).rmse for tau in cfg.controller.tau_grid]
    monotone = all(b > a for a, b in zip(grid, grid[1:]))

    tau, h = 0.05, 0.0005
    n = int(5 * tau / h)
    u = MotorCommand(np.arange(n) * h, np.ones(n), np.zeros(n))
    y = simulate_plant(u, PlantConfig(tau, h)).l_r
    step_err = float(np.max(np.abs(y - (1 - np.exp(-u.t / tau)))))

    rng = np.random.default_rng(9)
    _, ref100, act100 = ex.controller_paths(cfg, cfg.controller.tau)
    k = np.sort(rng.choice(len(ref100), 100, replace=False))
    ref100, act100 = ref100[k], act100[k]
    m = tracking_metrics(ref100, act100)
    b_rmse, b_r2 = _brute_metrics(ref100.tolist(), act100.tolist())
    brute_err = max(abs(m.rmse - b_rmse), abs(m.r2 - b_r2))
    dt = time.perf_counter() - t_start

    ok = (perfect.rmse == 0.0 and perfect.r2 == 1.0 and monotone and step_err < h / tau
          and brute_err < 1e-12 and dt < 5.0)
    acceptance(9, ok, f"tau=0 RMSE {perfect.rmse} R2 {perfect.r2}; grid RMSE "
               + "/".join(f"{g:.3g}" for g in grid)
               + f"; step err {step_err:.1e} (h/tau {h / tau:.0e}); brute-force diff {brute_err:.1e}; {dt:.2f} s")
    assert ok


def test_criterion_10_determinism(acceptance, tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "run"
    outputs = []
    for _ in range(2):
        assert main(["simulate", "--seed", "0", "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".json")})
    dt = time.perf_counter() - t0
    same = outputs[0] == outputs[1]
    ok = same and len(outputs[0]) == 4 and dt < 60
    acceptance(10, ok, f"{len(outputs[0])} files ({', '.join(outputs[0])}) byte-identical: {same}; {dt:.1f} s")
    assert ok
