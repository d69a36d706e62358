"""Two-level wrist control: spin planning in (alpha, beta), tendon commands,
a first-order lag stand-in for the hardware, and fingertip tracking metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .wrist import WristParams, WristPose, forward_kinematics, pose_from_tendons, tendon_lengths, wrap_angle

REACH_TOL = 1e-9


@dataclass(frozen=True)
class SpinCommand:
    alpha_rate: float  # axis reorientation, rad/s
    beta: float  # deflection amplitude, rad
    spin_rate: float  # rad/s
    duration: float  # s

    def __post_init__(self):
        if not 0 < self.beta <= math.pi / 2:
            raise ValueError("beta must be in (0, pi/2]")
        for name in ("alpha_rate", "spin_rate", "duration"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


@dataclass
class PoseTrajectory:
    t: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    hold_index: int  # first sample with beta at its commanded value

    def __len__(self):
        return len(self.t)

    def poses(self):
        return [WristPose(float(a), float(b)) for a, b in zip(self.alpha, self.beta)]


@dataclass
class MotorCommand:
    t: np.ndarray
    l_r: np.ndarray  # mm
    l_p: np.ndarray  # mm

    def check_reachable(self, w: float) -> None:
        mag = np.hypot(self.l_r, self.l_p)
        if len(mag) and mag.max() > w + REACH_TOL:
            k = int(np.argmax(mag))
            raise ValueError(f"command at t={self.t[k]:g} exceeds tendon reach {w} ({mag[k]:g})")


@dataclass(frozen=True)
class PlantConfig:
    tau: float = 0.0  # s
    step: float = 0.01  # s

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not self.step > 0:
            raise ValueError("step must be > 0")


@dataclass(frozen=True)
class TrackingReport:
    rmse: float
    r2: float | None  # None when the reference has no spread

    def to_json(self) -> dict:
        return {"rmse": self.rmse, "r2": self.r2}


def high_level_plan(cmd: SpinCommand, ramp_time: float, step: float, alpha0: float = 0.0) -> PoseTrajectory:
    """Sampled (alpha, beta) plan.

    Alpha advances at ``spin_rate + alpha_rate``; beta ramps linearly from 0
    to the commanded deflection over ``ramp_time`` and then holds.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    if not ramp_time >= 0:
        raise ValueError("ramp_time must be >= 0")
    n = int(round(cmd.duration / step))
    t = np.arange(n) * step
    alpha = np.array([wrap_angle(alpha0 + (cmd.spin_rate + cmd.alpha_rate) * tk) for tk in t])
    frac = np.ones(n) if ramp_time == 0 else np.minimum(t / ramp_time, 1.0)
    beta = cmd.beta * frac
    hold = np.flatnonzero(frac >= 1.0)
    return PoseTrajectory(t, alpha, beta, int(hold[0]) if len(hold) else n)


def low_level_commands(plan: PoseTrajectory, params: WristParams) -> MotorCommand:
    """Tendon targets for every planned sample.

    The ramp window goes through per-sample inverse kinematics; once beta
    holds, the same quadrature sinusoids are written in closed form.
    """
    n, k0 = len(plan), plan.hold_index
    l_r, l_p = np.empty(n), np.empty(n)
    for k in range(min(k0, n)):
        l_r[k], l_p[k] = tendon_lengths(WristPose(float(plan.alpha[k]), float(plan.beta[k])), params)
    if k0 < n:
        amp = params.w * np.sin(plan.beta[k0:])
        d = params.theta - plan.alpha[k0:]
        l_r[k0:], l_p[k0:] = amp * np.sin(d), amp * np.cos(d)
    cmd = MotorCommand(plan.t.copy(), l_r, l_p)
    cmd.check_reachable(params.w)
    return cmd


def _lag(u: np.ndarray, gain: float, y0: float) -> np.ndarray:
    y = np.empty_like(u)
    yk = y0
    for k, uk in enumerate(u):
        y[k] = yk
        yk = yk + gain * (uk - yk)
    return y


def simulate_plant(commands: MotorCommand, cfg: PlantConfig, initial=(0.0, 0.0)) -> MotorCommand:
    """First-order lag per tendon, ``y[k+1] = y[k] + (h/tau) (u[k] - y[k])``.

    ``tau = 0`` passes commands through. The gain is capped at 1 so that a
    lag shorter than the sample step settles in one step.
    """
    if len(commands.t) > 2 and not np.allclose(np.diff(commands.t), cfg.step, rtol=1e-9, atol=1e-12):
        raise ValueError("commands must be sampled uniformly at the plant step")
    if cfg.tau == 0:
        return MotorCommand(commands.t.copy(), commands.l_r.copy(), commands.l_p.copy())
    gain = min(cfg.step / cfg.tau, 1.0)
    return MotorCommand(commands.t.copy(), _lag(commands.l_r, gain, initial[0]), _lag(commands.l_p, gain, initial[1]))


def fingertip_trajectory(tendons: MotorCommand, params: WristParams, extension: float) -> np.ndarray:
    """Fingertip points, ``extension`` along the end-frame z axis."""
    tip = np.array([0.0, 0.0, extension])
    out = np.empty((len(tendons.t), 3))
    for k, (lr, lp) in enumerate(zip(tendons.l_r, tendons.l_p)):
        pose = pose_from_tendons(float(lr), float(lp), params)
        out[k] = forward_kinematics(pose, params.D).apply(tip)
    return out


def tracking_metrics(reference, actual) -> TrackingReport:
    ref = np.asarray(reference, dtype=float)
    act = np.asarray(actual, dtype=float)
    if ref.shape != act.shape:
        raise ValueError(f"path shapes differ: {ref.shape} vs {act.shape}")
    if len(ref) < 2:
        raise ValueError("need at least two samples")
    sq = np.sum((ref - act) ** 2, axis=-1) if ref.ndim > 1 else (ref - act) ** 2
    spread = np.sum((ref - ref.mean(axis=0)) ** 2)
    rmse = float(math.sqrt(sq.mean()))
    r2 = None if spread == 0 else float(1.0 - sq.sum() / spread)
    return TrackingReport(rmse, r2)
