"""Drive-point model: the three initiation strategies and circular contact motion."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Union

import numpy as np

from .cloth import Spring

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AccelRamp:
    """Radius and angular speed both ramp linearly, then hold."""

    R0: float
    R_T: float
    V0: float
    V_T: float
    T_k: float
    type: str = "accel_ramp"

    def __post_init__(self):
        _check_positive(R0=self.R0, R_T=self.R_T, T_k=self.T_k, V_T=self.V_T)
        _check_nonneg(V0=self.V0)

    def radius(self, t: float) -> float:
        return self.R0 + (self.R_T - self.R0) * min(t, self.T_k) / self.T_k

    def speed(self, t: float) -> float:
        return self.V0 + (self.V_T - self.V0) * min(t, self.T_k) / self.T_k

    @property
    def period(self) -> float:
        return TWO_PI / self.V_T

    @property
    def settle_time(self) -> float:
        return self.T_k


@dataclass(frozen=True)
class DirectionalThrow:
    """Full speed from the start; radius grows along a quarter ellipse and
    arrives at ``R_T`` with zero slope at ``T_k``."""

    R0: float
    R_T: float
    V_T: float
    T_k: float
    type: str = "directional_throw"

    def __post_init__(self):
        _check_positive(R0=self.R0, R_T=self.R_T, T_k=self.T_k, V_T=self.V_T)

    def radius(self, t: float) -> float:
        s = min(t, self.T_k) / self.T_k
        return self.R0 + (self.R_T - self.R0) * math.sqrt(max(0.0, 1.0 - (1.0 - s) ** 2))

    def speed(self, t: float) -> float:
        return self.V_T

    @property
    def period(self) -> float:
        return TWO_PI / self.V_T

    @property
    def settle_time(self) -> float:
        return self.T_k


@dataclass(frozen=True)
class PeriodicInjection:
    """Fixed radius, sinusoidally modulated angular speed."""

    R: float
    V_m: float
    V_a: float
    T_m: float
    type: str = "periodic_injection"

    def __post_init__(self):
        _check_positive(R=self.R, T_m=self.T_m, V_m=self.V_m)
        _check_nonneg(V_a=self.V_a)
        if self.V_a >= self.V_m:
            raise ValueError("periodic injection needs V_a < V_m")

    def radius(self, t: float) -> float:
        return self.R

    def speed(self, t: float) -> float:
        return self.V_m + self.V_a * math.sin(TWO_PI * t / self.T_m)

    @property
    def period(self) -> float:
        return self.T_m

    @property
    def settle_time(self) -> float:
        return 0.0


StrategyParams = Union[AccelRamp, DirectionalThrow, PeriodicInjection]

STRATEGIES = {cls.type: cls for cls in (AccelRamp, DirectionalThrow, PeriodicInjection)}


def _check_positive(**kw):
    for k, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{k} must be > 0, got {v}")


def _check_nonneg(**kw):
    for k, v in kw.items():
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{k} must be >= 0, got {v}")


def strategy_from_dict(d: dict) -> StrategyParams:
    d = dict(d)
    kind = d.pop("type", None)
    if kind not in STRATEGIES:
        raise ValueError(f"unknown strategy type {kind!r}; expected one of {sorted(STRATEGIES)}")
    cls = STRATEGIES[kind]
    fields = set(cls.__dataclass_fields__) - {"type"}
    unknown = set(d) - fields
    if unknown:
        raise ValueError(f"unknown keys for {kind}: {sorted(unknown)}")
    missing = fields - set(d)
    if missing:
        raise ValueError(f"missing keys for {kind}: {sorted(missing)}")
    return cls(**{k: float(v) for k, v in d.items()})


def strategy_to_dict(s: StrategyParams) -> dict:
    d = asdict(s)
    return {"type": d.pop("type"), **d}


def with_revolutions(strategy: StrategyParams, n_rev: float) -> StrategyParams:
    """Set the rise time from a revolution count at the target speed."""
    if isinstance(strategy, PeriodicInjection):
        raise ValueError("periodic injection has no rise time")
    return replace(strategy, T_k=n_rev * TWO_PI / strategy.V_T)


def drive_signal(strategy: StrategyParams, t: float) -> tuple[float, float]:
    """Commanded ``(radius, angular speed)`` at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return strategy.radius(t), strategy.speed(t)


@dataclass(frozen=True)
class PerturbationConfig:
    amplitude: float = 0.0  # per-axis uniform half-width, m
    seed: int = 0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError("perturbation amplitude must be >= 0")


@dataclass(frozen=True)
class DriveState:
    t: float
    phi: float
    R: float
    V: float
    center: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    def nominal_position(self) -> np.ndarray:
        return self.center + self.R * np.array([math.cos(self.phi), math.sin(self.phi), 0.0])


def initial_drive(strategy: StrategyParams, center=(0.0, 0.0, 0.0), phi0: float = 0.0) -> DriveState:
    c = np.asarray(center, dtype=float)
    R, V = drive_signal(strategy, 0.0)
    cp, sp = math.cos(phi0), math.sin(phi0)
    pos = c + R * np.array([cp, sp, 0.0])
    vel = R * V * np.array([-sp, cp, 0.0])
    return DriveState(0.0, phi0, R, V, c, pos, vel)


def advance_drive(state: DriveState, strategy: StrategyParams, dt: float, amplitude: float = 0.0, rng=None) -> DriveState:
    """Advance the contact point by ``dt`` along its circular path.

    The velocity is the unperturbed circle velocity; the radial rate is the
    secant of R over the step, which stays finite where R(t) has a
    vertical tangent.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    t1 = state.t + dt
    phi = state.phi + strategy.speed(state.t) * dt
    R, V = drive_signal(strategy, t1)
    dR = (R - strategy.radius(state.t)) / dt
    c, s = math.cos(phi), math.sin(phi)
    radial = np.array([c, s, 0.0])
    pos = state.center + R * radial
    if amplitude > 0:
        pos = pos + rng.uniform(-amplitude, amplitude, size=3)
    vel = dR * radial + R * V * np.array([-s, c, 0.0])
    return DriveState(t1, phi, R, V, state.center, pos, vel)


class Driver:
    """Callable drive update for the cloth engine; owns its drive state."""

    def __init__(self, strategy: StrategyParams, state: DriveState, perturb: PerturbationConfig | None = None, rng=None):
        self.strategy = strategy
        self.state = state
        self.amplitude = perturb.amplitude if perturb else 0.0
        if self.amplitude > 0 and rng is None:
            raise ValueError("a perturbed driver needs an rng")
        self.rng = rng

    def __call__(self, h: float):
        self.state = advance_drive(self.state, self.strategy, h, self.amplitude, self.rng)
        return self.state.position[None, :], self.state.velocity[None, :]


def build_drive_springs(drive_index: int, particle_indices, positions, k_s: float, k_c: float, c: float) -> list[Spring]:
    """Spokes from the drive particle to each fabric particle.

    Natural lengths are the distances in ``positions``, which must be the
    fully unfolded reference configuration.
    """
    p = np.asarray(positions, dtype=float)
    return [
        Spring(drive_index, int(j), float(np.linalg.norm(p[j] - p[drive_index])), k_s, k_c, c)
        for j in particle_indices
    ]
