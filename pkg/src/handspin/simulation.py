"""Run the cloth engine under a drive strategy and record frames."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cloth import ClothEngine, ClothParams, ClothState, IntegratorConfig, build_octagon_mesh, drape
from .driving import Driver, DriveState, PerturbationConfig, StrategyParams, initial_drive
from .streams import substream


@dataclass(frozen=True)
class MeshConfig:
    circumradius: float = 0.15  # m
    total_mass: float = 0.04  # kg
    k_s: float = 200.0  # N/m
    k_c: float = 50.0  # N/m
    c: float = 0.02  # N s/m
    drive_offset: tuple = (-0.06, 0.0, 0.0)  # contact point relative to the fabric centre, m
    droop: float = 0.3  # initial spoke angle from straight down, rad
    square_edges: bool = True

    def __post_init__(self):
        if not (self.circumradius > 0 and self.total_mass > 0 and self.k_s > 0):
            raise ValueError("circumradius, total_mass and k_s must be > 0")
        if not (self.k_c >= 0 and self.c >= 0):
            raise ValueError("k_c and c must be >= 0")
        if len(self.drive_offset) != 3:
            raise ValueError("drive_offset must have three components")
        if not 0 <= self.droop <= math.pi:
            raise ValueError("droop must be in [0, pi]")


@dataclass(frozen=True)
class Scenario:
    strategy: StrategyParams
    mesh: MeshConfig = MeshConfig()
    cloth: ClothParams = ClothParams()
    integrator: IntegratorConfig = IntegratorConfig()
    perturbation: PerturbationConfig = PerturbationConfig()
    duration: float = 8.0  # s

    def noise_free(self) -> "Scenario":
        return replace(self, cloth=replace(self.cloth, delta=0.0), perturbation=replace(self.perturbation, amplitude=0.0))


@dataclass
class Trajectory:
    """Per-frame record. ``ledger`` columns: w_in, spring, velocity, collision."""

    t: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    phi: np.ndarray
    radius: np.ndarray
    speed: np.ndarray
    center: np.ndarray
    ledger: np.ndarray
    drive_states: list
    mass: np.ndarray
    driven: np.ndarray
    dt: float

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.driven)

    def frame_index(self, t: float) -> int:
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k < len(self.t):
            raise ValueError(f"t={t} is not a stored frame time")
        return k

    def state_at(self, k: int) -> ClothState:
        return ClothState(self.pos[k].copy(), self.vel[k].copy(), self.mass, self.driven, float(self.t[k]))


class Simulation:
    """An engine, its cloth state and its driver, advanced frame by frame."""

    def __init__(self, scenario: Scenario, state: ClothState | None = None, drive: DriveState | None = None):
        self.scenario = scenario
        m = scenario.mesh
        flat, self.springs, self.faces = build_octagon_mesh(m.circumradius, m.total_mass, m.k_s, m.k_c, m.c, m.drive_offset, square_edges=m.square_edges)
        self.reference = flat
        seed = scenario.integrator.seed
        self.engine = ClothEngine(self.springs, self.faces, scenario.cloth, scenario.integrator, rng=substream(seed, "damping"))
        if drive is None:
            drive = initial_drive(scenario.strategy, center=(0.0, 0.0, 0.0))
        if state is None:
            flat_at_drive = flat.copy()
            flat_at_drive.pos += drive.position - flat.pos[flat.driven][0]
            state = drape(flat_at_drive, m.droop)
            state.pos[state.driven] = drive.position
            state.vel[state.driven] = drive.velocity
        self.state = state
        self.frame = 0
        self.frame_t0 = state.t
        self.driver = Driver(scenario.strategy, drive, scenario.perturbation, rng=substream(seed, "drive"))

    def advance(self) -> ClothState:
        self.state = self.engine.step(self.state, self.driver)
        # keep the frame clock on the integer grid
        self.frame += 1
        t = self.frame_t0 + self.frame * self.scenario.integrator.dt
        self.state.t = t
        self.driver.state = replace(self.driver.state, t=t)
        return self.state

    def run(self, n_frames: int) -> Trajectory:
        rec = _Recorder(self)
        rec.push()
        for _ in range(n_frames):
            self.advance()
            rec.push()
        return rec.finish()


class _Recorder:
    def __init__(self, sim: Simulation):
        self.sim = sim
        self.rows = []

    def push(self):
        s, d = self.sim.state, self.sim.driver.state
        self.rows.append((s.t, s.pos.copy(), s.vel.copy(), d, self.sim.engine.ledger.as_array()))

    def finish(self) -> Trajectory:
        sim = self.sim
        ds = [r[3] for r in self.rows]
        return Trajectory(
            t=np.array([r[0] for r in self.rows]),
            pos=np.array([r[1] for r in self.rows]),
            vel=np.array([r[2] for r in self.rows]),
            phi=np.array([d.phi for d in ds]),
            radius=np.array([d.R for d in ds]),
            speed=np.array([d.V for d in ds]),
            center=np.array([d.center for d in ds]),
            ledger=np.array([r[4] for r in self.rows]),
            drive_states=ds,
            mass=sim.state.mass.copy(),
            driven=sim.state.driven.copy(),
            dt=sim.scenario.integrator.dt,
        )


def simulate(scenario: Scenario) -> Trajectory:
    n_frames = int(round(scenario.duration / scenario.integrator.dt))
    return Simulation(scenario).run(n_frames)


def period_propagator(scenario: Scenario, drive: DriveState, period: float):
    """Noise-free one-period map on co-rotating fabric states.

    The returned callable takes a flattened co-rotating state at the time of
    ``drive`` and returns the state one ``period`` later.
    """
    from .analysis import from_corotating, to_corotating

    sc = scenario.noise_free()
    dt = sc.integrator.dt
    n_frames = int(round(period / dt))
    drive0 = replace(drive, position=drive.nominal_position())

    def propagate(X):
        sim = Simulation(sc, drive=drive0)
        st = sim.state
        free = ~st.driven
        x, v = from_corotating(X, drive0.phi, drive0.center)
        st.pos[free], st.vel[free] = x, v
        st.pos[~free], st.vel[~free] = drive0.position, drive0.velocity
        st.t = drive0.t
        sim.frame_t0 = drive0.t
        for _ in range(n_frames):
            sim.advance()
        d = sim.driver.state
        return to_corotating(sim.state.pos[free], sim.state.vel[free], d.phi, d.center)

    return propagate
