"""Particle-spring cloth engine.

Anisotropic springs (stiff in tension, soft in compression) with axial
damping, swept particle-vs-triangle impulse collisions, semi-implicit Euler
sub-stepping and jittered exponential velocity damping. Driven particles
are positioned by a drive callback and never integrated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MIN_SPRING_LENGTH = 1e-9
COLLISION_TOLERANCE = 1e-5
COLLISION_PASSES = 4
GRAVITY = -9.81


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t:.6g} s")
        self.t = t


@dataclass(frozen=True)
class Spring:
    i: int
    j: int
    rest: float  # natural length, m
    k_s: float  # tension stiffness, N/m
    k_c: float  # compression stiffness, N/m
    c: float = 0.0  # axial damping, N s/m

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("spring endpoints must differ")
        if not self.rest > 0:
            raise ValueError("spring natural length must be > 0")
        if not (self.k_s >= self.k_c >= 0):
            raise ValueError("need k_s >= k_c >= 0")
        if not self.c >= 0:
            raise ValueError("spring damping must be >= 0")


@dataclass(frozen=True)
class TriangleFace:
    i: int
    j: int
    k: int

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ValueError("face vertices must be distinct")


@dataclass(frozen=True)
class ClothParams:
    gravity: float = GRAVITY  # along z, m/s^2
    xi: float = 1.0  # per-substep velocity damping factor
    delta: float = 0.0  # damping jitter width
    restitution: float = 0.0
    momentum_loss: float = 0.0
    full_vector_damping: bool = False  # damp the whole relative velocity, not only its axial part

    def __post_init__(self):
        if not 0 < self.xi <= 1:
            raise ValueError("xi must be in (0, 1]")
        if not 0 <= self.delta < 1:
            raise ValueError("delta must be in [0, 1)")
        if not 0 <= self.restitution <= 1:
            raise ValueError("restitution must be in [0, 1]")
        if not 0 <= self.momentum_loss < 1:
            raise ValueError("momentum_loss must be in [0, 1)")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 0.005  # frame step, s
    substeps: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def h(self) -> float:
        return self.dt / self.substeps


@dataclass
class ClothState:
    pos: np.ndarray  # (n, 3)
    vel: np.ndarray  # (n, 3)
    mass: np.ndarray  # (n,)
    driven: np.ndarray  # (n,) bool
    t: float = 0.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float)
        self.vel = np.asarray(self.vel, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        self.driven = np.asarray(self.driven, dtype=bool)
        n = len(self.mass)
        if self.pos.shape != (n, 3) or self.vel.shape != (n, 3) or self.driven.shape != (n,):
            raise ValueError("inconsistent particle array shapes")
        if np.any(self.mass <= 0):
            raise ValueError("particle masses must be > 0")

    @property
    def n(self) -> int:
        return len(self.mass)

    def copy(self) -> "ClothState":
        return ClothState(self.pos.copy(), self.vel.copy(), self.mass.copy(), self.driven.copy(), self.t)

    def kinetic_energy(self) -> float:
        free = ~self.driven
        return 0.5 * float(np.sum(self.mass[free] * np.sum(self.vel[free] ** 2, axis=1)))


@dataclass
class EnergyLedger:
    """Cumulative work terms, J."""

    w_in: float = 0.0
    spring_damping: float = 0.0
    velocity_damping: float = 0.0
    collision: float = 0.0

    @property
    def w_diss(self) -> float:
        return self.spring_damping + self.velocity_damping + self.collision

    def as_array(self) -> np.ndarray:
        return np.array([self.w_in, self.spring_damping, self.velocity_damping, self.collision])


@dataclass
class Diagnostics:
    coincident_springs: int = 0
    collisions: int = 0
    unresolved_collisions: int = 0


def build_octagon_mesh(circumradius: float, total_mass: float, k_s: float, k_c: float, c: float = 0.0,
                       drive_offset=(0.0, 0.0, 0.0), n: int = 8, square_edges: bool = False):
    """Flat regular ``n``-gon of fabric particles plus one driven contact point.

    Particles ``0..n-1`` sit on the polygon in the z=0 plane (counter-
    clockwise from +x), particle ``n`` is the driven point at
    ``drive_offset``. Springs run along the boundary and from the driven
    point to every fabric particle; faces fan around the driven point.
    With ``square_edges`` each particle is also tied to the one two places
    along, i.e. the edges of the two overlapped squares of a star
    handkerchief. Natural lengths are taken from this unfolded geometry.
    """
    from .driving import build_drive_springs

    if not circumradius > 0 or not total_mass > 0:
        raise ValueError("circumradius and total_mass must be > 0")
    ang = 2 * np.pi * np.arange(n) / n
    pos = np.zeros((n + 1, 3))
    pos[:n, 0] = circumradius * np.cos(ang)
    pos[:n, 1] = circumradius * np.sin(ang)
    pos[n] = np.asarray(drive_offset, dtype=float)
    mass = np.full(n + 1, total_mass / n)
    driven = np.zeros(n + 1, dtype=bool)
    driven[n] = True
    state = ClothState(pos, np.zeros_like(pos), mass, driven)

    springs = [
        Spring(a, (a + 1) % n, float(np.linalg.norm(pos[(a + 1) % n] - pos[a])), k_s, k_c, c) for a in range(n)
    ]
    if square_edges:
        springs += [
            Spring(a, (a + 2) % n, float(np.linalg.norm(pos[(a + 2) % n] - pos[a])), k_s, k_c, c) for a in range(n)
        ]
    springs += build_drive_springs(n, range(n), pos, k_s, k_c, c)
    faces = [TriangleFace(n, a, (a + 1) % n) for a in range(n)]
    return state, springs, faces


def drape(state: ClothState, droop: float, drive_index: int = -1) -> ClothState:
    """Let the fabric hang below the driven point like a closed umbrella.

    Each particle keeps its distance to the driven point but its spoke is
    tilted to ``droop`` radians from straight down. Velocities are zeroed.
    """
    out = state.copy()
    d = out.pos[drive_index]
    for k in np.flatnonzero(~out.driven):
        off = out.pos[k] - d
        horiz = off.copy()
        horiz[2] = 0.0
        L = np.linalg.norm(off)
        hn = np.linalg.norm(horiz)
        e = horiz / hn if hn > 0 else np.zeros(3)
        out.pos[k] = d + L * (math.sin(droop) * e - math.cos(droop) * np.array([0.0, 0.0, 1.0]))
    out.vel[:] = 0.0
    return out


class ClothEngine:
    """Frame stepper for one cloth; owns counters and the energy ledger."""

    def __init__(self, springs, faces, params: ClothParams, config: IntegratorConfig, rng=None, debug: bool = False):
        self.params = params
        self.config = config
        self.rng = rng
        self.debug = debug
        self.si = np.array([s.i for s in springs], dtype=int)
        self.sj = np.array([s.j for s in springs], dtype=int)
        self.rest = np.array([s.rest for s in springs], dtype=float)
        self.k_s = np.array([s.k_s for s in springs], dtype=float)
        self.k_c = np.array([s.k_c for s in springs], dtype=float)
        self.c = np.array([s.c for s in springs], dtype=float)
        self.faces = np.array([[f.i, f.j, f.k] for f in faces], dtype=int).reshape(-1, 3)
        self.ledger = EnergyLedger()
        self.diagnostics = Diagnostics()

    # -- forces ---------------------------------------------------------
    def spring_forces(self, pos: np.ndarray, vel: np.ndarray) -> tuple[np.ndarray, float]:
        """Net spring force per particle and the damping power drawn (W)."""
        F = np.zeros_like(pos)
        if len(self.si) == 0:
            return F, 0.0
        d = pos[self.sj] - pos[self.si]
        L = np.sqrt(np.einsum("ij,ij->i", d, d))
        ok = L >= MIN_SPRING_LENGTH
        if not ok.all():
            self.diagnostics.coincident_springs += int((~ok).sum())
        Ls = np.where(ok, L, 1.0)
        u = d / Ls[:, None]
        stretch = L - self.rest
        k = np.where(stretch > 0, self.k_s, self.k_c)
        vrel = vel[self.sj] - vel[self.si]
        vn = np.einsum("ij,ij->i", vrel, u)
        if self.params.full_vector_damping:
            f = (k * stretch)[:, None] * u + self.c[:, None] * vrel
            power = self.c * np.einsum("ij,ij->i", vrel, vrel)
        else:
            f = (k * stretch + self.c * vn)[:, None] * u
            power = self.c * vn * vn
        f[~ok] = 0.0
        power = np.where(ok, power, 0.0)
        np.add.at(F, self.si, f)
        np.add.at(F, self.sj, -f)
        if self.debug:
            assert np.allclose(F.sum(axis=0), 0.0, atol=1e-9 * (1 + np.abs(f).sum())), "spring forces not balanced"
        return F, float(power.sum())

    # -- collisions -----------------------------------------------------
    def _crossings(self, x0: np.ndarray, x1: np.ndarray, driven: np.ndarray):
        """Candidate (particle, face, s, sign) crossings of the sub-step."""
        if len(self.faces) == 0:
            return []
        fa, fb, fc = self.faces[:, 0], self.faces[:, 1], self.faces[:, 2]
        A0, B0, C0 = x0[fa], x0[fb], x0[fc]
        A1, B1, C1 = x1[fa], x1[fb], x1[fc]
        n0 = np.cross(B0 - A0, C0 - A0)
        n1 = np.cross(B1 - A1, C1 - A1)
        free = np.flatnonzero(~driven)
        # signed (unnormalised) distances, particles x faces
        d0 = np.einsum("pfk,fk->pf", x0[free][:, None, :] - A0[None], n0)
        d1 = np.einsum("pfk,fk->pf", x1[free][:, None, :] - A1[None], n1)
        member = (free[:, None] == self.faces[None, :, 0]) | (free[:, None] == self.faces[None, :, 1]) | (
            free[:, None] == self.faces[None, :, 2]
        )
        cand = (d0 * d1 < 0) & ~member
        out = []
        for p_idx, f in zip(*np.nonzero(cand)):
            p = free[p_idx]
            s = d0[p_idx, f] / (d0[p_idx, f] - d1[p_idx, f])
            xs = x0[p] + s * (x1[p] - x0[p])
            a = A0[f] + s * (A1[f] - A0[f])
            b = B0[f] + s * (B1[f] - B0[f])
            c = C0[f] + s * (C1[f] - C0[f])
            bary = _barycentric(xs, a, b, c)
            if bary is not None and np.all(bary >= 0):
                out.append((int(p), int(f), float(s), 1.0 if d0[p_idx, f] > 0 else -1.0))
        return out

    def resolve_collisions(self, x0: np.ndarray, state: ClothState) -> ClothState:
        """Impulse response for particles whose sub-step path crossed a face.

        ``x0`` holds positions at the start of the sub-step; ``state`` is
        modified in place and returned.
        """
        eps, eta = self.params.restitution, self.params.momentum_loss
        pos, vel, mass, driven = state.pos, state.vel, state.mass, state.driven
        inv_m = np.where(driven, 0.0, 1.0 / mass)
        for _ in range(COLLISION_PASSES):
            hits = self._crossings(x0, pos, driven)
            if not hits:
                return state
            seen = set()
            for p, f, s, side in sorted(hits, key=lambda h: (h[0], h[2], h[1])):
                if p in seen:
                    continue
                seen.add(p)
                tri = self.faces[f]
                a, b, c = pos[tri[0]], pos[tri[1]], pos[tri[2]]
                nrm = np.cross(b - a, c - a)
                nn = np.linalg.norm(nrm)
                if nn == 0:
                    continue
                nrm = side * nrm / nn
                bary = _barycentric(pos[p], a, b, c)
                if bary is None:
                    continue
                ke0 = _ke(mass, vel, [p, *tri], driven)
                vface = bary @ vel[tri]
                vn = float((vel[p] - vface) @ nrm)
                if vn < 0:
                    w = inv_m[p] + float(bary**2 @ inv_m[tri])
                    j = -(1.0 + eps) * vn / w
                    vel[p] += j * inv_m[p] * nrm
                    vel[tri] -= (j * bary * inv_m[tri])[:, None] * nrm
                vel[p] *= 1.0 - eta
                self.ledger.collision += ke0 - _ke(mass, vel, [p, *tri], driven)
                # back to the approach side of the face plane
                pos[p] += (COLLISION_TOLERANCE - float((pos[p] - a) @ nrm)) * nrm
                self.diagnostics.collisions += 1
        if self._crossings(x0, pos, driven):
            self.diagnostics.unresolved_collisions += 1
        return state

    # -- damping --------------------------------------------------------
    def apply_damping(self, state: ClothState) -> ClothState:
        """Scale free velocities by ``xi * U[1 - delta, 1]`` (in place)."""
        xi, delta = self.params.xi, self.params.delta
        if xi == 1.0 and delta == 0.0:
            return state
        free = ~state.driven
        n = int(free.sum())
        if delta > 0:
            scale = xi * self.rng.uniform(1.0 - delta, 1.0, size=n)
        else:
            scale = np.full(n, xi)
        v = state.vel[free]
        m = state.mass[free]
        v2 = np.einsum("ij,ij->i", v, v)
        state.vel[free] = v * scale[:, None]
        self.ledger.velocity_damping += 0.5 * float(np.sum(m * v2 * (1.0 - scale**2)))
        return state

    # -- integration ----------------------------------------------------
    def substep(self, state: ClothState, drive_update=None) -> ClothState:
        h = self.config.h
        driven = state.driven
        any_driven = bool(driven.any())
        if drive_update is not None and any_driven:
            dpos, dvel = drive_update(h)
            state.pos[driven] = dpos
            state.vel[driven] = dvel
        F, power = self.spring_forces(state.pos, state.vel)
        if any_driven:
            self.ledger.w_in -= float(np.sum(F[driven] * state.vel[driven])) * h
        self.ledger.spring_damping += power * h
        F[:, 2] += state.mass * self.params.gravity
        x0 = state.pos.copy()
        if any_driven:
            free = (~driven)[:, None]
            state.vel += np.where(free, F / state.mass[:, None] * h, 0.0)
            state.pos += np.where(free, state.vel * h, 0.0)
        else:
            state.vel += F / state.mass[:, None] * h
            state.pos += state.vel * h
        if len(self.faces):
            self.resolve_collisions(x0, state)
        self.apply_damping(state)
        state.t += h
        if not (np.isfinite(state.pos).all() and np.isfinite(state.vel).all()):
            raise SimulationDiverged(state.t)
        return state

    def step(self, state: ClothState, drive_update=None) -> ClothState:
        """Advance one frame (``substeps`` sub-steps). Returns a new state."""
        s = state.copy()
        # overflow on the way to a non-finite state is reported by substep
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(self.config.substeps):
                self.substep(s, drive_update)
        return s


def step(state, springs, faces, drive_update, params: ClothParams, config: IntegratorConfig, rng=None) -> ClothState:
    """One frame with a throwaway engine; see :class:`ClothEngine` for runs."""
    return ClothEngine(springs, faces, params, config, rng).step(state, drive_update)


def _barycentric(x, a, b, c):
    v0, v1, v2 = b - a, c - a, x - a
    d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
    d20, d21 = v2 @ v0, v2 @ v1
    den = d00 * d11 - d01 * d01
    if den <= 1e-300:
        return None
    v = (d11 * d20 - d01 * d21) / den
    w = (d00 * d21 - d01 * d20) / den
    return np.array([1.0 - v - w, v, w])


def _ke(mass, vel, idx, driven) -> float:
    idx = [i for i in dict.fromkeys(idx) if not driven[i]]
    return 0.5 * float(sum(mass[i] * (vel[i] @ vel[i]) for i in idx))
