"""Unfolding, Poincare/Floquet stability, energy balance, phase locking and
harmonic checks for recorded cloth trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import project_to_plane, shoelace_area

STABILITY_MARGIN = 0.05
Z_AXIS = np.array([0.0, 0.0, 1.0])


# -- unfolding -----------------------------------------------------------

def reference_area(circumradius: float, n: int = 8) -> float:
    """Area of the fully unfolded regular ``n``-gon."""
    if not circumradius > 0:
        raise ValueError("circumradius must be > 0")
    return 0.5 * n * circumradius**2 * math.sin(2 * math.pi / n)


def unfolding_degree(positions, axis=Z_AXIS, ref_area: float = 1.0) -> float:
    """Projected polygon area of the fabric particles over ``ref_area``.

    ``positions`` are the fabric particles only, in boundary order.
    """
    if not ref_area > 0:
        raise ValueError("ref_area must be > 0")
    pts = project_to_plane(positions, axis)
    return shoelace_area(pts) / ref_area


def unfolding_series(traj, ref_area: float, axis=Z_AXIS) -> np.ndarray:
    free = traj.free
    return np.array([unfolding_degree(p[free], axis, ref_area) for p in traj.pos])


def time_to_threshold(t, degree, threshold: float = 0.9):
    hit = np.flatnonzero(np.asarray(degree) >= threshold)
    return float(t[hit[0]]) if len(hit) else None


def coefficient_of_variation(x) -> float:
    x = np.asarray(x, dtype=float)
    m = x.mean()
    if m == 0:
        return 0.0 if np.all(x == 0) else math.inf
    return float(x.std() / abs(m))


# -- co-rotating frame ------------------------------------------------------

def _rot(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def to_corotating(pos, vel, phi: float, center) -> np.ndarray:
    """Flatten fabric positions/velocities into the frame turned by ``-phi``
    about +z through ``center``: ``[x_0..x_{n-1}, v_0..v_{n-1}]``."""
    r = _rot(-phi)
    x = (np.asarray(pos) - center) @ r.T
    v = np.asarray(vel) @ r.T
    return np.concatenate((x.ravel(), v.ravel()))


def from_corotating(X, phi: float, center) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    n = len(X) // 6
    r = _rot(phi)
    x = X[: 3 * n].reshape(n, 3) @ r.T + center
    v = X[3 * n :].reshape(n, 3) @ r.T
    return x, v


# -- Poincare section -----------------------------------------------------

def poincare_sample(traj, T: float, t_start: float) -> np.ndarray:
    """Co-rotating fabric states at ``t_start + n T`` for every stored n.

    ``T`` must be a whole number of frames.
    """
    if not T > 0:
        raise ValueError("period must be > 0")
    per = T / traj.dt
    k = round(per)
    if k < 1 or abs(per - k) > 1e-6:
        raise ValueError(f"period {T} is not a multiple of the frame step {traj.dt}; nearest valid T is {max(k, 1) * traj.dt}")
    k0 = int(math.ceil(t_start / traj.dt - 1e-9))
    idx = np.arange(k0, len(traj.t), k)
    if len(idx) < 2:
        raise ValueError("trajectory does not cover a full period after t_start")
    free = traj.free
    return np.array([to_corotating(traj.pos[i][free], traj.vel[i][free], traj.phi[i], traj.center[i]) for i in idx])


def poincare_residuals(samples) -> np.ndarray:
    samples = np.asarray(samples)
    return np.linalg.norm(np.diff(samples, axis=0), axis=1)


@dataclass
class FixedPointResult:
    converged: bool
    state: np.ndarray | None
    residuals: np.ndarray


def fixed_point(samples, tol: float) -> FixedPointResult:
    """Last sample as the fixed point if the final residual is below ``tol``."""
    samples = np.asarray(samples)
    if len(samples) < 2:
        raise ValueError("need at least two Poincare samples")
    res = poincare_residuals(samples)
    if res[-1] < tol:
        return FixedPointResult(True, samples[-1].copy(), res)
    return FixedPointResult(False, None, res)


# -- monodromy and multipliers ---------------------------------------------

class PropagationError(RuntimeError):
    def __init__(self, coordinate: int, cause: Exception):
        super().__init__(f"propagation failed for perturbed coordinate {coordinate}: {cause}")
        self.coordinate = coordinate


def monodromy(x_star, propagate, eps: float = 1e-6) -> np.ndarray:
    """Forward-difference Jacobian of the one-period map at ``x_star``.

    The step on coordinate j is ``eps * (1 + |x_j|)``.
    """
    x_star = np.asarray(x_star, dtype=float)
    n = len(x_star)
    try:
        base = np.asarray(propagate(x_star), dtype=float)
    except Exception as exc:  # noqa: BLE001
        raise PropagationError(-1, exc) from exc
    phi = np.empty((n, n))
    for j in range(n):
        hj = eps * (1.0 + abs(x_star[j]))
        xp = x_star.copy()
        xp[j] += hj
        try:
            phi[:, j] = (np.asarray(propagate(xp), dtype=float) - base) / hj
        except Exception as exc:  # noqa: BLE001
            raise PropagationError(j, exc) from exc
    return phi


def classify(max_multiplier: float, margin: float = STABILITY_MARGIN) -> str:
    if max_multiplier < 1 - margin:
        return "stable"
    if max_multiplier > 1 + margin:
        return "unstable"
    return "inconclusive"


def floquet_multipliers(phi, margin: float = STABILITY_MARGIN) -> tuple[np.ndarray, str]:
    """Multiplier magnitudes (descending) and a stability verdict."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ValueError("monodromy matrix must be square")
    if not np.isfinite(phi).all():
        raise np.linalg.LinAlgError("monodromy matrix has non-finite entries")
    mags = np.sort(np.abs(np.linalg.eigvals(phi)))[::-1]
    return mags, classify(float(mags[0]), margin)


@dataclass
class StabilityReport:
    residuals: np.ndarray
    fixed_point: np.ndarray | None
    converged: bool
    monodromy: np.ndarray | None = None
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    verdict: str = "inconclusive"

    @property
    def max_multiplier(self) -> float:
        return float(self.multipliers[0]) if len(self.multipliers) else math.nan

    def to_json(self) -> dict:
        return {
            "multipliers": [float(m) for m in self.multipliers],
            "max_multiplier": self.max_multiplier,
            "verdict": self.verdict,
            "converged": self.converged,
            "residuals": [float(r) for r in self.residuals],
        }


# -- energy -----------------------------------------------------------------

@dataclass
class EnergyReport:
    w_in: float
    w_diss: float
    residual: float

    def to_json(self) -> dict:
        return {"w_in": self.w_in, "w_diss": self.w_diss, "residual": self.residual}


def energy_balance(traj, t0: float, T: float) -> EnergyReport:
    """Drive work against instrumented losses over ``[t0, t0 + T]``."""
    if not T > 0 or t0 + T > traj.t[-1] + 1e-9:
        raise ValueError("energy window must lie inside the trajectory and span at least one period")
    i0, i1 = traj.frame_index(t0), traj.frame_index(t0 + T)
    d = traj.ledger[i1] - traj.ledger[i0]
    w_in = float(d[0])
    w_diss = float(d[1:].sum())
    residual = abs(w_in - w_diss) / max(abs(w_in), 1e-300) if (w_in or w_diss) else 0.0
    return EnergyReport(w_in, w_diss, residual)


# -- phase locking --------------------------------------------------------

@dataclass
class PhaseLock:
    mean_offset: float
    std_offset: float
    skipped: int


def circular_stats(angles) -> tuple[float, float]:
    """Circular mean and circular standard deviation ``sqrt(-2 ln R)``."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise ValueError("no angles to average")
    z = np.exp(1j * a).mean()
    r = min(abs(z), 1.0)
    std = math.sqrt(-2.0 * math.log(r)) if r > 0 else math.inf
    return float(np.angle(z)), std


def phase_lock(centroids, drive_phase, center=(0.0, 0.0), min_radius: float = 1e-9) -> PhaseLock:
    """Offset between drive phase and the fabric centroid's planar angle."""
    c = np.asarray(centroids, dtype=float)[:, :2] - np.asarray(center, dtype=float)[:2]
    rad = np.hypot(c[:, 0], c[:, 1])
    ok = rad > min_radius
    resp = np.arctan2(c[ok, 1], c[ok, 0])
    offs = np.angle(np.exp(1j * (np.asarray(drive_phase)[ok] - resp)))
    mean, std = circular_stats(offs)
    return PhaseLock(mean, std, int((~ok).sum()))


def trajectory_phase_lock(traj, t0: float) -> PhaseLock:
    i0 = traj.frame_index(t0)
    cents = traj.pos[i0:, traj.free].mean(axis=1)
    return phase_lock(cents, traj.phi[i0:], traj.center[i0])


# -- harmonics --------------------------------------------------------------

@dataclass
class Spectrum:
    freqs: np.ndarray  # rad/s
    amplitudes: np.ndarray
    peaks: list  # (frequency, amplitude)
    off_harmonic: list  # peaks away from integer multiples of the fundamental

    @property
    def flagged(self) -> bool:
        return bool(self.off_harmonic)


def harmonic_spectrum(signal, dt: float, omega: float, rel_threshold: float = 0.05) -> Spectrum:
    """One-sided amplitude spectrum with off-harmonic peak detection.

    Local maxima above ``rel_threshold`` of the dominant peak are flagged
    when they sit more than half a bin from every multiple of ``omega``.
    """
    x = np.asarray(signal, dtype=float)
    n = len(x)
    if not omega > 0:
        raise ValueError("fundamental must be > 0")
    if n * dt < 4 * 2 * math.pi / omega:
        raise ValueError("need at least four fundamental periods of signal")
    x = x - x.mean()
    amp = np.abs(np.fft.rfft(x)) * 2.0 / n
    freqs = 2 * math.pi * np.fft.rfftfreq(n, dt)
    bin_w = freqs[1]
    top = amp.max()
    peaks, off = [], []
    if top > 0:
        interior = np.flatnonzero((amp[1:-1] >= amp[:-2]) & (amp[1:-1] >= amp[2:])) + 1
        for k in interior:
            if amp[k] < rel_threshold * top:
                continue
            f = freqs[k]
            peaks.append((float(f), float(amp[k])))
            mult = max(1, round(f / omega))
            if abs(f - mult * omega) > 0.5 * bin_w:
                off.append((float(f), float(amp[k])))
    return Spectrum(freqs, amp, peaks, off)


# -- depth-camera area --------------------------------------------------------

def pixel_area_estimate(n_px: float, Z: float, f_x: float, f_y: float) -> float:
    """Physical area of ``n_px`` pixels seen at depth ``Z`` (units of Z squared)."""
    if n_px < 0 or not (Z > 0 and f_x > 0 and f_y > 0):
        raise ValueError("need n_px >= 0 and positive depth and focal lengths")
    return n_px * (Z / f_x) * (Z / f_y)
