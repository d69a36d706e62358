"""Anti-parallelogram rolling profile and tendon-driven wrist kinematics.

Lengths are millimetres, angles radians.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Transform3, compose, rot_y, rot_z, translate_z

PSI_MAX = math.pi / 4


class DomainError(ValueError):
    """Profile parameters for which the rolling radius is not real."""


class NoSolutionError(ValueError):
    """Raised when a parameter sweep has no feasible point."""


@dataclass(frozen=True)
class AntiParallelogramParams:
    h_o: float  # centre offset
    w_c: float  # link width
    h_c: float  # link height

    def is_feasible(self) -> bool:
        return self.h_o > 0 and self.w_c > 0 and self.h_c > 2 * self.h_o

    @property
    def l_c(self) -> float:
        """Long-link length; the diagonal of the w_c x h_c box."""
        return math.hypot(self.w_c, self.h_c)


@dataclass(frozen=True)
class WristParams:
    D: float = 40.0  # rolling-contact joint diameter
    w: float = 20.0  # tendon anchor radius
    theta: float = math.pi / 4  # tendon tunnel angle

    def __post_init__(self):
        if not (self.D > 0 and self.w > 0 and 0 < self.theta < math.pi / 2):
            raise ValueError(f"invalid wrist parameters {self}")


@dataclass(frozen=True)
class WristPose:
    alpha: float  # bending-plane angle
    beta: float  # deflection angle

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("pose angles must be finite")
        if not 0.0 <= self.beta <= math.pi / 2:
            raise ValueError(f"beta={self.beta} outside [0, pi/2]")
        if not -math.pi < self.alpha <= math.pi:
            raise ValueError(f"alpha={self.alpha} outside (-pi, pi]")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


def _radius(params: AntiParallelogramParams, psi: np.ndarray) -> np.ndarray:
    if not params.is_feasible():
        raise DomainError(f"need h_o > 0, w_c > 0 and h_c > 2 h_o, got {params}")
    h_o, w_c, h_c = params.h_o, params.w_c, params.h_c
    a = h_c**2 / (h_c**2 + w_c**2)
    q = 1.0 + a * np.tan(psi) ** 2
    disc = h_o**2 + q * ((h_c / 2) ** 2 - h_o**2)
    if np.any(disc < 0):
        raise DomainError(f"negative discriminant for {params}")
    return (h_o + np.sqrt(disc)) / (np.cos(psi) * q)


def rolling_radius(params: AntiParallelogramParams, psi: float) -> float:
    """Distance from the rolling-circle centre to the ellipse at angle ``psi``."""
    if not 0.0 <= psi <= PSI_MAX:
        raise ValueError(f"psi={psi} outside [0, pi/4]")
    return float(_radius(params, np.asarray(psi, dtype=float)))


def profile_deviation(params: AntiParallelogramParams, n_samples: int = 1000) -> tuple[float, float]:
    """Max ``|r(psi) - r(0)|`` over ``n_samples`` uniform samples of [0, pi/4].

    Returns ``(max_dev, psi_at_max)``.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    psi = np.linspace(0.0, PSI_MAX, n_samples)
    r = _radius(params, psi)
    dev = np.abs(r - r[0])
    k = int(np.argmax(dev))
    return float(dev[k]), float(psi[k])


def _axis(bounds, resolution: int) -> np.ndarray:
    lo, hi = (float(b) for b in bounds)
    if hi < lo:
        raise ValueError(f"empty range {bounds}")
    if hi == lo:
        return np.array([lo])
    return np.linspace(lo, hi, resolution)


def optimize_profile(h_o_range, w_c_range, h_c_range, resolution: int = 11, n_samples: int = 200):
    """Grid search for the flattest rolling profile.

    Ranges are ``(lo, hi)`` pairs. Infeasible grid points are skipped; ties
    keep the lexicographically smallest ``(h_o, w_c, h_c)``. Returns
    ``(params, max_dev)``.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    best, best_dev = None, math.inf
    grid = itertools.product(_axis(h_o_range, resolution), _axis(w_c_range, resolution), _axis(h_c_range, resolution))
    for h_o, w_c, h_c in grid:
        p = AntiParallelogramParams(float(h_o), float(w_c), float(h_c))
        if not p.is_feasible():
            continue
        dev, _ = profile_deviation(p, n_samples)
        if dev < best_dev:
            best, best_dev = p, dev
    if best is None:
        raise NoSolutionError("no feasible (h_o, w_c, h_c) in the given ranges")
    return best, best_dev


def forward_kinematics(pose: WristPose, D: float) -> Transform3:
    """Base-to-end transform of the rolling-contact joint.

    Built as Rz(a) Ry(b/2) Tz(D) Ry(b/2) Rz(-a); the translation is
    ``D * (cos a sin(b/2), sin a sin(b/2), cos(b/2))``.
    """
    a, b = pose.alpha, pose.beta
    t = rot_z(a)
    for f in (rot_y(b / 2), translate_z(D), rot_y(b / 2), rot_z(-a)):
        t = compose(t, f)
    return t


def tendon_lengths(pose: WristPose, params: WristParams) -> tuple[float, float]:
    """Roll/pitch tendon displacements ``(l_r, l_p)``."""
    s = params.w * math.sin(pose.beta)
    d = params.theta - pose.alpha
    return s * math.sin(d), s * math.cos(d)


def pose_from_tendons(l_r: float, l_p: float, params: WristParams) -> WristPose:
    """Invert :func:`tendon_lengths` on the ``beta in [0, pi/2]`` branch.

    At zero displacement alpha is undefined and returned as 0.
    """
    mag = math.hypot(l_r, l_p)
    if mag > params.w * (1 + 1e-12):
        raise ValueError(f"tendon displacement {mag:.6g} exceeds anchor radius {params.w}")
    if mag == 0.0:
        return WristPose(0.0, 0.0)
    beta = math.asin(min(mag / params.w, 1.0))
    alpha = wrap_angle(params.theta - math.atan2(l_r, l_p))
    return WristPose(alpha, beta)
