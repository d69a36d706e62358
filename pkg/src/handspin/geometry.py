"""Small 3D helpers: homogeneous transforms, planar projection, polygon area."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transform3:
    """Rigid transform ``x -> rotation @ x + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Transform3":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, h: np.ndarray) -> "Transform3":
        h = np.asarray(h, dtype=float)
        return cls(h[:3, :3].copy(), h[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.rotation
        h[:3, 3] = self.translation
        return h

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "Transform3":
        rt = self.rotation.T
        return Transform3(rt, -rt @ self.translation)

    def __matmul__(self, other: "Transform3") -> "Transform3":
        return compose(self, other)


def rot_z(angle: float) -> Transform3:
    c, s = np.cos(angle), np.sin(angle)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return Transform3(r, np.zeros(3))


def rot_y(angle: float) -> Transform3:
    c, s = np.cos(angle), np.sin(angle)
    r = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return Transform3(r, np.zeros(3))


def translate_z(d: float) -> Transform3:
    return Transform3(np.eye(3), np.array([0.0, 0.0, float(d)]))


def compose(a: Transform3, b: Transform3) -> Transform3:
    """Return ``a * b`` (apply ``b`` first)."""
    return Transform3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def plane_basis(normal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed orthonormal basis ``(u, v, n)`` with ``n`` along ``normal``.

    ``u`` comes from Gram-Schmidt on the world axis least aligned with the
    normal (lowest index wins ties), so the basis is reproducible.
    """
    n = np.asarray(normal, dtype=float)
    norm = np.linalg.norm(n)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("plane normal must be a nonzero finite vector")
    n = n / norm
    seed = np.zeros(3)
    seed[int(np.argmin(np.abs(n)))] = 1.0
    u = seed - (seed @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v, n


def project_to_plane(points, normal) -> np.ndarray:
    """Orthogonally project 3D points onto the plane through the origin.

    Returns an ``(n, 2)`` array of in-plane coordinates. For ``normal`` along
    +z the basis is exactly (x, y).
    """
    u, v, _ = plane_basis(normal)
    p = np.atleast_2d(np.asarray(points, dtype=float))
    return np.column_stack((p @ u, p @ v))


def shoelace_area(points) -> float:
    """Unsigned area of a simple polygon given its boundary vertices in order."""
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[0] < 3:
        raise ValueError("shoelace_area needs at least 3 points")
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
