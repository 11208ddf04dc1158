"""Rigid transforms (SE(3)) and camera aiming.

Convention: right handed, camera looks down +Z, image u rightward, v downward.
Geometry is double precision throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateLookAt

_ORTHO_TOL = 1e-9


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix back to SO(3) (polar decomposition)."""
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


@dataclass(frozen=True)
class RigidPose:
    """Rotation + translation. Immutable; arrays are copied and locked."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-8):
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation has negative determinant")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidPose":
        return RigidPose(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidPose":
        m = np.asarray(m, dtype=np.float64)
        return RigidPose(orthonormalize(m[:3, :3]), m[:3, 3])

    @staticmethod
    def from_quaternion(q: np.ndarray, t=(0.0, 0.0, 0.0)) -> "RigidPose":
        """Unit quaternion (w, x, y, z) to pose."""
        w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
        r = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        return RigidPose(r, t)

    def to_quaternion(self) -> np.ndarray:
        """Rotation part as a unit quaternion (w, x, y, z), w >= 0."""
        r = self.rotation
        tr = np.trace(r)
        if tr > 0:
            s = np.sqrt(tr + 1.0) * 2
            q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                          (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
        else:
            i = int(np.argmax(np.diag(r)))
            j, k = (i + 1) % 3, (i + 2) % 3
            s = np.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2
            q = np.empty(4)
            q[0] = (r[k, j] - r[j, k]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (r[j, i] + r[i, j]) / s
            q[1 + k] = (r[k, i] + r[i, k]) / s
        if q[0] < 0:
            q = -q
        return q / np.linalg.norm(q)

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Transform a point or an (N, 3) array of points."""
        x = np.asarray(x, dtype=np.float64)
        return x @ self.rotation.T + self.translation

    def apply_direction(self, d: np.ndarray) -> np.ndarray:
        return np.asarray(d, dtype=np.float64) @ self.rotation.T

    def inverse(self) -> "RigidPose":
        rt = self.rotation.T
        return RigidPose(rt, -rt @ self.translation)


def compose(a: RigidPose, b: RigidPose) -> RigidPose:
    """Result applies b first, then a. Re-orthonormalized to avoid drift."""
    r = orthonormalize(a.rotation @ b.rotation)
    t = a.rotation @ b.translation + a.translation
    return RigidPose(r, t)


def look_at(eye, target, up) -> RigidPose:
    """Camera-to-world pose with +Z pointing from eye toward target.

    With eye on -Z looking at the origin and up=+Y this is the identity
    rotation (camera axes coincide with world axes).
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < _ORTHO_TOL:
        raise DegenerateLookAt("eye equals target")
    fwd = fwd / n
    right = np.cross(up / np.linalg.norm(up), fwd)
    rn = np.linalg.norm(right)
    if rn < _ORTHO_TOL:
        raise DegenerateLookAt("up is parallel to viewing direction")
    right = right / rn
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd], axis=1)
    return RigidPose(r, eye)
