"""Pinhole camera model and per-pixel ray generation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonPositiveDepth, OutOfBounds
from .pose import RigidPose

_DEPTH_EPS = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = np.linalg.norm(d)
        if abs(n - 1.0) > 1e-9:
            d = d / n
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


def project(intr: CameraIntrinsics, point_cam: np.ndarray) -> np.ndarray:
    """Project a camera-frame point to continuous pixel coordinates."""
    x, y, z = np.asarray(point_cam, dtype=np.float64)
    if z <= _DEPTH_EPS:
        raise NonPositiveDepth(f"depth {z} <= {_DEPTH_EPS}")
    return np.array([intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy])


def project_many(intr: CameraIntrinsics, points_cam: np.ndarray) -> np.ndarray:
    """Vectorized projection; rows with z <= eps come back as NaN."""
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    out = np.full((len(p), 2), np.nan)
    ok = z > _DEPTH_EPS
    out[ok, 0] = intr.fx * p[ok, 0] / z[ok] + intr.cx
    out[ok, 1] = intr.fy * p[ok, 1] / z[ok] + intr.cy
    return out


def pixel_ray(intr: CameraIntrinsics, cam_pose: RigidPose, u: float, v: float) -> Ray:
    """World-space ray through pixel (u, v); cam_pose is camera-to-world."""
    if not (0 <= u < intr.width and 0 <= v < intr.height):
        raise OutOfBounds(f"pixel ({u}, {v}) outside {intr.width}x{intr.height}")
    d_cam = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
    d_world = cam_pose.apply_direction(d_cam)
    return Ray(cam_pose.translation, d_world / np.linalg.norm(d_world))


def pixel_ray_grid(intr: CameraIntrinsics, cam_pose: RigidPose) -> tuple[np.ndarray, np.ndarray]:
    """Origins (3,) and unit directions (H, W, 3) for the whole pixel grid."""
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    uu, vv = np.meshgrid(u, v)
    d = np.stack([(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy,
                  np.ones_like(uu)], axis=-1)
    d = d @ cam_pose.rotation.T
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    return cam_pose.translation.copy(), d
