"""Occlusion-aware per-object annotations and their PnP consistency check."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from ..core import CameraIntrinsics, RigidPose, compose, orthonormalize
from ..core.camera import project_many
from ..errors import DegenerateConfiguration
from .render import RenderOutput, trace_object_mask

if TYPE_CHECKING:  # avoid a composer <-> meshing <-> annotate import cycle
    from ..composer import SceneSample
    from ..meshing.align import AlignedTexturedMesh

_GN_ITERS = 20


@dataclass(frozen=True)
class AnnotationRecord:
    object_id: int
    cam_from_obj: RigidPose
    bbox2d_visible: tuple[float, float, float, float]  # x, y, w, h; zeros if hidden
    bbox2d_amodal: tuple[float, float, float, float]
    keypoints2d: np.ndarray      # (9, 2) pixels; NaN when behind the camera
    keypoints3d_obj: np.ndarray  # (9, 3): 8 aabb corners + centroid
    visib_fract: float


def compute_visibility(scene: "SceneSample", meshes: list["AlignedTexturedMesh"],
                       object_id: int, full_output: RenderOutput) -> float:
    """Visible pixels over solo-render pixels; 0/0 (out of frustum) -> 0."""
    solo = int(trace_object_mask(scene, meshes[object_id - 1],
                                 object_id).sum())
    if solo == 0:
        return 0.0
    visible = int((full_output.instance == object_id).sum())
    return visible / solo


def _pixel_bbox(mask: np.ndarray) -> tuple[float, float, float, float]:
    """Inclusive extent of set pixel centers, (x, y, w, h)."""
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        return (0.0, 0.0, 0.0, 0.0)
    return (float(cols.min()), float(rows.min()),
            float(cols.max() - cols.min()), float(rows.max() - rows.min()))


def annotate_frame(scene: "SceneSample", meshes: list["AlignedTexturedMesh"],
                   out: RenderOutput) -> list[AnnotationRecord]:
    intr = scene.intrinsics
    cam_inv = scene.camera_pose.inverse()
    records = []
    for mesh_id, obj_pose in scene.target_poses:
        object_id = mesh_id + 1
        am = meshes[mesh_id]
        cam_from_obj = compose(cam_inv, obj_pose)
        kp3d = am.keypoints3d()
        kp2d = project_many(intr, cam_from_obj.apply(kp3d))

        corners2d = kp2d[:8]
        finite = np.isfinite(corners2d[:, 0])
        if finite.any():
            lo = corners2d[finite].min(axis=0)
            hi = corners2d[finite].max(axis=0)
            amodal = (float(lo[0]), float(lo[1]),
                      float(hi[0] - lo[0]), float(hi[1] - lo[1]))
        else:
            amodal = (0.0, 0.0, 0.0, 0.0)

        records.append(AnnotationRecord(
            object_id=object_id,
            cam_from_obj=cam_from_obj,
            bbox2d_visible=_pixel_bbox(out.instance == object_id),
            bbox2d_amodal=amodal,
            keypoints2d=kp2d,
            keypoints3d_obj=kp3d,
            visib_fract=compute_visibility(scene, meshes, object_id, out)))
    return records


def _hat(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def pnp_verify(record: AnnotationRecord,
               intr: CameraIntrinsics) -> RigidPose:
    """Recover cam_from_obj from the 9 2D-3D correspondences.

    Direct Linear Transform, RQ factorization into K[R|t], projection of R
    to SO(3), then Gauss-Newton refinement with the known intrinsics.
    """
    pts3 = np.asarray(record.keypoints3d_obj, dtype=np.float64)
    pts2 = np.asarray(record.keypoints2d, dtype=np.float64)
    good = np.isfinite(pts2).all(axis=1)
    pts3, pts2 = pts3[good], pts2[good]
    if len(pts3) < 6:
        raise DegenerateConfiguration("need at least 6 finite keypoints")
    centered = pts3 - pts3.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[2] < 1e-9 * max(sv[0], 1e-12):
        raise DegenerateConfiguration("object keypoints are coplanar")

    # DLT: each correspondence gives two rows of A p = 0, p = vec(P)
    n = len(pts3)
    xh = np.hstack([pts3, np.ones((n, 1))])
    a = np.zeros((2 * n, 12))
    a[0::2, 0:4] = xh
    a[0::2, 8:12] = -pts2[:, 0:1] * xh
    a[1::2, 4:8] = xh
    a[1::2, 8:12] = -pts2[:, 1:2] * xh
    _, s, vt = np.linalg.svd(a)
    if s[-2] < 1e-9 * max(s[0], 1e-12):
        raise DegenerateConfiguration("DLT system is rank deficient")
    p = vt[-1].reshape(3, 4)
    # fix the projective sign so points sit in front of the camera
    if np.median(xh @ p[2]) < 0:
        p = -p

    k_est, r_est = scipy.linalg.rq(p[:, :3])
    signs = np.sign(np.diag(k_est))
    signs[signs == 0] = 1.0
    k_est = k_est * signs[None, :]
    r_est = r_est * signs[:, None]
    if np.linalg.det(r_est) < 0:
        r_est = -r_est
        k_est = -k_est
    t_est = np.linalg.solve(k_est, p[:, 3])
    if np.linalg.det(k_est) < 0:
        t_est = -t_est
    rot = orthonormalize(r_est)
    t = t_est

    # Gauss-Newton on se(3), left-multiplicative update
    for _ in range(_GN_ITERS):
        pc = pts3 @ rot.T + t
        z = pc[:, 2]
        if np.any(z <= 1e-9):
            break
        u = intr.fx * pc[:, 0] / z + intr.cx
        v = intr.fy * pc[:, 1] / z + intr.cy
        res = np.stack([u - pts2[:, 0], v - pts2[:, 1]], axis=1)
        jtj = np.zeros((6, 6))
        jtr = np.zeros(6)
        for i in range(len(pts3)):
            x, y, zi = pc[i]
            jproj = np.array([
                [intr.fx / zi, 0.0, -intr.fx * x / zi**2],
                [0.0, intr.fy / zi, -intr.fy * y / zi**2]])
            jp = np.hstack([np.eye(3), -_hat(pc[i])])
            j = jproj @ jp
            jtj += j.T @ j
            jtr += j.T @ res[i]
        try:
            step = np.linalg.solve(jtj + 1e-12 * np.eye(6), -jtr)
        except np.linalg.LinAlgError:
            break
        dt, dw = step[:3], step[3:]
        angle = np.linalg.norm(dw)
        if angle > 1e-12:
            k = _hat(dw / angle)
            dr = (np.eye(3) + np.sin(angle) * k
                  + (1.0 - np.cos(angle)) * (k @ k))
        else:
            dr = np.eye(3)
        rot = orthonormalize(dr @ rot)
        t = dr @ t + dt
        if np.linalg.norm(step) < 1e-14:
            break
    return RigidPose(rot, t)
