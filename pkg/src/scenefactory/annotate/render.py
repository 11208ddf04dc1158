"""Render a SceneSample into RGB / depth / instance maps.

Whitted-style tracing: one primary ray per pixel through the BVH, hard
shadow rays per light, Lambertian + Blinn-Phong shading, and an analytic
z=0 ground plane textured by the scene background. Depth is the camera-z
of object hits in meters (0 elsewhere); instance ids are 1..K for targets
in mesh order and K+1.. for distractors, so instance > 0 iff depth > 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..core import ImageBuffer
from . import tracer

if TYPE_CHECKING:  # avoid a composer <-> meshing <-> annotate import cycle
    from ..composer import SceneSample
    from ..meshing.align import AlignedTexturedMesh

_EPS = 1e-9


@dataclass(frozen=True)
class RenderOutput:
    rgb: ImageBuffer
    depth: np.ndarray     # (H, W) float64 meters, 0 = no object hit
    instance: np.ndarray  # (H, W) int64 object id, 0 = background


def build_scene_bvh(scene: "SceneSample",
                    meshes: list["AlignedTexturedMesh"]) -> tracer.TriScene:
    from ..composer import distractor_mesh

    entries = []
    for mesh_id, pose in scene.target_poses:
        entries.append((meshes[mesh_id].mesh, pose, 1.0, mesh_id + 1))
    first_distractor = len(meshes) + 1
    for k, spec in enumerate(scene.distractors):
        entries.append((distractor_mesh(spec), spec.pose, 1.0,
                        first_distractor + k))
    return tracer.build_scene(entries)


def trace_scene(scene: "SceneSample", meshes: list["AlignedTexturedMesh"],
                bvh: tracer.TriScene | None = None) -> RenderOutput:
    from ..composer import sample_background

    if bvh is None:
        bvh = build_scene_bvh(scene, meshes)
    intr = scene.intrinsics
    t, tri, bu, bv, dirs, origin = tracer.render_hits(bvh, intr,
                                                      scene.camera_pose)
    h, w = intr.height, intr.width
    flat_dirs = dirs.reshape(-1, 3)
    t = t.reshape(-1)
    tri = tri.reshape(-1)
    bu = bu.reshape(-1)
    bv = bv.reshape(-1)

    # analytic ground plane z = 0
    dz = flat_dirs[:, 2]
    t_plane = np.where(np.abs(dz) > _EPS, -origin[2] / np.where(
        np.abs(dz) > _EPS, dz, 1.0), np.inf)
    t_plane = np.where(t_plane > _EPS, t_plane, np.inf)
    obj_hit = t > 0.0
    plane_hit = ~obj_hit & np.isfinite(t_plane)
    plane_hit |= obj_hit & (t_plane < t)  # plane in front of a farther tri
    obj_hit &= ~plane_hit

    tex = sample_background(scene.background)
    rgb = np.empty((h * w, 3))
    rgb[:] = np.asarray(scene.background.color_a)  # sky

    points = np.empty((h * w, 3))
    normals = np.empty((h * w, 3))
    albedo = np.empty((h * w, 3))
    surf = obj_hit | plane_hit
    points[obj_hit] = origin + t[obj_hit, None] * flat_dirs[obj_hit]
    normals[obj_hit] = tracer.triangle_normals(bvh, tri[obj_hit])
    albedo[obj_hit] = tracer.interpolate_colors(bvh, tri[obj_hit],
                                                bu[obj_hit], bv[obj_hit])
    pp = origin + t_plane[plane_hit, None] * flat_dirs[plane_hit]
    points[plane_hit] = pp
    normals[plane_hit] = (0.0, 0.0, 1.0)
    albedo[plane_hit] = tex(pp[:, 0], pp[:, 1])

    lights = [(l.position, l.intensity) for l in scene.lights]
    rgb[surf] = tracer.shade_points(bvh, points[surf], normals[surf],
                                    albedo[surf], flat_dirs[surf], lights)

    fwd = scene.camera_pose.rotation[:, 2]
    depth = np.zeros(h * w)
    depth[obj_hit] = (points[obj_hit] - origin) @ fwd
    instance = np.zeros(h * w, dtype=np.int64)
    instance[obj_hit] = bvh.obj_id[tri[obj_hit]]

    img = ImageBuffer(np.clip(rgb, 0.0, 1.0).reshape(h, w, 3)
                      .astype(np.float32))
    return RenderOutput(rgb=img, depth=depth.reshape(h, w),
                        instance=instance.reshape(h, w))


def trace_object_mask(scene: "SceneSample", mesh: "AlignedTexturedMesh",
                      object_id: int) -> np.ndarray:
    """Solo-render hit mask of one target with the same camera (no shading)."""
    pose = dict(scene.target_poses)[object_id - 1]
    bvh = tracer.build_scene([(mesh.mesh, pose, 1.0, object_id)])
    t, *_ = tracer.render_hits(bvh, scene.intrinsics, scene.camera_pose)
    return t > 0.0
