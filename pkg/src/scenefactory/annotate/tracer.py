"""Whitted-style CPU ray tracer over triangle soups.

A flat median-split BVH is built per scene; intersection and occlusion
kernels are numba-compiled. Shading (Lambertian + Blinn-Phong with hard
shadows) happens in vectorized numpy on top of the kernel outputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..core import CameraIntrinsics, RigidPose, TriangleMesh, pixel_ray_grid

AMBIENT = 0.1
SPEC_EXPONENT = 32.0
SPEC_WEIGHT = 0.2
_EPS = 1e-9
_SHADOW_EPS = 1e-6


# ---------------------------------------------------------------- BVH build

@dataclass
class TriScene:
    """Flattened triangle soup + BVH. obj_id 0 is reserved for background."""
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    obj_id: np.ndarray
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray   # child index, or -1 for leaf
    node_right: np.ndarray
    node_start: np.ndarray  # leaf triangle range
    node_count: np.ndarray

    @property
    def n_triangles(self) -> int:
        return len(self.v0)


def build_scene(meshes: list[tuple[TriangleMesh, RigidPose, float, int]],
                leaf_size: int = 4) -> TriScene:
    """meshes: (mesh, pose model->world, uniform scale, object id)."""
    v0s, v1s, v2s, c0s, c1s, c2s, ids = [], [], [], [], [], [], []
    for mesh, pose, scale, oid in meshes:
        v = mesh.vertices * scale @ pose.rotation.T + pose.translation
        f = mesh.faces
        v0s.append(v[f[:, 0]])
        v1s.append(v[f[:, 1]])
        v2s.append(v[f[:, 2]])
        col = mesh.vertex_colors
        if col is None:
            col = np.full((mesh.n_vertices, 3), 0.7)
        c0s.append(col[f[:, 0]])
        c1s.append(col[f[:, 1]])
        c2s.append(col[f[:, 2]])
        ids.append(np.full(len(f), oid, dtype=np.int64))
    v0 = np.concatenate(v0s)
    v1 = np.concatenate(v1s)
    v2 = np.concatenate(v2s)
    c0 = np.concatenate(c0s)
    c1 = np.concatenate(c1s)
    c2 = np.concatenate(c2s)
    obj = np.concatenate(ids)

    n = len(v0)
    tmin = np.minimum(np.minimum(v0, v1), v2)
    tmax = np.maximum(np.maximum(v0, v1), v2)
    centers = (tmin + tmax) * 0.5

    order = np.arange(n)
    node_min, node_max = [], []
    node_left, node_right, node_start, node_count = [], [], [], []

    # iterative median split over contiguous ranges of `order`
    stack = [(0, n, -1, False)]  # start, end, parent, is_right
    while stack:
        start, end, parent, is_right = stack.pop()
        idx = len(node_min)
        sel = order[start:end]
        node_min.append(tmin[sel].min(axis=0))
        node_max.append(tmax[sel].max(axis=0))
        if parent >= 0:
            if is_right:
                node_right[parent] = idx
            else:
                node_left[parent] = idx
        node_left.append(-1)
        node_right.append(-1)
        if end - start <= leaf_size:
            node_start.append(start)
            node_count.append(end - start)
            continue
        node_start.append(-1)
        node_count.append(0)
        ext = node_max[idx] - node_min[idx]
        axis = int(np.argmax(ext))
        key = centers[sel, axis]
        mid = (end - start) // 2
        part = np.argpartition(key, mid, kind="introselect")
        order[start:end] = sel[part]
        stack.append((start + mid, end, idx, True))
        stack.append((start, start + mid, idx, False))

    perm = order
    return TriScene(
        np.ascontiguousarray(v0[perm]), np.ascontiguousarray(v1[perm]),
        np.ascontiguousarray(v2[perm]),
        np.ascontiguousarray(c0[perm]), np.ascontiguousarray(c1[perm]),
        np.ascontiguousarray(c2[perm]),
        np.ascontiguousarray(obj[perm]),
        np.array(node_min), np.array(node_max),
        np.array(node_left, dtype=np.int64), np.array(node_right, dtype=np.int64),
        np.array(node_start, dtype=np.int64), np.array(node_count, dtype=np.int64),
    )


# ------------------------------------------------------------- numba kernels

@numba.njit(cache=True, inline="always")
def _ray_tri(ox, oy, oz, dx, dy, dz, a, b, c):
    """Moller-Trumbore; returns t > eps or -1."""
    e1x, e1y, e1z = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    e2x, e2y, e2z = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-12:
        return -1.0, 0.0, 0.0
    inv = 1.0 / det
    tx, ty, tz = ox - a[0], oy - a[1], oz - a[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0, 0.0, 0.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0, 0.0, 0.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < 1e-9:
        return -1.0, 0.0, 0.0
    return t, u, v


@numba.njit(cache=True, inline="always")
def _slab_hit(ox, oy, oz, ix, iy, iz, bmin, bmax, tbest):
    t0 = (bmin[0] - ox) * ix
    t1 = (bmax[0] - ox) * ix
    tn = min(t0, t1)
    tf = max(t0, t1)
    t0 = (bmin[1] - oy) * iy
    t1 = (bmax[1] - oy) * iy
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    t0 = (bmin[2] - oz) * iz
    t1 = (bmax[2] - oz) * iz
    tn = max(tn, min(t0, t1))
    tf = min(tf, max(t0, t1))
    return tf >= tn and tf > 0.0 and tn < tbest


@numba.njit(cache=True)
def _raycast_kernel(origins, dirs, v0, v1, v2,
                    node_min, node_max, node_left, node_right,
                    node_start, node_count,
                    out_t, out_tri, out_u, out_v):
    stack = np.empty(64, dtype=np.int64)
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ix = 1.0 / dx if abs(dx) > 1e-300 else 1e300
        iy = 1.0 / dy if abs(dy) > 1e-300 else 1e300
        iz = 1.0 / dz if abs(dz) > 1e-300 else 1e300
        best_t = np.inf
        best_tri = -1
        best_u = 0.0
        best_v = 0.0
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if not _slab_hit(ox, oy, oz, ix, iy, iz,
                             node_min[node], node_max[node], best_t):
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz,
                                       v0[k], v1[k], v2[k])
                    if t > 0.0 and (t < best_t or (t == best_t and k < best_tri)):
                        best_t, best_tri, best_u, best_v = t, k, u, v
            else:
                stack[sp] = node_left[node]
                sp += 1
                stack[sp] = node_right[node]
                sp += 1
        out_t[r] = best_t if best_tri >= 0 else 0.0
        out_tri[r] = best_tri
        out_u[r] = best_u
        out_v[r] = best_v


@numba.njit(cache=True)
def _occlusion_kernel(origins, dirs, max_dist, v0, v1, v2,
                      node_min, node_max, node_left, node_right,
                      node_start, node_count, out_blocked):
    stack = np.empty(64, dtype=np.int64)
    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        ix = 1.0 / dx if abs(dx) > 1e-300 else 1e300
        iy = 1.0 / dy if abs(dy) > 1e-300 else 1e300
        iz = 1.0 / dz if abs(dz) > 1e-300 else 1e300
        limit = max_dist[r]
        blocked = False
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0 and not blocked:
            sp -= 1
            node = stack[sp]
            if not _slab_hit(ox, oy, oz, ix, iy, iz,
                             node_min[node], node_max[node], limit):
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    t, u, v = _ray_tri(ox, oy, oz, dx, dy, dz,
                                       v0[k], v1[k], v2[k])
                    if 0.0 < t < limit:
                        blocked = True
                        break
            else:
                stack[sp] = node_left[node]
                sp += 1
                stack[sp] = node_right[node]
                sp += 1
        out_blocked[r] = blocked


def raycast(scene: TriScene, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit per ray: (t, tri index, bary u, bary v); t = 0 on miss."""
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    t = np.empty(n)
    tri = np.empty(n, dtype=np.int64)
    u = np.empty(n)
    v = np.empty(n)
    if scene.n_triangles:
        _raycast_kernel(origins, dirs, scene.v0, scene.v1, scene.v2,
                        scene.node_min, scene.node_max, scene.node_left,
                        scene.node_right, scene.node_start, scene.node_count,
                        t, tri, u, v)
    else:
        t[:] = 0.0
        tri[:] = -1
    return t, tri, u, v


def occluded(scene: TriScene, origins: np.ndarray, dirs: np.ndarray,
             max_dist: np.ndarray) -> np.ndarray:
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    max_dist = np.ascontiguousarray(max_dist, dtype=np.float64).reshape(-1)
    out = np.zeros(len(origins), dtype=np.bool_)
    if scene.n_triangles:
        _occlusion_kernel(origins, dirs, max_dist, scene.v0, scene.v1, scene.v2,
                          scene.node_min, scene.node_max, scene.node_left,
                          scene.node_right, scene.node_start, scene.node_count,
                          out)
    return out


# ----------------------------------------------------------------- shading

def triangle_normals(scene: TriScene, tri: np.ndarray) -> np.ndarray:
    n = np.cross(scene.v1[tri] - scene.v0[tri], scene.v2[tri] - scene.v0[tri])
    return n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), _EPS)


def interpolate_colors(scene: TriScene, tri, u, v) -> np.ndarray:
    w = 1.0 - u - v
    return (w[:, None] * scene.c0[tri] + u[:, None] * scene.c1[tri]
            + v[:, None] * scene.c2[tri])


def shade_points(scene: TriScene, points: np.ndarray, normals: np.ndarray,
                 albedo: np.ndarray, view_dirs: np.ndarray,
                 lights: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Ambient + per-light Lambertian/Blinn-Phong with hard shadow rays.

    lights: (position, RGB intensity) pairs, inverse-square falloff.
    Normals are flipped toward the viewer (meshes may be open).
    """
    facing = (normals * view_dirs).sum(axis=1) < 0
    normals = np.where(facing[:, None], normals, -normals)
    rgb = AMBIENT * albedo
    for pos, intensity in lights:
        to_light = pos[None, :] - points
        dist = np.linalg.norm(to_light, axis=1)
        ldir = to_light / np.maximum(dist[:, None], _EPS)
        shadow_orig = points + normals * _SHADOW_EPS * np.maximum(dist[:, None], 1.0)
        blocked = occluded(scene, shadow_orig, ldir, dist - 2 * _SHADOW_EPS)
        ndotl = np.maximum((normals * ldir).sum(axis=1), 0.0)
        half = ldir - view_dirs
        half /= np.maximum(np.linalg.norm(half, axis=1, keepdims=True), _EPS)
        ndoth = np.maximum((normals * half).sum(axis=1), 0.0)
        falloff = 1.0 / np.maximum(dist * dist, _EPS)
        lit = (~blocked) * falloff
        rgb = rgb + (lit * ndotl)[:, None] * albedo * intensity[None, :]
        rgb = rgb + (lit * ndotl * SPEC_WEIGHT * ndoth ** SPEC_EXPONENT)[:, None] \
            * intensity[None, :]
    return rgb


def shade_points_directional(points, normals, albedo, view_dirs,
                             light_dir: np.ndarray, intensity: float,
                             scene: TriScene | None = None) -> np.ndarray:
    """Ambient + one directional light; used for virtual capture."""
    facing = (normals * view_dirs).sum(axis=1) < 0
    normals = np.where(facing[:, None], normals, -normals)
    ldir = -np.asarray(light_dir, dtype=np.float64)
    ldir = ldir / np.linalg.norm(ldir)
    ndotl = np.maximum(normals @ ldir, 0.0)
    lit = ndotl * intensity
    if scene is not None:
        shadow_orig = points + normals * 1e-5
        far = np.full(len(points), 1e6)
        blocked = occluded(scene, shadow_orig, np.tile(ldir, (len(points), 1)), far)
        lit = lit * (~blocked)
    return np.clip(AMBIENT * albedo + lit[:, None] * albedo, 0.0, 1.0)


def render_hits(scene: TriScene, intr: CameraIntrinsics, cam_pose: RigidPose):
    """Primary-ray pass over the full pixel grid.

    Returns (t, tri, u, v) each shaped (H, W), plus ray dirs (H, W, 3)
    and the shared origin.
    """
    origin, dirs = pixel_ray_grid(intr, cam_pose)
    flat = dirs.reshape(-1, 3)
    origins = np.broadcast_to(origin, flat.shape)
    t, tri, u, v = raycast(scene, origins, flat)
    h, w = intr.height, intr.width
    return (t.reshape(h, w), tri.reshape(h, w), u.reshape(h, w),
            v.reshape(h, w), dirs, origin)
