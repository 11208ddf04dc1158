"""Symmetric chamfer distance between surfaces: area-uniform sampling plus
exact point-triangle distances accelerated by the tracer's BVH.
"""
from __future__ import annotations

import numba
import numpy as np

from ..core import RigidPose, SeededRng, TriangleMesh
from ..annotate.tracer import TriScene, build_scene


@numba.njit(cache=True, inline="always")
def _pt_tri_dist2(px, py, pz, a, b, c):
    """Squared distance point-triangle (Ericson, real-time collision)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = px - a[0], py - a[1], pz - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = px - b[0], py - b[1], pz - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        qx, qy, qz = a[0] + t * abx, a[1] + t * aby, a[2] + t * abz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    cpx, cpy, cpz = px - c[0], py - c[1], pz - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        qx, qy, qz = a[0] + t * acx, a[1] + t * acy, a[2] + t * acz
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = b[0] + t * (c[0] - b[0])
        qy = b[1] + t * (c[1] - b[1])
        qz = b[2] + t * (c[2] - b[2])
        return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = a[0] + abx * v + acx * w
    qy = a[1] + aby * v + acy * w
    qz = a[2] + abz * v + acz * w
    return (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2


@numba.njit(cache=True, inline="always")
def _aabb_dist2(px, py, pz, bmin, bmax):
    d = 0.0
    for i in range(3):
        p = px if i == 0 else (py if i == 1 else pz)
        if p < bmin[i]:
            d += (bmin[i] - p) ** 2
        elif p > bmax[i]:
            d += (p - bmax[i]) ** 2
    return d


@numba.njit(cache=True)
def _closest_kernel(points, v0, v1, v2, node_min, node_max,
                    node_left, node_right, node_start, node_count, out):
    stack = np.empty(64, dtype=np.int64)
    for r in range(points.shape[0]):
        px, py, pz = points[r, 0], points[r, 1], points[r, 2]
        best = np.inf
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _aabb_dist2(px, py, pz, node_min[node], node_max[node]) >= best:
                continue
            if node_left[node] < 0:
                s = node_start[node]
                for k in range(s, s + node_count[node]):
                    d2 = _pt_tri_dist2(px, py, pz, v0[k], v1[k], v2[k])
                    if d2 < best:
                        best = d2
            else:
                dl = _aabb_dist2(px, py, pz, node_min[node_left[node]],
                                 node_max[node_left[node]])
                dr = _aabb_dist2(px, py, pz, node_min[node_right[node]],
                                 node_max[node_right[node]])
                # push farther child first so the nearer is popped first
                if dl <= dr:
                    stack[sp] = node_right[node]
                    stack[sp + 1] = node_left[node]
                else:
                    stack[sp] = node_left[node]
                    stack[sp + 1] = node_right[node]
                sp += 2
        out[r] = np.sqrt(best)


def surface_distances(points: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Exact distance from each point to the mesh surface."""
    scene = build_scene([(mesh, RigidPose.identity(), 1.0, 1)])
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    out = np.empty(len(points))
    _closest_kernel(points, scene.v0, scene.v1, scene.v2,
                    scene.node_min, scene.node_max, scene.node_left,
                    scene.node_right, scene.node_start, scene.node_count, out)
    return out


def sample_surface(mesh: TriangleMesh, n: int, rng: SeededRng) -> np.ndarray:
    """n points distributed uniformly by area."""
    areas = mesh.face_areas()
    probs = areas / areas.sum()
    idx = rng.numpy.choice(len(areas), size=n, p=probs)
    u = rng.uniform(size=n)
    v = rng.uniform(size=n)
    su = np.sqrt(u)
    w0, w1, w2 = 1.0 - su, su * (1.0 - v), su * v
    f = mesh.faces[idx]
    return (w0[:, None] * mesh.vertices[f[:, 0]]
            + w1[:, None] * mesh.vertices[f[:, 1]]
            + w2[:, None] * mesh.vertices[f[:, 2]])


def chamfer_distance(a: TriangleMesh, b: TriangleMesh,
                     n_samples: int = 10000, seed: int = 0) -> float:
    """Symmetric mean point-to-surface distance, n_samples each way."""
    if a.is_empty() or b.is_empty():
        raise ValueError("chamfer_distance needs non-empty meshes")
    rng = SeededRng(seed)
    pa = sample_surface(a, n_samples, rng.child(1))
    pb = sample_surface(b, n_samples, rng.child(2))
    return 0.5 * (surface_distances(pa, b).mean()
                  + surface_distances(pb, a).mean())
