"""Parametric meshes: UV spheres, subdivided boxes, cylinders.

Used both as capture oracles (with analytic textures) and as distractor
geometry during scene composition.
"""
from __future__ import annotations

import numpy as np

from .core import TriangleMesh


def uv_sphere(radius: float = 1.0, n_lat: int = 48, n_lon: int = 96,
              colors=None) -> TriangleMesh:
    """Latitude/longitude sphere. colors: callable point->RGB, or None."""
    verts = []
    for i in range(n_lat + 1):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append([radius * np.sin(theta) * np.cos(phi),
                          radius * np.sin(theta) * np.sin(phi),
                          radius * np.cos(theta)])
    verts = np.array(verts)
    faces = []
    for i in range(n_lat):
        for j in range(n_lon):
            a = i * n_lon + j
            b = i * n_lon + (j + 1) % n_lon
            c = (i + 1) * n_lon + j
            d = (i + 1) * n_lon + (j + 1) % n_lon
            if i > 0:
                faces.append([a, c, b])
            if i < n_lat - 1:
                faces.append([b, c, d])
    vc = np.apply_along_axis(colors, 1, verts) if colors is not None else None
    return TriangleMesh(verts, np.array(faces), vc)


def two_tone_sphere(radius: float = 1.0, n_lat: int = 64, n_lon: int = 128) -> TriangleMesh:
    """Capture oracle: red upper hemisphere, blue lower."""
    def tone(p):
        return (0.85, 0.15, 0.1) if p[2] >= 0 else (0.1, 0.2, 0.85)
    return uv_sphere(radius, n_lat, n_lon, colors=tone)


def box(extents=(1.0, 1.0, 1.0), subdiv: int = 1, colors=None) -> TriangleMesh:
    """Axis-aligned box centered at origin; each face a subdiv x subdiv grid.

    Faces wound with outward normals. Per-face vertices are duplicated so
    colors may be discontinuous across edges.
    """
    ex, ey, ez = np.asarray(extents, dtype=np.float64) / 2.0
    verts, faces = [], []
    axes = [(0, 1, 2, ez), (0, 1, 2, -ez), (1, 2, 0, ex), (1, 2, 0, -ex),
            (2, 0, 1, ey), (2, 0, 1, -ey)]
    half = {0: ex, 1: ey, 2: ez}
    for (ua, va, na, off) in axes:
        base = len(verts)
        for i in range(subdiv + 1):
            for j in range(subdiv + 1):
                p = np.zeros(3)
                p[ua] = -half[ua] + 2 * half[ua] * i / subdiv
                p[va] = -half[va] + 2 * half[va] * j / subdiv
                p[na] = off
                verts.append(p)
        flip = off < 0
        for i in range(subdiv):
            for j in range(subdiv):
                a = base + i * (subdiv + 1) + j
                b = a + 1
                c = a + (subdiv + 1)
                d = c + 1
                t1, t2 = ([a, b, d], [a, d, c])
                if flip:
                    t1, t2 = t1[::-1], t2[::-1]
                faces.append(t1)
                faces.append(t2)
    verts = np.array(verts)
    # wind outward; valid because the box is convex and centered
    faces = np.array(faces)
    tri = verts[faces]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    centers = tri.mean(axis=1)
    wrong = (n * centers).sum(axis=1) < 0
    faces[wrong] = faces[wrong][:, ::-1]
    vc = np.apply_along_axis(colors, 1, verts) if colors is not None else None
    return TriangleMesh(verts, faces, vc)


def textured_box(extents=(2.0, 1.0, 0.5), subdiv: int = 24) -> TriangleMesh:
    """Capture oracle: checkered warm/cool tones keyed to position."""
    ex, ey, ez = extents

    def tone(p):
        k = int(np.floor(3 * (p[0] / ex + 0.5))) + int(np.floor(3 * (p[1] / ey + 0.5)))
        return (0.9, 0.75, 0.2) if k % 2 == 0 else (0.15, 0.5, 0.3)
    return box(extents, subdiv, colors=tone)


def cylinder(radius: float = 0.5, height: float = 1.0, n_seg: int = 48,
             colors=None) -> TriangleMesh:
    """Closed cylinder along Z, centered at origin."""
    verts, faces = [], []
    for s, z in ((0, -height / 2), (1, height / 2)):
        for j in range(n_seg):
            phi = 2 * np.pi * j / n_seg
            verts.append([radius * np.cos(phi), radius * np.sin(phi), z])
    bot_c = len(verts)
    verts.append([0, 0, -height / 2])
    top_c = len(verts)
    verts.append([0, 0, height / 2])
    for j in range(n_seg):
        a, b = j, (j + 1) % n_seg
        c, d = n_seg + j, n_seg + (j + 1) % n_seg
        faces.append([a, b, d])
        faces.append([a, d, c])
        faces.append([bot_c, b, a])
        faces.append([top_c, c, d])
    verts = np.array(verts)
    vc = np.apply_along_axis(colors, 1, verts) if colors is not None else None
    return TriangleMesh(verts, np.array(faces), vc)
