"""Canonical-axis alignment of textured meshes via surface PCA."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RigidPose, TriangleMesh
from ..errors import DegenerateGeometry

_COPLANAR_REL = 1e-10


@dataclass(frozen=True)
class AlignedTexturedMesh:
    """Mesh in canonical pose: aabb centered at origin, extents sorted
    X >= Y >= Z (up to PCA sign convention)."""
    mesh: TriangleMesh
    canonical_from_model: RigidPose
    scale: float
    aabb_min: np.ndarray
    aabb_max: np.ndarray

    @property
    def extents(self) -> np.ndarray:
        return self.aabb_max - self.aabb_min

    def keypoints3d(self) -> np.ndarray:
        """8 aabb corners in (-x,-y,-z)..(+x,+y,+z) lexicographic sign
        order, then the aabb centroid."""
        lo, hi = self.aabb_min, self.aabb_max
        pts = [[lo[0] if sx == 0 else hi[0],
                lo[1] if sy == 0 else hi[1],
                lo[2] if sz == 0 else hi[2]]
               for sx in (0, 1) for sy in (0, 1) for sz in (0, 1)]
        pts.append(list(0.5 * (lo + hi)))
        return np.array(pts)

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(
            np.maximum(np.abs(self.aabb_min), np.abs(self.aabb_max))))


def _surface_moments(mesh: TriangleMesh):
    """Area-weighted surface centroid and second-moment matrix (exact:
    midpoint quadrature integrates quadratics on triangles)."""
    a = mesh.vertices[mesh.faces[:, 0]]
    b = mesh.vertices[mesh.faces[:, 1]]
    c = mesh.vertices[mesh.faces[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    total = areas.sum()
    if total <= 0:
        raise DegenerateGeometry("zero surface area")
    centroid = ((a + b + c) / 3.0 * areas[:, None]).sum(axis=0) / total
    cov = np.zeros((3, 3))
    for m in ((a + b) / 2, (b + c) / 2, (a + c) / 2):
        d = m - centroid
        cov += (areas[:, None, None] / 3.0 * d[:, :, None] * d[:, None, :]).sum(axis=0)
    return centroid, cov / total


def align_pca(mesh: TriangleMesh,
              override: tuple[RigidPose, float] | None = None) -> AlignedTexturedMesh:
    """Rotate so covariance axes map to X >= Y >= Z eigenvalue order, sign
    fixed by extremal vertices, then center the aabb at the origin.
    An override (pose, scale) replaces the PCA transform verbatim.
    """
    if mesh.is_empty():
        raise DegenerateGeometry("empty mesh")
    if override is not None:
        pose, scale = override
        new_v = mesh.vertices * scale @ pose.rotation.T + pose.translation
        out = TriangleMesh(new_v, mesh.faces, mesh.vertex_colors)
        lo, hi = out.aabb()
        return AlignedTexturedMesh(out, pose, scale, lo, hi)

    centroid, cov = _surface_moments(mesh)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    if evals[0] < _COPLANAR_REL * max(evals[2], 1e-30):
        raise DegenerateGeometry("vertices are (nearly) coplanar")
    axes = evecs[:, ::-1]  # columns: largest->smallest variance

    centered = mesh.vertices - centroid
    proj = centered @ axes
    for k in range(2):  # fix X and Y signs from extremal vertices
        i = int(np.argmax(np.abs(proj[:, k])))
        if proj[i, k] < 0:
            axes[:, k] = -axes[:, k]
            proj[:, k] = -proj[:, k]
    axes[:, 2] = np.cross(axes[:, 0], axes[:, 1])
    rot = axes.T  # canonical_from_model rotation

    v = centered @ axes
    lo, hi = v.min(axis=0), v.max(axis=0)
    shift = 0.5 * (lo + hi)
    v = v - shift
    pose = RigidPose(rot, -rot @ centroid - shift)
    out = TriangleMesh(v, mesh.faces, mesh.vertex_colors)
    lo, hi = out.aabb()
    return AlignedTexturedMesh(out, pose, 1.0, lo, hi)
