"""Triangle meshes with optional per-vertex colors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangle mesh. vertices float64 (V, 3), faces int64 (F, 3),
    vertex_colors float64 (V, 3) in [0, 1] or None."""

    vertices: np.ndarray
    faces: np.ndarray
    vertex_colors: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(f):
            if f.min() < 0 or f.max() >= len(v):
                raise ValueError("face index out of range")
            degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degen.any():
                raise ValueError("degenerate face (repeated vertex index)")
        c = self.vertex_colors
        if c is not None:
            c = np.asarray(c, dtype=np.float64).reshape(-1, 3)
            if len(c) != len(v):
                raise ValueError("vertex_colors length != vertex count")
            c = np.clip(c, 0.0, 1.0)
            c.flags.writeable = False
        v.flags.writeable = False
        f.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "vertex_colors", c)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            return np.zeros(3), np.zeros(3)
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """Center and radius of a (non-minimal) bounding sphere."""
        lo, hi = self.aabb()
        c = 0.5 * (lo + hi)
        r = float(np.linalg.norm(self.vertices - c, axis=1).max()) if len(self.vertices) else 0.0
        return c, r

    def face_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def with_colors(self, colors: np.ndarray) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.faces, colors)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray,
                    scale: float = 1.0) -> "TriangleMesh":
        v = (self.vertices * scale) @ np.asarray(rotation).T + np.asarray(translation)
        return TriangleMesh(v, self.faces, self.vertex_colors)
