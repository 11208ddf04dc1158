"""ASCII PLY export with per-vertex colors, plus PLY/OBJ import."""
from __future__ import annotations

import os

import numpy as np

from ..core import TriangleMesh
from ..errors import SchemaError


def write_ply(mesh: TriangleMesh, path: str | os.PathLike) -> None:
    """Write an ASCII PLY file; vertex colors are stored as uint8 0-255."""
    colors = mesh.vertex_colors
    if colors is None:
        colors = np.full((mesh.n_vertices, 3), 0.7)
    col8 = np.clip(np.round(colors * 255.0), 0, 255).astype(np.uint8)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {mesh.n_vertices}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        f"element face {mesh.n_faces}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, c in zip(mesh.vertices, col8):
        lines.append(f"{v[0]:.9g} {v[1]:.9g} {v[2]:.9g} {c[0]} {c[1]} {c[2]}")
    for f in mesh.faces:
        lines.append(f"3 {f[0]} {f[1]} {f[2]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ply(path: str | os.PathLike) -> TriangleMesh:
    with open(path) as fh:
        tokens = fh.read().split("\n")
    if not tokens or tokens[0].strip() != "ply":
        raise SchemaError(f"{path}: not a PLY file")
    n_vert = n_face = None
    props: list[str] = []
    cur_element = None
    i = 1
    while i < len(tokens):
        parts = tokens[i].split()
        i += 1
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise SchemaError(f"{path}: only ascii PLY is supported")
        if parts[0] == "element":
            cur_element = parts[1]
            if parts[1] == "vertex":
                n_vert = int(parts[2])
            elif parts[1] == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and cur_element == "vertex":
            props.append(parts[-1])
        elif parts[0] == "end_header":
            break
    if n_vert is None or n_face is None:
        raise SchemaError(f"{path}: missing vertex or face element")
    for axis in ("x", "y", "z"):
        if axis not in props:
            raise SchemaError(f"{path}: vertex property {axis} missing")
    has_color = all(c in props for c in ("red", "green", "blue"))

    verts = np.zeros((n_vert, 3))
    colors = np.zeros((n_vert, 3)) if has_color else None
    for r in range(n_vert):
        vals = tokens[i + r].split()
        row = {p: vals[k] for k, p in enumerate(props)}
        verts[r] = (float(row["x"]), float(row["y"]), float(row["z"]))
        if has_color:
            colors[r] = (int(row["red"]) / 255.0, int(row["green"]) / 255.0,
                         int(row["blue"]) / 255.0)
    i += n_vert
    faces = []
    for r in range(n_face):
        vals = [int(t) for t in tokens[i + r].split()]
        if vals[0] != 3:
            raise SchemaError(f"{path}: face {r} is not a triangle")
        faces.append(vals[1:4])
    return TriangleMesh(verts, np.array(faces, dtype=np.int64), colors)


def read_obj(path: str | os.PathLike) -> TriangleMesh:
    """Read OBJ geometry (v/f lines only; polygons are fan-triangulated)."""
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(t.split("/")[0]) for t in parts[1:]]
                idx = [k - 1 if k > 0 else len(verts) + k for k in idx]
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not verts or not faces:
        raise SchemaError(f"{path}: no geometry found")
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))


def load_mesh(path: str | os.PathLike) -> TriangleMesh:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".ply":
        return read_ply(path)
    if ext == ".obj":
        return read_obj(path)
    raise SchemaError(f"unsupported mesh format: {path}")
