"""Marching cubes over a ScalarGrid.

The 256-entry case table is generated at import time by tracing the
isosurface polygon on each cube configuration: every face contributes
segments between sign-change edges (ambiguous faces always separate the
negative corners, which keeps neighboring cells consistent and the output
watertight), segments are linked into loops, and loops are fan
triangulated with normals pointing toward positive values.
"""
from __future__ import annotations

import numpy as np

from ..core import TriangleMesh
from .grid import ScalarGrid

# corner bit b = cx | cy<<1 | cz<<2
_CORNER_POS = np.array([[b & 1, (b >> 1) & 1, (b >> 2) & 1] for b in range(8)],
                       dtype=np.float64)

# local edge ids: axis*4 + u + 2v, endpoints (corner bits)
_EDGE_CORNERS = []
for axis in range(3):
    for v in range(2):
        for u in range(2):
            a = [0, 0, 0]
            other = [d for d in range(3) if d != axis]
            a[other[0]] = u
            a[other[1]] = v
            b = list(a)
            a[axis] = 0
            b[axis] = 1
            bit = lambda c: c[0] | c[1] << 1 | c[2] << 2
            _EDGE_CORNERS.append((bit(a), bit(b)))
_EDGE_CORNERS = tuple(_EDGE_CORNERS)

# per-axis (du, dv) offsets of a local edge inside its cell, for global keys
_EDGE_AXIS = tuple(e // 4 for e in range(12))
_EDGE_UV = tuple((e % 4 % 2, e % 4 // 2) for e in range(12))

_FACES = []
for axis in range(3):
    other = [d for d in range(3) if d != axis]
    for side in (0, 1):
        cyc = []
        for u, v in ((0, 0), (1, 0), (1, 1), (0, 1)):
            c = [0, 0, 0]
            c[axis] = side
            c[other[0]] = u
            c[other[1]] = v
            cyc.append(c[0] | c[1] << 1 | c[2] << 2)
        _FACES.append(tuple(cyc))
_FACES = tuple(_FACES)

_EDGE_BY_CORNERS = {}
for e, (a, b) in enumerate(_EDGE_CORNERS):
    _EDGE_BY_CORNERS[(a, b)] = e
    _EDGE_BY_CORNERS[(b, a)] = e


def _face_segments(case: int) -> list[tuple[int, int]]:
    segments = []
    for face in _FACES:
        pos = [(case >> c) & 1 for c in face]
        cut = [i for i in range(4) if pos[i] != pos[(i + 1) % 4]]
        edges = {i: _EDGE_BY_CORNERS[(face[i], face[(i + 1) % 4])] for i in cut}
        if len(cut) == 2:
            i, j = cut
            segments.append((edges[i], edges[j]))
        elif len(cut) == 4:
            # ambiguous face: separate the negative (inside) corners
            for i in range(4):
                if pos[i] == 0:  # negative corner between face edges i-1, i
                    segments.append((edges[(i - 1) % 4], edges[i]))
    return segments


def _trace_loops(segments: list[tuple[int, int]]) -> list[list[int]]:
    adj: dict[int, list[int]] = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    loops = []
    seen = set()
    for start in sorted(adj):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            nxt = [e for e in adj[cur] if e != prev]
            step = nxt[0] if nxt else adj[cur][0]
            if step == start:
                break
            loop.append(step)
            seen.add(step)
            prev, cur = cur, step
        loops.append(loop)
    return loops


def _build_case(case: int) -> list[tuple[int, int, int]]:
    if case == 0 or case == 255:
        return []
    mids = 0.5 * (_CORNER_POS[[a for a, _ in _EDGE_CORNERS]]
                  + _CORNER_POS[[b for _, b in _EDGE_CORNERS]])
    tris = []
    for loop in _trace_loops(_face_segments(case)):
        if len(loop) < 3:
            continue
        # newell normal vs local inside->outside direction
        n = np.zeros(3)
        pts = mids[loop]
        for i in range(len(loop)):
            a, b = pts[i], pts[(i + 1) % len(loop)]
            n += np.cross(a, b)
        pos_c, neg_c = [], []
        for e in loop:
            a, b = _EDGE_CORNERS[e]
            pa, pb = (case >> a) & 1, (case >> b) & 1
            pos_c.append(_CORNER_POS[a if pa else b])
            neg_c.append(_CORNER_POS[b if pa else a])
        d = np.mean(pos_c, axis=0) - np.mean(neg_c, axis=0)
        if float(n @ d) < 0:
            loop = loop[::-1]
        for i in range(1, len(loop) - 1):
            tris.append((loop[0], loop[i], loop[i + 1]))
    return tris


_TRI_TABLE = tuple(_build_case(c) for c in range(256))


def marching_cubes(grid: ScalarGrid, iso: float = 0.0) -> TriangleMesh:
    """Extract the iso-surface; empty mesh if the grid never changes sign."""
    res = grid.resolution
    v = grid.values
    axis = grid.coords()
    outside = (v >= iso)

    # case index per cell, corners bit-packed cx|cy<<1|cz<<2
    case = np.zeros((res - 1,) * 3, dtype=np.uint16)
    for b in range(8):
        cx, cy, cz = b & 1, (b >> 1) & 1, (b >> 2) & 1
        sl = outside[cx:cx + res - 1, cy:cy + res - 1, cz:cz + res - 1]
        case |= (sl.astype(np.uint16) << b)
    active = np.argwhere((case != 0) & (case != 255))

    verts: list[np.ndarray] = []
    faces = []
    edge_cache: dict[tuple[int, int, int, int], int] = {}

    def edge_vertex(ci, cj, ck, e) -> int:
        ax = _EDGE_AXIS[e]
        u, vv = _EDGE_UV[e]
        o = [ci, cj, ck]
        other = [d for d in range(3) if d != ax]
        o[other[0]] += u
        o[other[1]] += vv
        key = (o[0], o[1], o[2], ax)
        idx = edge_cache.get(key)
        if idx is not None:
            return idx
        p0 = np.array([axis[o[0]], axis[o[1]], axis[o[2]]])
        o1 = list(o[:3])
        o1[ax] += 1
        v0 = v[o[0], o[1], o[2]] - iso
        v1 = v[o1[0], o1[1], o1[2]] - iso
        t = v0 / (v0 - v1)
        p1 = np.array([axis[o1[0]], axis[o1[1]], axis[o1[2]]])
        idx = len(verts)
        verts.append(p0 + t * (p1 - p0))
        edge_cache[key] = idx
        return idx

    for ci, cj, ck in active:
        for ea, eb, ec in _TRI_TABLE[case[ci, cj, ck]]:
            ia = edge_vertex(ci, cj, ck, ea)
            ib = edge_vertex(ci, cj, ck, eb)
            ic = edge_vertex(ci, cj, ck, ec)
            if ia != ib and ib != ic and ia != ic:
                faces.append((ia, ib, ic))

    if not faces:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))
