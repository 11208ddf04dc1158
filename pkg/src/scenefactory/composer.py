"""Domain-randomized scene sampling.

Scenes hold the aligned target object(s), procedural distractor primitives,
point lights, a camera, and a procedural background. Every sample is a pure
function of (master_seed, scene_index, ranges, meshes): placement uses
rejection sampling against bounding-sphere overlap instead of a physics
engine, and objects rest upright on the z=0 ground plane with random yaw.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import CameraIntrinsics, RigidPose, SeededRng, look_at
from .errors import ConfigError, DegenerateLookAt, PlacementFailure
from .meshing.align import AlignedTexturedMesh
from .primitives import box, cylinder, uv_sphere

_MAX_PLACEMENT_ATTEMPTS = 1000
_MAX_LOOKAT_ATTEMPTS = 10
_AIM_JITTER_DEG = 5.0


# ------------------------------------------------------------------- config

@dataclass(frozen=True)
class RandomizationRanges:
    """Sampling ranges for one dataset. Defaults are engineering choices;
    units are meters/degrees."""
    n_distractors: tuple[int, int] = (0, 5)
    object_distance: tuple[float, float] = (0.6, 1.8)
    camera_elevation_deg: tuple[float, float] = (5.0, 75.0)
    light_count: tuple[int, int] = (1, 3)
    light_intensity: tuple[float, float] = (0.6, 2.0)
    light_color_temp_jitter: tuple[float, float] = (-0.15, 0.15)
    background_kinds: tuple[str, ...] = ("checker", "noise", "solid")
    object_yaw_deg: tuple[float, float] = (0.0, 360.0)
    placement_radius: float = 0.4
    distractor_size: tuple[float, float] = (0.05, 0.2)
    full_so3: bool = False
    intrinsics: CameraIntrinsics = field(
        default_factory=lambda: CameraIntrinsics(
            fx=572.4, fy=572.4, cx=319.5, cy=239.5, width=640, height=480))

    def __post_init__(self):
        pairs = {
            "n_distractors": self.n_distractors,
            "object_distance": self.object_distance,
            "camera_elevation_deg": self.camera_elevation_deg,
            "light_count": self.light_count,
            "light_intensity": self.light_intensity,
            "light_color_temp_jitter": self.light_color_temp_jitter,
            "object_yaw_deg": self.object_yaw_deg,
            "distractor_size": self.distractor_size,
        }
        for name, (lo, hi) in pairs.items():
            if lo > hi:
                raise ConfigError(f"{name}: min {lo} > max {hi}")
        if self.n_distractors[0] < 0 or self.light_count[0] < 0:
            raise ConfigError("counts must be >= 0")
        if self.placement_radius <= 0:
            raise ConfigError("placement_radius must be positive")
        for kind in self.background_kinds:
            if kind not in ("checker", "noise", "solid"):
                raise ConfigError(f"unknown background kind {kind!r}")


# -------------------------------------------------------------- scene types

@dataclass(frozen=True)
class BackgroundSpec:
    kind: str                    # checker | noise | solid
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    cell_size: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class DistractorSpec:
    shape: str                   # box | sphere | cylinder
    dims: tuple[float, ...]
    texture_seed: int
    pose: RigidPose


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    intensity: np.ndarray        # RGB radiometric intensity

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "intensity",
                           np.asarray(self.intensity, dtype=np.float64))


@dataclass(frozen=True)
class SceneSample:
    target_poses: tuple[tuple[int, RigidPose], ...]
    distractors: tuple[DistractorSpec, ...]
    lights: tuple[PointLight, ...]
    camera_pose: RigidPose
    intrinsics: CameraIntrinsics
    background: BackgroundSpec
    seed: int


# --------------------------------------------------------------- primitives

def distractor_mesh(spec: DistractorSpec):
    """Instantiate the procedural primitive with its randomized texture."""
    rng = SeededRng(spec.texture_seed)
    base = rng.uniform(0.15, 0.95, size=3)
    alt = np.clip(base + rng.uniform(-0.4, 0.4, size=3), 0.0, 1.0)
    if spec.shape == "box":
        mesh = box(np.asarray(spec.dims), subdiv=4)
    elif spec.shape == "sphere":
        mesh = uv_sphere(spec.dims[0], n_lat=16, n_lon=32)
    elif spec.shape == "cylinder":
        mesh = cylinder(spec.dims[0], spec.dims[1], n_seg=32)
    else:
        raise ConfigError(f"unknown distractor shape {spec.shape!r}")
    # stripe the two colors along z for cheap texture variety
    t = ((mesh.vertices[:, 2] / max(spec.dims[-1], 1e-9)) * 4.0) % 1.0
    colors = np.where((t < 0.5)[:, None], base, alt)
    return mesh.with_colors(colors)


def _distractor_bounds(spec_shape: str, dims: tuple[float, ...]):
    """(bounding-sphere radius, min z) of the primitive in its local frame."""
    if spec_shape == "box":
        half = np.asarray(dims) / 2.0
        return float(np.linalg.norm(half)), -half[2]
    if spec_shape == "sphere":
        return dims[0], -dims[0]
    # cylinder: dims = (radius, height)
    return float(np.hypot(dims[0], dims[1] / 2.0)), -dims[1] / 2.0


# ----------------------------------------------------------------- sampling

def _yaw_pose(yaw_rad: float) -> np.ndarray:
    c, s = np.cos(yaw_rad), np.sin(yaw_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _random_rotation(rng: SeededRng) -> np.ndarray:
    q = rng.normal(size=4)
    return RigidPose.from_quaternion(q / np.linalg.norm(q),
                                     np.zeros(3)).rotation


def _place(rng: SeededRng, ranges: RandomizationRanges, radius: float,
           placed: list[tuple[np.ndarray, float]]) -> np.ndarray | None:
    """One rejection-sampled disc position; None if it overlaps."""
    xy = rng.uniform(-ranges.placement_radius, ranges.placement_radius,
                     size=2)
    if np.linalg.norm(xy) > ranges.placement_radius:
        return None
    for center, r in placed:
        if np.linalg.norm(xy - center[:2]) < radius + r:
            return None
    return xy


def sample_scene(ranges: RandomizationRanges,
                 meshes: list[AlignedTexturedMesh],
                 scene_index: int, master_seed: int) -> SceneSample:
    """Deterministic scene draw for one index."""
    if not meshes:
        raise ConfigError("sample_scene needs at least one target mesh")
    rng = SeededRng(master_seed).child(scene_index)
    placed: list[tuple[np.ndarray, float]] = []

    # targets first: upright (or full SO(3)) + disc placement, rest on z=0
    target_poses = []
    for mesh_id, am in enumerate(meshes):
        radius = am.bounding_radius()
        rot = (_random_rotation(rng) if ranges.full_so3
               else _yaw_pose(np.deg2rad(rng.uniform(*ranges.object_yaw_deg))))
        verts = am.mesh.vertices @ rot.T
        min_z = verts[:, 2].min()
        xy = None
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            xy = _place(rng, ranges, radius, placed)
            if xy is not None:
                break
        if xy is None:
            raise PlacementFailure(
                f"could not place target {mesh_id} after "
                f"{_MAX_PLACEMENT_ATTEMPTS} attempts")
        pose = RigidPose(rot, np.array([xy[0], xy[1], -min_z]))
        target_poses.append((mesh_id, pose))
        placed.append((pose.translation, radius))

    # distractors
    n_d = int(rng.integers(ranges.n_distractors[0],
                           ranges.n_distractors[1] + 1))
    distractors = []
    for k in range(n_d):
        shape = ["box", "sphere", "cylinder"][int(rng.integers(0, 3))]
        lo, hi = ranges.distractor_size
        if shape == "box":
            dims = tuple(rng.uniform(lo, hi, size=3))
        elif shape == "sphere":
            dims = (float(rng.uniform(lo, hi)) / 2.0,)
        else:
            dims = (float(rng.uniform(lo, hi)) / 2.0,
                    float(rng.uniform(lo, hi)))
        radius, min_z = _distractor_bounds(shape, dims)
        yaw = _yaw_pose(np.deg2rad(rng.uniform(0.0, 360.0)))
        xy = None
        for _ in range(_MAX_PLACEMENT_ATTEMPTS):
            xy = _place(rng, ranges, radius, placed)
            if xy is not None:
                break
        if xy is None:
            raise PlacementFailure(
                f"could not place distractor {k} after "
                f"{_MAX_PLACEMENT_ATTEMPTS} attempts")
        pose = RigidPose(yaw, np.array([xy[0], xy[1], -min_z]))
        distractors.append(DistractorSpec(
            shape=shape, dims=dims,
            texture_seed=int(rng.integers(0, 2**31)), pose=pose))
        placed.append((pose.translation, radius))

    # lights: random points in an upper shell around the scene
    n_l = int(rng.integers(ranges.light_count[0], ranges.light_count[1] + 1))
    lights = []
    for _ in range(n_l):
        az = rng.uniform(0.0, 2.0 * np.pi)
        el = np.deg2rad(rng.uniform(20.0, 85.0))
        dist = rng.uniform(1.0, 2.5)
        pos = dist * np.array([np.cos(el) * np.cos(az),
                               np.cos(el) * np.sin(az), np.sin(el)])
        power = rng.uniform(*ranges.light_intensity)
        # warm/cool tint from the color-temperature jitter range
        tint = rng.uniform(*ranges.light_color_temp_jitter)
        color = np.clip(np.array([1.0 + tint, 1.0, 1.0 - tint]), 0.0, None)
        lights.append(PointLight(position=pos, intensity=power * color))

    background = BackgroundSpec(
        kind=ranges.background_kinds[
            int(rng.integers(0, len(ranges.background_kinds)))],
        color_a=tuple(rng.uniform(0.05, 0.95, size=3)),
        color_b=tuple(rng.uniform(0.05, 0.95, size=3)),
        cell_size=float(rng.uniform(0.05, 0.25)),
        seed=int(rng.integers(0, 2**31)))

    targets_world = [pose.apply(meshes[mid].mesh.vertices.mean(axis=0))
                     for mid, pose in target_poses]
    camera_pose, intr = sample_camera(ranges, targets_world, rng)

    return SceneSample(
        target_poses=tuple(target_poses),
        distractors=tuple(distractors),
        lights=tuple(lights),
        camera_pose=camera_pose,
        intrinsics=intr,
        background=background,
        seed=master_seed)


def sample_camera(ranges: RandomizationRanges,
                  targets: list[np.ndarray],
                  rng: SeededRng) -> tuple[RigidPose, CameraIntrinsics]:
    """Camera in a spherical shell about the mean target centroid, aimed at it
    with small post-aim jitter; keeps the centroid projected in-image."""
    if not targets:
        raise ConfigError("sample_camera needs at least one target")
    centroid = np.mean(np.asarray(targets, dtype=np.float64), axis=0)
    intr = ranges.intrinsics
    last_exc: Exception | None = None
    for _ in range(_MAX_LOOKAT_ATTEMPTS):
        dist = rng.uniform(*ranges.object_distance)
        el = np.deg2rad(rng.uniform(*ranges.camera_elevation_deg))
        az = rng.uniform(0.0, 2.0 * np.pi)
        eye = centroid + dist * np.array([np.cos(el) * np.cos(az),
                                          np.cos(el) * np.sin(az),
                                          np.sin(el)])
        try:
            pose = look_at(eye, centroid, np.array([0.0, 0.0, 1.0]))
        except DegenerateLookAt as exc:
            # straight-down views: world z is parallel to the view axis
            try:
                pose = look_at(eye, centroid, np.array([0.0, 1.0, 0.0]))
            except DegenerateLookAt:
                last_exc = exc
                continue
        # post-aim jitter: small rotation about the camera's own x/y axes
        jx, jy = np.deg2rad(rng.uniform(-_AIM_JITTER_DEG, _AIM_JITTER_DEG,
                                        size=2))
        cx, sx = np.cos(jx), np.sin(jx)
        cy, sy = np.cos(jy), np.sin(jy)
        rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        jittered = RigidPose(pose.rotation @ rx @ ry, pose.translation)
        cam = jittered.inverse().apply(centroid)
        if cam[2] <= 1e-9:
            continue
        u = intr.fx * cam[0] / cam[2] + intr.cx
        v = intr.fy * cam[1] / cam[2] + intr.cy
        if 0.0 <= u < intr.width and 0.0 <= v < intr.height:
            return jittered, intr
    raise PlacementFailure(
        f"no valid camera after {_MAX_LOOKAT_ATTEMPTS} attempts"
        + (f" ({last_exc})" if last_exc else ""))


# --------------------------------------------------------------- background

def _value_noise(u: np.ndarray, v: np.ndarray, seed: int) -> np.ndarray:
    """4-octave value noise in [0,1] from a seeded lattice hash."""

    def lattice(ix, iy):
        h = (ix * np.int64(374761393) + iy * np.int64(668265263)
             + np.int64(seed) * np.int64(2654435761)) & np.int64(0x7FFFFFFF)
        h = (h ^ (h >> 13)) * np.int64(1274126177) & np.int64(0x7FFFFFFF)
        return (h % 65536).astype(np.float64) / 65535.0

    total = np.zeros_like(u, dtype=np.float64)
    amp, freq, norm = 1.0, 4.0, 0.0
    for _ in range(4):
        x, y = u * freq, v * freq
        ix, iy = np.floor(x).astype(np.int64), np.floor(y).astype(np.int64)
        fx, fy = x - ix, y - iy
        fx = fx * fx * (3.0 - 2.0 * fx)
        fy = fy * fy * (3.0 - 2.0 * fy)
        n00, n10 = lattice(ix, iy), lattice(ix + 1, iy)
        n01, n11 = lattice(ix, iy + 1), lattice(ix + 1, iy + 1)
        total += amp * ((n00 * (1 - fx) + n10 * fx) * (1 - fy)
                        + (n01 * (1 - fx) + n11 * fx) * fy)
        norm += amp
        amp *= 0.5
        freq *= 2.0
    return total / norm


def sample_background(spec: BackgroundSpec, seed: int | None = None):
    """Texture function f(u, v) -> RGB for scalar or array u, v."""
    if seed is None:
        seed = spec.seed
    ca = np.asarray(spec.color_a, dtype=np.float64)
    cb = np.asarray(spec.color_b, dtype=np.float64)

    if spec.kind == "solid":
        def tex(u, v):
            u = np.asarray(u, dtype=np.float64)
            return np.broadcast_to(ca, u.shape + (3,)).copy()
    elif spec.kind == "checker":
        def tex(u, v):
            u = np.asarray(u, dtype=np.float64)
            v = np.asarray(v, dtype=np.float64)
            parity = (np.floor(u / spec.cell_size)
                      + np.floor(v / spec.cell_size)).astype(np.int64) % 2
            return np.where((parity == 0)[..., None], ca, cb)
    elif spec.kind == "noise":
        def tex(u, v):
            u = np.asarray(u, dtype=np.float64)
            v = np.asarray(v, dtype=np.float64)
            t = _value_noise(u, v, seed)[..., None]
            return ca * (1.0 - t) + cb * t
    else:
        raise ConfigError(f"unknown background kind {spec.kind!r}")
    return tex
