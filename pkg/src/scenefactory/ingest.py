"""Posed, masked training frames: virtual capture or file ingestion, then
normalization of the scene into the unit sphere (field domain [-1,1]^3).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .annotate import tracer
from .core import (CameraIntrinsics, ImageBuffer, RigidPose, TriangleMesh,
                   look_at, pixel_ray_grid)
from .core.image import (read_png_color, read_png_gray, write_png_color,
                         write_png_gray)
from .errors import DegenerateGeometry, EmptyMesh, MissingImage, SchemaError

TARGET_RADIUS = 0.9
# internal +Z-forward <-> file -Z-forward: negate camera Y and Z basis columns
_FLIP_YZ = np.diag([1.0, -1.0, -1.0])


@dataclass(frozen=True)
class DirectionalLight:
    """Single directional light + ambient floor used by virtual capture."""
    direction: tuple = (0.3, 0.2, -1.0)
    intensity: float = 0.9


@dataclass(frozen=True)
class CapturedFrame:
    image: ImageBuffer
    mask: ImageBuffer
    cam_pose: RigidPose  # camera-to-world, +Z forward
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if (self.image.width, self.image.height) != (self.mask.width, self.mask.height):
            raise ValueError("image and mask dimensions differ")
        m = self.mask.pixels
        if not np.isin(m, (0.0, 1.0)).all():
            raise ValueError("mask values must be 0 or 1")


@dataclass(frozen=True)
class FrameSet:
    frames: tuple
    scene_scale: float = 1.0
    scene_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class TrajectoryConfig:
    n_frames: int = 105
    radius: float = 2.0
    elevation_deg: float = 20.0
    full_sweep: bool = True

    def __post_init__(self):
        if self.n_frames < 3:
            raise ValueError("n_frames must be >= 3")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if not -90 < self.elevation_deg < 90:
            raise ValueError("elevation out of (-90, 90)")


def generate_circular_trajectory(cfg: TrajectoryConfig) -> list[RigidPose]:
    """Evenly spaced ring of cameras aimed at the origin (world Z up)."""
    poses = []
    el = np.deg2rad(cfg.elevation_deg)
    sweep = 2 * np.pi if cfg.full_sweep else np.pi
    for i in range(cfg.n_frames):
        az = sweep * i / cfg.n_frames
        eye = cfg.radius * np.array([np.cos(el) * np.cos(az),
                                     np.cos(el) * np.sin(az),
                                     np.sin(el)])
        poses.append(look_at(eye, np.zeros(3), (0.0, 0.0, 1.0)))
    return poses


def virtual_capture(mesh: TriangleMesh, traj: list[RigidPose],
                    intr: CameraIntrinsics,
                    light: DirectionalLight = DirectionalLight()) -> FrameSet:
    """Render one masked frame per pose with the shared ray tracer."""
    if mesh.is_empty():
        raise EmptyMesh("virtual_capture needs a non-empty mesh")
    scene = tracer.build_scene([(mesh, RigidPose.identity(), 1.0, 1)])
    frames = []
    for pose in traj:
        t, tri, u, v, dirs, origin = tracer.render_hits(scene, intr, pose)
        hit = tri >= 0
        rgb = np.zeros((intr.height, intr.width, 3), dtype=np.float64)
        if hit.any():
            ht, htri = t[hit], tri[hit]
            hdirs = dirs[hit]
            pts = origin[None, :] + ht[:, None] * hdirs
            normals = tracer.triangle_normals(scene, htri)
            albedo = tracer.interpolate_colors(scene, htri, u[hit], v[hit])
            rgb[hit] = tracer.shade_points_directional(
                pts, normals, albedo, hdirs,
                np.asarray(light.direction, dtype=np.float64), light.intensity)
        mask = hit.astype(np.float32)
        frames.append(CapturedFrame(
            ImageBuffer(np.clip(rgb, 0, 1).astype(np.float32)),
            ImageBuffer(mask[:, :, None]), pose, intr))
    return FrameSet(tuple(frames))


def extract_foreground_mask(image: ImageBuffer, bg_color, tol: float) -> ImageBuffer:
    """Chroma threshold (Chebyshev distance to bg_color) + 3x3 majority."""
    diff = np.abs(image.pixels[:, :, :3] - np.asarray(bg_color, dtype=np.float32))
    raw = (diff.max(axis=2) > tol).astype(np.float32)
    votes = ndimage.uniform_filter(raw, size=3, mode="nearest") * 9.0
    out = (votes > 4.5).astype(np.float32)
    return ImageBuffer(out[:, :, None])


# ------------------------------------------------------- posed-frames file

def write_posed_frames(frames: FrameSet, out_dir) -> Path:
    """Write images, masks and the posed-frames JSON (-Z-forward poses)."""
    out_dir = Path(out_dir)
    (out_dir / "rgb").mkdir(parents=True, exist_ok=True)
    (out_dir / "mask").mkdir(parents=True, exist_ok=True)
    intr = frames.frames[0].intrinsics
    doc = {
        "fl_x": intr.fx, "fl_y": intr.fy, "cx": intr.cx, "cy": intr.cy,
        "w": intr.width, "h": intr.height,
        "scene_scale": frames.scene_scale,
        "scene_offset": list(frames.scene_offset),
        "frames": [],
    }
    for i, fr in enumerate(frames.frames):
        img_rel = f"rgb/{i:04d}.png"
        mask_rel = f"mask/{i:04d}.png"
        write_png_color(out_dir / img_rel, fr.image)
        write_png_gray(out_dir / mask_rel, fr.mask)
        m = np.eye(4)
        m[:3, :3] = fr.cam_pose.rotation @ _FLIP_YZ
        m[:3, 3] = fr.cam_pose.translation
        doc["frames"].append({
            "file_path": img_rel,
            "mask_path": mask_rel,
            "transform_matrix": [list(row) for row in m],
        })
    path = out_dir / "frames.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def _require(doc: dict, key: str):
    if key not in doc:
        raise SchemaError(f"missing field '{key}'")
    return doc[key]


def load_posed_frames(path) -> FrameSet:
    """Load a posed-frames JSON; converts file poses to +Z-forward."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"no such file: {path}")
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}") from e
    intr = CameraIntrinsics(
        fx=float(_require(doc, "fl_x")), fy=float(_require(doc, "fl_y")),
        cx=float(_require(doc, "cx")), cy=float(_require(doc, "cy")),
        width=int(_require(doc, "w")), height=int(_require(doc, "h")))
    frames = []
    for i, fr in enumerate(_require(doc, "frames")):
        m = np.array(_require(fr, "transform_matrix"), dtype=np.float64)
        if m.shape != (4, 4):
            raise SchemaError(f"frames[{i}].transform_matrix must be 4x4")
        pose = RigidPose(m[:3, :3] @ _FLIP_YZ, m[:3, 3])
        img_path = path.parent / _require(fr, "file_path")
        if not img_path.exists():
            raise MissingImage(str(img_path))
        image = read_png_color(img_path)
        if "mask_path" in fr and fr["mask_path"]:
            mask_path = path.parent / fr["mask_path"]
            if not mask_path.exists():
                raise MissingImage(str(mask_path))
            mask = read_png_gray(mask_path)
            mask = ImageBuffer((mask.pixels > 0.5).astype(np.float32))
        else:
            mask = ImageBuffer(np.ones((image.height, image.width, 1), dtype=np.float32))
        frames.append(CapturedFrame(image, mask, pose, intr))
    return FrameSet(tuple(frames),
                    float(doc.get("scene_scale", 1.0)),
                    np.array(doc.get("scene_offset", [0.0, 0.0, 0.0])))


# ----------------------------------------------------------- normalization

def normalize_to_unit_sphere(frames: FrameSet) -> FrameSet:
    """Map the masked object's bounding sphere to center 0, radius 0.9.

    Center: least-squares intersection of the principal rays, projected back
    onto each ray and averaged. Radius: widest mask cone tangent sphere.
    """
    usable = [f for f in frames.frames if f.mask.pixels.sum() > 0]
    if not usable:
        raise DegenerateGeometry("no frame with a nonempty mask")

    eyes = np.array([f.cam_pose.translation for f in usable])
    fwds = np.array([f.cam_pose.rotation[:, 2] for f in usable])
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for o, d in zip(eyes, fwds):
        m = np.eye(3) - np.outer(d, d)
        a += m
        b += m @ o
    x = np.linalg.lstsq(a, b, rcond=None)[0]
    proj = eyes + ((x - eyes) * fwds).sum(axis=1, keepdims=True) * fwds
    center = proj.mean(axis=0)

    radius = 0.0
    for f in usable:
        ys, xs = np.nonzero(f.mask.pixels[:, :, 0] > 0.5)
        _, dirs = pixel_ray_grid(f.intrinsics, f.cam_pose)
        d = dirs[ys, xs]
        eye = f.cam_pose.translation
        axis = center - eye
        dist = np.linalg.norm(axis)
        if dist < 1e-12:
            continue
        cosang = np.clip(d @ (axis / dist), -1.0, 1.0)
        theta = np.arccos(cosang).max() + 0.5 / f.intrinsics.fx  # half-pixel pad
        radius = max(radius, dist * np.sin(min(theta, np.pi / 2)))
    if radius <= 0:
        raise DegenerateGeometry("mask cone radius estimate <= 0")

    scale = TARGET_RADIUS / radius
    new_frames = tuple(
        replace(f, cam_pose=RigidPose(f.cam_pose.rotation,
                                      (f.cam_pose.translation - center) * scale))
        for f in frames.frames)
    # cumulative map from the original ingest frame: x -> s*(x - c)
    total_scale = frames.scene_scale * scale
    total_offset = frames.scene_offset + center / frames.scene_scale
    return FrameSet(new_frames, total_scale, total_offset)
