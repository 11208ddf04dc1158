"""Dataset directory I/O.

Layout: rgb/%06d.png (8-bit sRGB), depth/%06d.png (16-bit millimeters),
instance/%06d.png (8-bit ids), manifest.json. The manifest is the single
source of truth for poses and annotations; floats are written as full
precision decimal text so read(write(x)) == x within 1e-9.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from ..core import CameraIntrinsics, RigidPose
from ..core.image import (read_png_color, read_png_depth_mm, read_png_ids,
                          write_png_color, write_png_depth_mm, write_png_ids)
from ..errors import SchemaError
from .annotations import AnnotationRecord
from .render import RenderOutput


@dataclass(frozen=True)
class FrameRecord:
    index: int
    rgb_path: str
    depth_path: str
    instance_path: str
    cam_pose: RigidPose          # camera-to-world
    annotations: tuple[AnnotationRecord, ...]
    seed: int


@dataclass(frozen=True)
class DatasetManifest:
    intrinsics: CameraIntrinsics
    frames: tuple[FrameRecord, ...]


def _pose_to_rows(pose: RigidPose) -> list[list[float]]:
    return [[float(x) for x in row] for row in pose.to_matrix()]


def _pose_from_rows(rows, what: str) -> RigidPose:
    m = np.asarray(rows, dtype=np.float64)
    if m.shape != (4, 4):
        raise SchemaError(f"{what}: expected a 4x4 matrix")
    return RigidPose.from_matrix(m)


def _record_to_json(rec: AnnotationRecord) -> dict:
    return {
        "id": rec.object_id,
        "cam_from_obj": _pose_to_rows(rec.cam_from_obj),
        "bbox_visible": [float(x) for x in rec.bbox2d_visible],
        "bbox_amodal": [float(x) for x in rec.bbox2d_amodal],
        "keypoints2d": [[float(u), float(v)] for u, v in rec.keypoints2d],
        "keypoints3d": [[float(a) for a in p] for p in rec.keypoints3d_obj],
        "visib_fract": float(rec.visib_fract),
    }


def _record_from_json(d: dict, what: str) -> AnnotationRecord:
    for key in ("id", "cam_from_obj", "bbox_visible", "bbox_amodal",
                "keypoints2d", "keypoints3d", "visib_fract"):
        if key not in d:
            raise SchemaError(f"{what}: missing field {key!r}")
    kp2 = np.asarray(d["keypoints2d"], dtype=np.float64)
    kp3 = np.asarray(d["keypoints3d"], dtype=np.float64)
    if kp2.shape != (9, 2) or kp3.shape != (9, 3):
        raise SchemaError(f"{what}: keypoints must be 9x2 and 9x3")
    return AnnotationRecord(
        object_id=int(d["id"]),
        cam_from_obj=_pose_from_rows(d["cam_from_obj"],
                                     f"{what}.cam_from_obj"),
        bbox2d_visible=tuple(float(x) for x in d["bbox_visible"]),
        bbox2d_amodal=tuple(float(x) for x in d["bbox_amodal"]),
        keypoints2d=kp2,
        keypoints3d_obj=kp3,
        visib_fract=float(d["visib_fract"]))


def write_dataset(frames: list[tuple[RenderOutput, RigidPose,
                                     list[AnnotationRecord], int]],
                  intrinsics: CameraIntrinsics,
                  path: str | os.PathLike) -> DatasetManifest:
    """frames: (render, camera-to-world pose, annotations, scene seed)."""
    if not frames:
        raise ValueError("write_dataset needs at least one frame")
    path = str(path)
    for sub in ("rgb", "depth", "instance"):
        os.makedirs(os.path.join(path, sub), exist_ok=True)
    records = []
    for i, (out, cam_pose, anns, seed) in enumerate(frames):
        rgb_rel = f"rgb/{i:06d}.png"
        depth_rel = f"depth/{i:06d}.png"
        inst_rel = f"instance/{i:06d}.png"
        write_png_color(os.path.join(path, rgb_rel), out.rgb)
        write_png_depth_mm(os.path.join(path, depth_rel), out.depth)
        write_png_ids(os.path.join(path, inst_rel), out.instance)
        records.append(FrameRecord(
            index=i, rgb_path=rgb_rel, depth_path=depth_rel,
            instance_path=inst_rel, cam_pose=cam_pose,
            annotations=tuple(anns), seed=seed))
    manifest = DatasetManifest(intrinsics=intrinsics, frames=tuple(records))
    doc = {
        "intrinsics": {
            "fx": intrinsics.fx, "fy": intrinsics.fy,
            "cx": intrinsics.cx, "cy": intrinsics.cy,
            "w": intrinsics.width, "h": intrinsics.height,
        },
        "frames": [
            {
                "index": fr.index,
                "rgb": fr.rgb_path,
                "depth": fr.depth_path,
                "instance": fr.instance_path,
                "cam_pose": _pose_to_rows(fr.cam_pose),
                "objects": [_record_to_json(r) for r in fr.annotations],
                "seed": fr.seed,
            }
            for fr in records
        ],
    }
    with open(os.path.join(path, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    return manifest


def read_dataset(path: str | os.PathLike) -> DatasetManifest:
    path = str(path)
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise SchemaError(f"{manifest_path}: not found")
    with open(manifest_path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if "intrinsics" not in doc or "frames" not in doc:
        raise SchemaError(f"{manifest_path}: missing intrinsics or frames")
    ik = doc["intrinsics"]
    for key in ("fx", "fy", "cx", "cy", "w", "h"):
        if key not in ik:
            raise SchemaError(f"{manifest_path}: intrinsics missing {key!r}")
    intrinsics = CameraIntrinsics(fx=float(ik["fx"]), fy=float(ik["fy"]),
                                  cx=float(ik["cx"]), cy=float(ik["cy"]),
                                  width=int(ik["w"]), height=int(ik["h"]))
    frames = []
    for k, fr in enumerate(doc["frames"]):
        what = f"frame {k}"
        for key in ("index", "rgb", "depth", "instance", "cam_pose",
                    "objects", "seed"):
            if key not in fr:
                raise SchemaError(f"{what}: missing field {key!r}")
        for key in ("rgb", "depth", "instance"):
            full = os.path.join(path, fr[key])
            if not os.path.isfile(full):
                raise SchemaError(f"{what}: referenced file {fr[key]} "
                                  "does not exist")
        frames.append(FrameRecord(
            index=int(fr["index"]),
            rgb_path=fr["rgb"], depth_path=fr["depth"],
            instance_path=fr["instance"],
            cam_pose=_pose_from_rows(fr["cam_pose"], f"{what}.cam_pose"),
            annotations=tuple(_record_from_json(o, f"{what} object {j}")
                              for j, o in enumerate(fr["objects"])),
            seed=int(fr["seed"])))
    idx = [fr.index for fr in frames]
    if idx != list(range(len(frames))):
        raise SchemaError("frame indices are not dense from 0")
    return DatasetManifest(intrinsics=intrinsics, frames=tuple(frames))


def read_frame_images(manifest: DatasetManifest, path: str | os.PathLike,
                      index: int):
    """(rgb ImageBuffer, depth meters, instance ids) for one frame."""
    fr = manifest.frames[index]
    base = str(path)
    return (read_png_color(os.path.join(base, fr.rgb_path)),
            read_png_depth_mm(os.path.join(base, fr.depth_path)),
            read_png_ids(os.path.join(base, fr.instance_path)))
