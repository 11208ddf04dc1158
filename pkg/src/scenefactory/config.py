"""Pipeline configuration: one JSON document drives every stage.

Every field has a documented default; unknown keys are rejected so typos
fail loudly at validation time rather than silently using defaults.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .composer import RandomizationRanges
from .core import CameraIntrinsics
from .errors import ConfigError
from .field.model import FieldConfig
from .field.render import RenderConfig
from .field.train import TrainConfig
from .ingest import TrajectoryConfig


@dataclass(frozen=True)
class CaptureConfig:
    mode: str = "virtual"             # virtual | ingest
    oracle_mesh_path: str | None = None   # virtual mode: mesh to render
    frames_path: str | None = None        # ingest mode: posed-frames dir
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    bg_color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mask_tol: float = 0.05
    width: int = 128                  # virtual-capture image size
    height: int = 128

    def __post_init__(self):
        if self.mode not in ("virtual", "ingest"):
            raise ConfigError(f"capture.mode must be virtual|ingest, "
                              f"got {self.mode!r}")
        if self.mode == "virtual" and self.oracle_mesh_path is None:
            raise ConfigError("capture.mode=virtual needs oracle_mesh_path")
        if self.mode == "ingest" and self.frames_path is None:
            raise ConfigError("capture.mode=ingest needs frames_path")
        if self.oracle_mesh_path is not None and self.frames_path is not None:
            raise ConfigError("set exactly one of oracle_mesh_path / "
                              "frames_path")


@dataclass(frozen=True)
class MeshingConfig:
    grid_res: int = 128
    refine_iters: int = 10
    manual_alignment: tuple | None = None  # row-major 4x4; skips PCA
    alignment_scale: float = 1.0           # used with manual_alignment
    color_samples: int = 0                 # reserved

    def __post_init__(self):
        if self.grid_res < 8:
            raise ConfigError("meshing.grid_res must be >= 8")
        if self.refine_iters < 0:
            raise ConfigError("meshing.refine_iters must be >= 0")
        if self.manual_alignment is not None:
            m = np.asarray(self.manual_alignment, dtype=np.float64)
            if m.shape != (4, 4):
                raise ConfigError("meshing.manual_alignment must be 4x4")


@dataclass(frozen=True)
class DatasetConfig:
    n_frames: int = 50
    ranges: RandomizationRanges = field(default_factory=RandomizationRanges)
    object_scale: float = 0.1   # normalized units -> meters on the table

    def __post_init__(self):
        if self.n_frames < 0:
            raise ConfigError("dataset.n_frames must be >= 0")
        if self.object_scale <= 0:
            raise ConfigError("dataset.object_scale must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    field_cfg: FieldConfig = field(default_factory=FieldConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    meshing: MeshingConfig = field(default_factory=MeshingConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    output_dir: str = "pipeline_out"
    master_seed: int = 0


def _build(cls, data: dict, where: str):
    """Instantiate a (frozen) dataclass from a dict, rejecting unknown keys."""
    names = {f.name for f in dataclasses.fields(cls)}
    bad = set(data) - names
    if bad:
        raise ConfigError(f"{where}: unknown keys {sorted(bad)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _tupled(x):
    if isinstance(x, list):
        return tuple(_tupled(v) for v in x)
    return x


def config_from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"capture", "field", "train", "render", "meshing", "dataset",
             "output_dir", "master_seed"}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"unknown top-level keys {sorted(bad)}")

    cap = dict(doc.get("capture", {}))
    if "trajectory" in cap:
        cap["trajectory"] = _build(TrajectoryConfig, dict(cap["trajectory"]),
                                   "capture.trajectory")
    if "bg_color" in cap:
        cap["bg_color"] = tuple(cap["bg_color"])
    capture = _build(CaptureConfig, cap, "capture")

    ds = dict(doc.get("dataset", {}))
    if "ranges" in ds:
        rr = {k: _tupled(v) for k, v in dict(ds["ranges"]).items()}
        if "intrinsics" in rr:
            rr["intrinsics"] = _build(CameraIntrinsics,
                                      dict(ds["ranges"]["intrinsics"]),
                                      "dataset.ranges.intrinsics")
        ds["ranges"] = _build(RandomizationRanges, rr, "dataset.ranges")
    dataset = _build(DatasetConfig, ds, "dataset")

    render = dict(doc.get("render", {}))
    if "background" in render:
        render["background"] = tuple(render["background"])
    mesh = dict(doc.get("meshing", {}))
    if "manual_alignment" in mesh and mesh["manual_alignment"] is not None:
        mesh["manual_alignment"] = _tupled(mesh["manual_alignment"])

    return PipelineConfig(
        capture=capture,
        field_cfg=_build(FieldConfig, dict(doc.get("field", {})), "field"),
        train=_build(TrainConfig, dict(doc.get("train", {})), "train"),
        render=_build(RenderConfig, render, "render"),
        meshing=_build(MeshingConfig, mesh, "meshing"),
        dataset=dataset,
        output_dir=str(doc.get("output_dir", "pipeline_out")),
        master_seed=int(doc.get("master_seed", 0)))


def load_config(path: str | os.PathLike) -> PipelineConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    cfg = config_from_dict(doc)
    validate_paths(cfg, base=os.path.dirname(os.path.abspath(path)))
    return cfg


def validate_paths(cfg: PipelineConfig, base: str = ".") -> None:
    """Fail before any work if referenced inputs are missing."""
    cap = cfg.capture
    for name, p in (("oracle_mesh_path", cap.oracle_mesh_path),
                    ("frames_path", cap.frames_path)):
        if p is not None:
            full = p if os.path.isabs(p) else os.path.join(base, p)
            if not os.path.exists(full):
                raise ConfigError(f"capture.{name}: path does not exist: {p}")


def resolve_path(cfg_path: str, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(
        os.path.dirname(os.path.abspath(cfg_path)), p)
