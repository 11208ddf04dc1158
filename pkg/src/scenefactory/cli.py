"""Command-line pipeline driver: capture -> train -> mesh -> generate.

One JSON config drives everything; stages write into subdirectories of the
output directory and are idempotent (a completed stage is skipped on rerun,
so repeated runs leave byte-identical artifacts). Exit codes: 0 success,
2 config error, 3 numeric/runtime error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import ingest
from .annotate import annotate_frame, pnp_verify, trace_scene, write_dataset
from .composer import sample_scene
from .config import PipelineConfig, load_config, resolve_path
from .core import CameraIntrinsics, RigidPose, TriangleMesh
from .errors import (ConfigError, DegenerateConfiguration, DegenerateGeometry,
                     DegenerateLookAt, DimensionMismatch, EmptyMesh,
                     MissingImage, NonFiniteLoss, NonPositiveDepth,
                     OutOfBounds, OutOfDomain, PlacementFailure, SchemaError)
from .field.model import FieldModel
from .field.render import render_image
from .field.train import RayDataset, TrainConfig, train
from .meshing import (AlignedTexturedMesh, align_pca, bake_vertex_colors,
                      chamfer_distance, load_mesh, marching_cubes,
                      refine_mesh, sample_grid, write_ply)
from .metrics import EvalReport, psnr, ssim

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NUMERIC_ERRORS = (NonFiniteLoss, DegenerateGeometry, DegenerateLookAt,
                   EmptyMesh, PlacementFailure, DegenerateConfiguration,
                   NonPositiveDepth, OutOfBounds, OutOfDomain,
                   DimensionMismatch, FloatingPointError)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _capture_intrinsics(cap) -> CameraIntrinsics:
    # ~64 deg horizontal FOV: the unit-sphere object fits at radius-2 range
    return CameraIntrinsics(fx=0.8 * cap.width, fy=0.8 * cap.width,
                            cx=(cap.width - 1) / 2.0,
                            cy=(cap.height - 1) / 2.0,
                            width=cap.width, height=cap.height)


def cmd_capture(cfg: PipelineConfig, out_dir: Path,
                config_path: str) -> Path:
    cap_dir = out_dir / "capture"
    if (cap_dir / "frames.json").is_file():
        _log("capture: frames.json exists, stage skipped")
        return cap_dir
    cap = cfg.capture
    if cap.mode == "virtual":
        mesh = load_mesh(resolve_path(config_path, cap.oracle_mesh_path))
        traj = ingest.generate_circular_trajectory(cap.trajectory)
        frames = ingest.virtual_capture(mesh, traj, _capture_intrinsics(cap))
    else:
        frames_path = Path(resolve_path(config_path, cap.frames_path))
        if frames_path.is_dir():
            frames_path = frames_path / "frames.json"
        frames = ingest.load_posed_frames(frames_path)
        remasked = []
        for fr in frames.frames:
            mask = ingest.extract_foreground_mask(fr.image, cap.bg_color,
                                                  cap.mask_tol)
            remasked.append(dataclasses.replace(fr, mask=mask))
        frames = ingest.FrameSet(tuple(remasked), frames.scene_scale,
                                 frames.scene_offset)
    frames = ingest.normalize_to_unit_sphere(frames)
    ingest.write_posed_frames(frames, cap_dir)
    _log(f"capture: wrote {len(frames.frames)} frames to {cap_dir}")
    return cap_dir


def _split_holdout(frames):
    """Every 8th frame is held out for evaluation."""
    train_f, held = [], []
    for i, fr in enumerate(frames.frames):
        (held if i % 8 == 0 else train_f).append(fr)
    return train_f, held


def _write_loss_csv(path: Path, curve) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,loss\n")
        for it, loss in curve:
            fh.write(f"{it},{loss!r}\n")


def _read_loss_csv(path: Path):
    curve = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            it, loss = line.strip().split(",")
            curve.append((int(it), float(loss)))
    return curve


def cmd_train(cfg: PipelineConfig, out_dir: Path) -> Path:
    train_dir = out_dir / "train"
    train_dir.mkdir(parents=True, exist_ok=True)
    ckpt = train_dir / "model.ckpt"
    loss_csv = train_dir / "loss.csv"

    frames = ingest.load_posed_frames(out_dir / "capture" / "frames.json")
    train_frames, held = _split_holdout(frames)
    model = FieldModel(cfg.field_cfg)

    done = 0
    curve = []
    if ckpt.is_file() and loss_csv.is_file():
        curve = _read_loss_csv(loss_csv)
        done = curve[-1][0] + 1 if curve else 0
        if done >= cfg.train.iterations:
            _log(f"train: checkpoint at iteration {done} complete, skipped")
            return train_dir
        model = FieldModel.load(ckpt)
        _log(f"train: resuming from iteration {done}")

    remaining = cfg.train.iterations - done
    tcfg = dataclasses.replace(cfg.train, iterations=remaining,
                               seed=cfg.train.seed + done)
    t0 = time.time()
    if remaining > 0:
        new_curve = train(model, RayDataset.from_frames(train_frames), tcfg,
                          cfg.render)
        curve.extend((it + done, loss) for it, loss in new_curve)
    model.save(ckpt)
    _write_loss_csv(loss_csv, curve)

    report = {"iterations": cfg.train.iterations,
              "train_seconds": time.time() - t0,
              "heldout_psnr": [], "heldout_ssim": []}
    for fr in held:
        img, _ = render_image(model, fr.cam_pose, fr.intrinsics, cfg.render)
        from .core import ImageBuffer
        gt = ImageBuffer(fr.image.pixels * fr.mask.pixels)
        report["heldout_psnr"].append(psnr(img, gt))
        report["heldout_ssim"].append(ssim(img, gt))
    report["mean_psnr"] = float(np.mean(report["heldout_psnr"]))
    report["mean_ssim"] = float(np.mean(report["heldout_ssim"]))
    with open(train_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    _log(f"train: held-out PSNR {report['mean_psnr']:.2f} dB, "
         f"SSIM {report['mean_ssim']:.3f}")
    return train_dir


def cmd_mesh(cfg: PipelineConfig, out_dir: Path, config_path: str) -> Path:
    mesh_dir = out_dir / "mesh"
    ply_path = mesh_dir / "model.ply"
    if ply_path.is_file():
        _log("mesh: model.ply exists, stage skipped")
        return mesh_dir
    mesh_dir.mkdir(parents=True, exist_ok=True)
    model = FieldModel.load(out_dir / "train" / "model.ckpt")

    grid = sample_grid(model, cfg.meshing.grid_res)
    coarse = marching_cubes(grid)
    if coarse.is_empty():
        raise EmptyMesh("marching cubes produced no surface")
    refined = refine_mesh(coarse, model, iters=cfg.meshing.refine_iters,
                          cell_size=grid.spacing)
    refined = bake_vertex_colors(refined, model)

    if cfg.meshing.manual_alignment is not None:
        m = np.asarray(cfg.meshing.manual_alignment, dtype=np.float64)
        override = (RigidPose.from_matrix(m), cfg.meshing.alignment_scale)
        aligned = align_pca(refined, override=override)
    else:
        aligned = align_pca(refined)
    write_ply(aligned.mesh, ply_path)

    report = {"vertices": aligned.mesh.n_vertices,
              "faces": aligned.mesh.n_faces,
              "extents": [float(x) for x in aligned.extents],
              "canonical_from_model":
                  [[float(x) for x in row]
                   for row in aligned.canonical_from_model.to_matrix()],
              "scale": aligned.scale}
    if cfg.capture.mode == "virtual":
        # oracle known: report chamfer in the field's normalized coordinates
        frames = ingest.load_posed_frames(out_dir / "capture" / "frames.json")
        oracle = load_mesh(resolve_path(config_path,
                                        cfg.capture.oracle_mesh_path))
        oracle_n = TriangleMesh(
            (oracle.vertices - frames.scene_offset) * frames.scene_scale,
            oracle.faces, oracle.vertex_colors)
        report["chamfer"] = chamfer_distance(refined, oracle_n,
                                             n_samples=5000, seed=0)
        _log(f"mesh: chamfer vs oracle {report['chamfer']:.5f}")
    with open(mesh_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    _log(f"mesh: {aligned.mesh.n_vertices} vertices -> {ply_path}")
    return mesh_dir


def _load_aligned(mesh_dir: Path, scale: float) -> AlignedTexturedMesh:
    # the stored PLY is already canonical; only table-scale it for composing
    from .meshing import read_ply
    mesh = read_ply(mesh_dir / "model.ply")
    scaled = TriangleMesh(mesh.vertices * scale, mesh.faces,
                          mesh.vertex_colors)
    lo, hi = scaled.aabb()
    return AlignedTexturedMesh(mesh=scaled,
                               canonical_from_model=RigidPose.identity(),
                               scale=1.0, aabb_min=lo, aabb_max=hi)


def cmd_generate(cfg: PipelineConfig, out_dir: Path,
                 threads: int = 1) -> Path:
    ds_dir = out_dir / "dataset"
    if (ds_dir / "manifest.json").is_file():
        _log("generate: manifest.json exists, stage skipped")
        return ds_dir
    intr = cfg.dataset.ranges.intrinsics
    if cfg.dataset.n_frames == 0:
        for sub in ("rgb", "depth", "instance"):
            (ds_dir / sub).mkdir(parents=True, exist_ok=True)
        doc = {"intrinsics": {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx,
                              "cy": intr.cy, "w": intr.width,
                              "h": intr.height},
               "frames": []}
        with open(ds_dir / "manifest.json", "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
        _log("generate: wrote empty dataset")
        return ds_dir

    aligned = _load_aligned(out_dir / "mesh", cfg.dataset.object_scale)
    meshes = [aligned]

    def one_frame(i: int):
        scene = sample_scene(cfg.dataset.ranges, meshes, i, cfg.master_seed)
        out = trace_scene(scene, meshes)
        anns = annotate_frame(scene, meshes, out)
        return (out, scene.camera_pose, anns, cfg.master_seed)

    n = cfg.dataset.n_frames
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            frames = list(pool.map(one_frame, range(n)))
    else:
        frames = [one_frame(i) for i in range(n)]
    write_dataset(frames, intr, ds_dir)
    _log(f"generate: wrote {n} frames to {ds_dir}")
    return ds_dir


def cmd_all(cfg: PipelineConfig, out_dir: Path, config_path: str,
            threads: int = 1) -> EvalReport:
    report = EvalReport()
    t0 = time.time()
    cmd_capture(cfg, out_dir, config_path)
    report.stage_seconds["capture"] = time.time() - t0
    t0 = time.time()
    cmd_train(cfg, out_dir)
    report.stage_seconds["train"] = time.time() - t0
    t0 = time.time()
    cmd_mesh(cfg, out_dir, config_path)
    report.stage_seconds["mesh"] = time.time() - t0
    t0 = time.time()
    cmd_generate(cfg, out_dir, threads=threads)
    report.stage_seconds["generate"] = time.time() - t0

    train_report = out_dir / "train" / "report.json"
    if train_report.is_file():
        with open(train_report) as fh:
            tr = json.load(fh)
        report.view_psnr = list(tr.get("heldout_psnr", []))
        report.view_ssim = list(tr.get("heldout_ssim", []))
    mesh_report = out_dir / "mesh" / "report.json"
    if mesh_report.is_file():
        with open(mesh_report) as fh:
            report.chamfer = json.load(fh).get("chamfer")

    doc = report.to_json()
    doc["config"] = dataclasses.asdict(cfg)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    print(json.dumps(doc, indent=1, sort_keys=True))
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scenefactory",
        description="Train a radiance field from posed frames, extract a "
                    "textured mesh, and render an annotated synthetic "
                    "dataset.")
    p.add_argument("--config", required=True, help="pipeline JSON config")
    p.add_argument("--stage", default="all",
                   choices=["capture", "train", "mesh", "generate", "all"])
    p.add_argument("--output", default=None,
                   help="output directory (overrides config output_dir)")
    p.add_argument("--seed", type=int, default=None,
                   help="overrides master_seed")
    p.add_argument("--threads", type=int, default=1,
                   help="renderer thread count (training stays serial)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, master_seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out_dir = Path(args.output if args.output else
                       resolve_path(args.config, cfg.output_dir))
        out_dir.mkdir(parents=True, exist_ok=True)
    except (ConfigError, SchemaError) as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"io error: {exc}")
        return EXIT_IO

    try:
        if args.stage == "capture":
            cmd_capture(cfg, out_dir, args.config)
        elif args.stage == "train":
            cmd_train(cfg, out_dir)
        elif args.stage == "mesh":
            cmd_mesh(cfg, out_dir, args.config)
        elif args.stage == "generate":
            cmd_generate(cfg, out_dir, threads=args.threads)
        else:
            cmd_all(cfg, out_dir, args.config, threads=args.threads)
    except (ConfigError,) as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        _log(f"numeric error: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except (OSError, MissingImage, SchemaError) as exc:
        _log(f"io error: {type(exc).__name__}: {exc}")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
