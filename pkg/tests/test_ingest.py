"""Capture trajectories, virtual capture, posed-frames I/O, normalization."""
import json

import numpy as np
import pytest

from scenefactory.core import CameraIntrinsics, ImageBuffer, RigidPose
from scenefactory.errors import (DegenerateGeometry, EmptyMesh, MissingImage,
                                 SchemaError)
from scenefactory.ingest import (CapturedFrame, FrameSet, TrajectoryConfig,
                                 extract_foreground_mask,
                                 generate_circular_trajectory,
                                 load_posed_frames, normalize_to_unit_sphere,
                                 virtual_capture, write_posed_frames)
from scenefactory.primitives import uv_sphere

INTR = CameraIntrinsics(fx=100.0, fy=100.0, cx=63.5, cy=63.5,
                        width=128, height=128)


class TestTrajectory:
    def test_paper_count_and_radius(self):
        poses = generate_circular_trajectory(
            TrajectoryConfig(n_frames=105, radius=2.0, elevation_deg=20.0))
        assert len(poses) == 105
        for p in poses:
            assert abs(np.linalg.norm(p.translation) - 2.0) < 1e-9

    def test_four_frame_symmetry(self):
        poses = generate_circular_trajectory(
            TrajectoryConfig(n_frames=4, radius=1.0, elevation_deg=0.0))
        eyes = np.array([p.translation for p in poses])
        assert np.allclose(eyes[0], (1, 0, 0), atol=1e-12)
        assert np.allclose(eyes[1], (0, 1, 0), atol=1e-12)
        assert np.allclose(eyes[0], -eyes[2], atol=1e-12)

    def test_forward_axis_points_at_origin(self):
        poses = generate_circular_trajectory(
            TrajectoryConfig(n_frames=12, radius=3.0, elevation_deg=35.0))
        for p in poses:
            eye = p.translation
            assert np.allclose(p.rotation[:, 2], -eye / np.linalg.norm(eye),
                               atol=1e-9)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrajectoryConfig(n_frames=2)
        with pytest.raises(ValueError):
            TrajectoryConfig(radius=0.0)
        with pytest.raises(ValueError):
            TrajectoryConfig(elevation_deg=90.0)


class TestVirtualCapture:
    def test_empty_mesh_rejected(self):
        from scenefactory.core import TriangleMesh
        with pytest.raises(EmptyMesh):
            virtual_capture(TriangleMesh(np.zeros((0, 3)),
                                         np.zeros((0, 3), dtype=np.int64)),
                            [RigidPose.identity()], INTR)

    def test_sphere_silhouette_radius(self):
        # camera 2 units away on axis: silhouette radius fx*r/sqrt(d^2-r^2)
        mesh = uv_sphere(1.0, 48, 96)
        from scenefactory.core import look_at
        pose = look_at(np.array([0.0, 0.0, -2.0]), np.zeros(3),
                       np.array([0.0, 1.0, 0.0]))
        frames = virtual_capture(mesh, [pose], INTR)
        mask = frames.frames[0].mask.pixels[:, :, 0]
        area = mask.sum()
        expected_r = INTR.fx * 1.0 / np.sqrt(4.0 - 1.0)
        measured_r = np.sqrt(area / np.pi)
        assert abs(measured_r - expected_r) < 1.0

    def test_mask_consistent_with_image(self):
        mesh = uv_sphere(0.8, 24, 48)
        poses = generate_circular_trajectory(
            TrajectoryConfig(n_frames=3, radius=2.5, elevation_deg=10.0))
        frames = virtual_capture(mesh, poses, INTR)
        for fr in frames.frames:
            outside = fr.mask.pixels[:, :, 0] == 0.0
            assert (fr.image.pixels[outside] == 0.0).all()

    def test_mesh_behind_cameras(self):
        mesh = uv_sphere(0.3, 12, 24).transformed(
            np.eye(3), np.array([0.0, 0.0, -10.0]))
        frames = virtual_capture(mesh, [RigidPose.identity()], INTR)
        assert frames.frames[0].mask.pixels.sum() == 0


class TestForegroundMask:
    def test_uniform_bg_gives_empty(self):
        img = ImageBuffer(np.full((16, 16, 3), 0.2, np.float32))
        m = extract_foreground_mask(img, (0.2, 0.2, 0.2), 0.05)
        assert m.pixels.sum() == 0

    def test_half_white_half_bg(self):
        px = np.zeros((16, 16, 3), np.float32)
        px[:, 8:] = 1.0
        m = extract_foreground_mask(ImageBuffer(px), (0.0, 0.0, 0.0), 0.1)
        assert (m.pixels[:, 9:15, 0] == 1.0).all()
        assert (m.pixels[:, :7, 0] == 0.0).all()

    def test_tol_one_saturates(self):
        rng = np.random.default_rng(0)
        img = ImageBuffer(rng.uniform(0, 1, (8, 8, 3)).astype(np.float32))
        m = extract_foreground_mask(img, (0.5, 0.5, 0.5), 1.0)
        assert m.pixels.sum() == 0


def _tiny_frameset(n=3):
    mesh = uv_sphere(0.9, 16, 32)
    poses = generate_circular_trajectory(
        TrajectoryConfig(n_frames=n, radius=2.0, elevation_deg=15.0))
    return virtual_capture(mesh, poses, INTR)


class TestPosedFramesIO:
    def test_round_trip(self, tmp_path):
        frames = _tiny_frameset()
        write_posed_frames(frames, tmp_path)
        back = load_posed_frames(tmp_path / "frames.json")
        assert len(back.frames) == len(frames.frames)
        for a, b in zip(frames.frames, back.frames):
            assert np.allclose(a.cam_pose.to_matrix(), b.cam_pose.to_matrix(),
                               atol=1e-9)
            assert np.array_equal(a.mask.pixels, b.mask.pixels)
            assert np.abs(a.image.pixels - b.image.pixels).max() < 0.02

    def test_minus_z_convention_flip(self, tmp_path):
        doc = {"fl_x": 100.0, "fl_y": 100.0, "cx": 8.0, "cy": 8.0,
               "w": 16, "h": 16,
               "frames": [{"file_path": "rgb.png",
                           "transform_matrix": np.eye(4).tolist()}]}
        from scenefactory.core.image import write_png_color
        write_png_color(tmp_path / "rgb.png",
                        ImageBuffer(np.zeros((16, 16, 3), np.float32)))
        with open(tmp_path / "frames.json", "w") as f:
            json.dump(doc, f)
        back = load_posed_frames(tmp_path / "frames.json")
        assert np.allclose(back.frames[0].cam_pose.rotation,
                           np.diag([1.0, -1.0, -1.0]))

    def test_missing_field_named(self, tmp_path):
        with open(tmp_path / "frames.json", "w") as f:
            json.dump({"fl_y": 1.0}, f)
        with pytest.raises(SchemaError, match="fl_x"):
            load_posed_frames(tmp_path / "frames.json")

    def test_missing_image(self, tmp_path):
        doc = {"fl_x": 1.0, "fl_y": 1.0, "cx": 0.0, "cy": 0.0,
               "w": 4, "h": 4,
               "frames": [{"file_path": "nope.png",
                           "transform_matrix": np.eye(4).tolist()}]}
        with open(tmp_path / "frames.json", "w") as f:
            json.dump(doc, f)
        with pytest.raises(MissingImage):
            load_posed_frames(tmp_path / "frames.json")


class TestNormalization:
    def test_radius_two_sphere_scale(self):
        mesh = uv_sphere(2.0, 32, 64)
        poses = generate_circular_trajectory(
            TrajectoryConfig(n_frames=8, radius=6.0, elevation_deg=10.0))
        frames = virtual_capture(mesh, poses, INTR)
        out = normalize_to_unit_sphere(frames)
        # mask discretization shrinks the cone estimate slightly
        assert abs(out.scene_scale - 0.45) < 0.01
        assert np.linalg.norm(out.scene_offset) < 0.05

    def test_idempotent(self):
        frames = normalize_to_unit_sphere(_tiny_frameset(8))
        again = normalize_to_unit_sphere(frames)
        assert abs(again.scene_scale / frames.scene_scale - 1.0) < 1e-6

    def test_empty_masks_rejected(self):
        fr = _tiny_frameset(3).frames[0]
        blank = CapturedFrame(
            fr.image,
            ImageBuffer(np.zeros_like(fr.mask.pixels)),
            fr.cam_pose, fr.intrinsics)
        with pytest.raises(DegenerateGeometry):
            normalize_to_unit_sphere(FrameSet((blank,)))

    def test_rays_through_mask_centroid_near_origin(self):
        from scenefactory.core.camera import pixel_ray
        out = normalize_to_unit_sphere(_tiny_frameset(8))
        for fr in out.frames:
            ys, xs = np.nonzero(fr.mask.pixels[:, :, 0])
            ray = pixel_ray(fr.intrinsics, fr.cam_pose,
                            float(xs.mean()), float(ys.mean()))
            # distance from origin to the ray
            d = np.linalg.norm(np.cross(ray.direction, -ray.origin))
            assert d < 0.1
