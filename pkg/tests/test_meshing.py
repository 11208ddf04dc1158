"""Iso-surface extraction, refinement, alignment, chamfer, and mesh IO."""
import numpy as np
import pytest

from scenefactory.core import RigidPose, SeededRng, TriangleMesh
from scenefactory.errors import DegenerateGeometry, SchemaError
from scenefactory.meshing import (ScalarGrid, align_pca, bake_vertex_colors,
                                  chamfer_distance, lattice_points, load_mesh,
                                  marching_cubes, read_obj, read_ply,
                                  refine_mesh, sample_grid, sample_surface,
                                  surface_distances, write_ply)
from scenefactory.primitives import textured_box, two_tone_sphere, uv_sphere
from tests.conftest import sphere_sdf


def edge_face_counts(mesh: TriangleMesh) -> dict[tuple[int, int], int]:
    counts: dict[tuple[int, int], int] = {}
    for f in mesh.faces:
        for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    return counts


class TestScalarGrid:
    def test_spacing_and_coords(self):
        g = ScalarGrid(9, np.zeros((9, 9, 9)))
        assert g.spacing == pytest.approx(0.25)
        c = g.coords()
        assert c[0] == -1.0 and c[-1] == 1.0 and len(c) == 9

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ScalarGrid(9, np.zeros((9, 9, 8)))

    def test_rejects_nonfinite(self):
        v = np.zeros((8, 8, 8))
        v[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            ScalarGrid(8, v)

    def test_lattice_points_span(self):
        pts = lattice_points(9)
        assert pts.shape == (9**3, 3)
        assert np.allclose(pts[0], [-1, -1, -1])
        assert np.allclose(pts[-1], [1, 1, 1])

    def test_sample_grid_matches_function(self):
        g = sample_grid(sphere_sdf, 16)
        pts = lattice_points(16)
        assert np.allclose(g.values.reshape(-1), sphere_sdf(pts))

    def test_sample_grid_min_resolution(self):
        with pytest.raises(ValueError):
            sample_grid(sphere_sdf, 4)


class TestMarchingCubes:
    RES = 64
    RADIUS = 0.5

    @pytest.fixture(scope="class")
    @staticmethod
    def sphere_iso():
        return marching_cubes(sample_grid(sphere_sdf, TestMarchingCubes.RES))

    def test_vertices_near_surface(self, sphere_iso):
        # every vertex within one cell diagonal of the true iso-surface
        cell = 2.0 / (self.RES - 1)
        d = np.abs(sphere_sdf(sphere_iso.vertices))
        assert d.max() < cell * np.sqrt(3)

    def test_area_matches_sphere(self, sphere_iso):
        area = sphere_iso.face_areas().sum()
        exact = 4 * np.pi * self.RADIUS**2
        assert abs(area - exact) / exact < 0.05

    def test_closed_two_manifold(self, sphere_iso):
        counts = edge_face_counts(sphere_iso)
        assert set(counts.values()) == {2}

    def test_genus_zero(self, sphere_iso):
        v = len(sphere_iso.vertices)
        f = len(sphere_iso.faces)
        e = len(edge_face_counts(sphere_iso))
        assert v - e + f == 2

    def test_consistent_orientation(self, sphere_iso):
        # each undirected edge is traversed once in each direction
        directed = set()
        for fc in sphere_iso.faces:
            for a, b in ((fc[0], fc[1]), (fc[1], fc[2]), (fc[2], fc[0])):
                assert (a, b) not in directed
                directed.add((a, b))
        for a, b in directed:
            assert (b, a) in directed

    def test_normals_point_outward(self, sphere_iso):
        a = sphere_iso.vertices[sphere_iso.faces[:, 0]]
        b = sphere_iso.vertices[sphere_iso.faces[:, 1]]
        c = sphere_iso.vertices[sphere_iso.faces[:, 2]]
        n = np.cross(b - a, c - a)
        centers = (a + b + c) / 3
        assert ((n * centers).sum(axis=1) > 0).all()

    def test_no_sign_change_gives_empty_mesh(self):
        g = ScalarGrid(8, np.ones((8, 8, 8)))
        mesh = marching_cubes(g)
        assert mesh.is_empty()

    def test_iso_offset_shifts_radius(self):
        mesh = marching_cubes(sample_grid(sphere_sdf, self.RES), iso=0.1)
        r = np.linalg.norm(mesh.vertices, axis=1)
        assert abs(r.mean() - 0.6) < 0.01

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_grids_are_manifold(self, seed):
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((24, 24, 24))
        # mild smoothing so features span multiple cells
        from scipy import ndimage
        g = ScalarGrid(24, ndimage.gaussian_filter(raw, sigma=1.5))
        mesh = marching_cubes(g)
        if mesh.is_empty():
            pytest.skip("no crossing")
        counts = edge_face_counts(mesh)
        assert max(counts.values()) <= 2


class TestRefine:
    def test_refine_reduces_surface_error(self):
        mesh = marching_cubes(sample_grid(sphere_sdf, 24))
        before = np.abs(sphere_sdf(mesh.vertices)).mean()
        out = refine_mesh(mesh, sphere_sdf, iters=10)
        after = np.abs(sphere_sdf(out.vertices)).mean()
        assert after < before
        assert after < 1e-4  # Newton projection converges on a smooth SDF

    def test_refine_preserves_topology(self):
        mesh = marching_cubes(sample_grid(sphere_sdf, 24))
        out = refine_mesh(mesh, sphere_sdf, iters=3)
        assert np.array_equal(out.faces, mesh.faces)
        assert len(out.vertices) == len(mesh.vertices)

    def test_refine_empty_mesh_is_noop(self):
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
        assert refine_mesh(empty, sphere_sdf).is_empty()

    def test_bake_vertex_colors(self):
        mesh = marching_cubes(sample_grid(sphere_sdf, 16))

        class Model:
            def diffuse_numpy(self, p):
                return np.stack([np.full(len(p), 2.0),      # clipped to 1
                                 np.full(len(p), -1.0),     # clipped to 0
                                 0.5 * np.ones(len(p))], axis=1)

        out = bake_vertex_colors(mesh, Model())
        assert np.allclose(out.vertex_colors, [1.0, 0.0, 0.5])
        assert np.array_equal(out.vertices, mesh.vertices)


class TestAlign:
    def test_box_extents_sorted(self, box_mesh):
        aligned = align_pca(box_mesh)
        assert np.allclose(aligned.extents, [2.0, 1.0, 0.5], atol=1e-9)

    def test_aabb_centered(self, box_mesh):
        aligned = align_pca(box_mesh)
        assert np.allclose(aligned.aabb_min, -aligned.aabb_max, atol=1e-9)

    def test_rotation_is_special_orthogonal(self, box_mesh):
        rot = align_pca(box_mesh).canonical_from_model.rotation
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(rot) == pytest.approx(1.0)

    def test_alignment_undoes_rigid_motion(self, box_mesh):
        rng = np.random.default_rng(3)
        q = rng.standard_normal(4)
        pose = RigidPose.from_quaternion(q / np.linalg.norm(q),
                                         rng.uniform(-1, 1, 3))
        moved = TriangleMesh(pose.apply(box_mesh.vertices), box_mesh.faces,
                             box_mesh.vertex_colors)
        aligned = align_pca(moved)
        assert np.allclose(aligned.extents, [2.0, 1.0, 0.5], atol=1e-6)
        # canonical vertices agree with the unmoved alignment up to axis sign
        base = align_pca(box_mesh)
        assert np.allclose(np.sort(np.abs(aligned.mesh.vertices), axis=0),
                           np.sort(np.abs(base.mesh.vertices), axis=0),
                           atol=1e-6)

    def test_override_applied_verbatim(self, box_mesh):
        pose = RigidPose.from_quaternion([0.0, 0.0, 0.0, 1.0],
                                         [0.1, 0.2, 0.3])
        aligned = align_pca(box_mesh, override=(pose, 2.0))
        expect = box_mesh.vertices * 2.0 @ pose.rotation.T + pose.translation
        assert np.allclose(aligned.mesh.vertices, expect)
        assert aligned.scale == 2.0

    def test_coplanar_raises(self):
        xs, ys = np.meshgrid(np.linspace(0, 1, 4), np.linspace(0, 1, 4))
        v = np.stack([xs.ravel(), ys.ravel(), np.zeros(16)], axis=1)
        faces = [[i * 4 + j, i * 4 + j + 1, (i + 1) * 4 + j]
                 for i in range(3) for j in range(3)]
        with pytest.raises(DegenerateGeometry):
            align_pca(TriangleMesh(v, np.array(faces)))

    def test_empty_raises(self):
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(DegenerateGeometry):
            align_pca(empty)

    def test_keypoints_are_corners_then_centroid(self, box_mesh):
        aligned = align_pca(box_mesh)
        kp = aligned.keypoints3d()
        assert kp.shape == (9, 3)
        assert np.allclose(kp[0], aligned.aabb_min)
        assert np.allclose(kp[7], aligned.aabb_max)
        assert np.allclose(kp[8], 0.0, atol=1e-9)

    def test_bounding_radius(self, box_mesh):
        aligned = align_pca(box_mesh)
        assert aligned.bounding_radius() == pytest.approx(
            np.linalg.norm([1.0, 0.5, 0.25]))


class TestChamfer:
    def test_concentric_spheres(self):
        a = uv_sphere(1.0)
        b = uv_sphere(1.1)
        d = chamfer_distance(a, b, n_samples=5000, seed=0)
        assert abs(d - 0.1) / 0.1 < 0.10

    def test_self_distance_zero(self, box_mesh):
        assert chamfer_distance(box_mesh, box_mesh, n_samples=2000) < 1e-9

    def test_symmetric(self):
        a = uv_sphere(1.0, n_lat=16, n_lon=32)
        b = uv_sphere(1.3, n_lat=16, n_lon=32)
        ab = chamfer_distance(a, b, n_samples=3000, seed=1)
        ba = chamfer_distance(b, a, n_samples=3000, seed=1)
        assert ab == pytest.approx(ba, rel=0.05)

    def test_empty_raises(self, box_mesh):
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
        with pytest.raises(ValueError):
            chamfer_distance(empty, box_mesh)

    def test_sample_surface_on_surface(self):
        mesh = uv_sphere(1.0)
        pts = sample_surface(mesh, 2000, SeededRng(0))
        r = np.linalg.norm(pts, axis=1)
        assert pts.shape == (2000, 3)
        assert (np.abs(r - 1.0) < 0.01).all()  # facet sagitta at 48x96

    def test_sample_surface_area_weighted(self, box_mesh):
        pts = sample_surface(box_mesh, 8000, SeededRng(1))
        # 2x1 faces carry 2/7 of the total area 2*(2+1+0.5) each
        on_top = np.abs(pts[:, 2] - 0.25) < 1e-9
        assert abs(on_top.mean() - 2.0 / 7.0) < 0.03

    def test_surface_distances_analytic(self, box_mesh):
        pts = np.array([[2.0, 0.0, 0.0],   # 1 beyond the +x face
                        [0.0, 0.0, 1.25],  # 1 above the top face
                        [0.0, 0.0, 0.0],   # inside: 0.25 to top/bottom
                        [2.0, 1.5, 0.25]]) # corner distance sqrt(2)
        d = surface_distances(pts, box_mesh)
        assert np.allclose(d, [1.0, 1.0, 0.25, np.sqrt(2.0)], atol=1e-9)


class TestMeshIO:
    def test_ply_round_trip(self, tmp_path, box_mesh):
        path = tmp_path / "box.ply"
        write_ply(box_mesh, path)
        back = read_ply(path)
        assert np.allclose(back.vertices, box_mesh.vertices, atol=1e-7)
        assert np.array_equal(back.faces, box_mesh.faces)
        # colors quantized to 8 bits on write
        assert np.abs(back.vertex_colors
                      - box_mesh.vertex_colors).max() <= 0.5 / 255 + 1e-9

    def test_ply_without_colors(self, tmp_path):
        mesh = uv_sphere(1.0, n_lat=8, n_lon=8)
        path = tmp_path / "s.ply"
        write_ply(mesh, path)
        back = read_ply(path)
        # colorless meshes are written with a uniform placeholder gray
        assert np.allclose(back.vertex_colors, back.vertex_colors[0])
        assert np.allclose(back.vertices, mesh.vertices, atol=1e-7)

    def test_read_ply_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ply"
        path.write_text("ploy\n")
        with pytest.raises(SchemaError):
            read_ply(path)

    def test_read_ply_rejects_binary(self, tmp_path):
        path = tmp_path / "bin.ply"
        path.write_text("ply\nformat binary_little_endian 1.0\n"
                        "element vertex 0\nelement face 0\nend_header\n")
        with pytest.raises(SchemaError, match="ascii"):
            read_ply(path)

    def test_read_ply_rejects_missing_axis(self, tmp_path):
        path = tmp_path / "noz.ply"
        path.write_text("ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\n"
                        "element face 0\nproperty list uchar int "
                        "vertex_indices\nend_header\n0 0\n")
        with pytest.raises(SchemaError, match="z"):
            read_ply(path)

    def test_read_ply_rejects_quads(self, tmp_path):
        path = tmp_path / "quad.ply"
        path.write_text("ply\nformat ascii 1.0\nelement vertex 4\n"
                        "property float x\nproperty float y\n"
                        "property float z\nelement face 1\n"
                        "property list uchar int vertex_indices\n"
                        "end_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
                        "4 0 1 2 3\n")
        with pytest.raises(SchemaError):
            read_ply(path)

    def test_obj_triangulates_quads(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                        "f 1 2 3 4\n")
        mesh = read_obj(path)
        assert np.array_equal(mesh.faces, [[0, 1, 2], [0, 2, 3]])

    def test_obj_negative_indices(self, tmp_path):
        path = tmp_path / "neg.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        mesh = read_obj(path)
        assert np.array_equal(mesh.faces, [[0, 1, 2]])

    def test_obj_empty_raises(self, tmp_path):
        path = tmp_path / "empty.obj"
        path.write_text("# nothing\n")
        with pytest.raises(SchemaError):
            read_obj(path)

    def test_load_mesh_dispatch(self, tmp_path, box_mesh):
        ply = tmp_path / "m.ply"
        write_ply(box_mesh, ply)
        assert np.allclose(load_mesh(ply).vertices, box_mesh.vertices,
                           atol=1e-7)
        obj = tmp_path / "m.obj"
        obj.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        assert len(load_mesh(obj).faces) == 1
        with pytest.raises(SchemaError):
            load_mesh(tmp_path / "m.stl")
