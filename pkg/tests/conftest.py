import numpy as np
import pytest

from scenefactory.core import CameraIntrinsics, TriangleMesh
from scenefactory.meshing import align_pca
from scenefactory.primitives import textured_box, two_tone_sphere


@pytest.fixture(scope="session")
def sphere_mesh():
    return two_tone_sphere()


@pytest.fixture(scope="session")
def box_mesh():
    return textured_box()


@pytest.fixture(scope="session")
def small_aligned_box(box_mesh):
    """Table-scale (8 cm long) aligned box for compose/annotate tests."""
    scaled = TriangleMesh(box_mesh.vertices * 0.04, box_mesh.faces,
                          box_mesh.vertex_colors)
    return align_pca(scaled)


@pytest.fixture(scope="session")
def small_intrinsics():
    return CameraIntrinsics(fx=286.2, fy=286.2, cx=159.5, cy=119.5,
                            width=320, height=240)


def sphere_sdf(p: np.ndarray, radius: float = 0.5) -> np.ndarray:
    return np.linalg.norm(np.atleast_2d(p), axis=-1) - radius
