from .camera import CameraIntrinsics, Ray, pixel_ray, pixel_ray_grid, project, project_many
from .image import ImageBuffer
from .mesh import TriangleMesh
from .pose import RigidPose, compose, look_at, orthonormalize
from .rng import SeededRng

__all__ = [
    "CameraIntrinsics", "ImageBuffer", "Ray", "RigidPose", "SeededRng",
    "TriangleMesh", "compose", "look_at", "orthonormalize",
    "pixel_ray", "pixel_ray_grid", "project", "project_many",
]
