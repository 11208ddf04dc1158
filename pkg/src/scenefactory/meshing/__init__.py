from .grid import ScalarGrid, lattice_points, sample_grid
from .marching import marching_cubes
from .refine import refine_mesh, bake_vertex_colors
from .align import AlignedTexturedMesh, align_pca
from .chamfer import chamfer_distance, sample_surface, surface_distances
from .meshio import write_ply, read_ply, read_obj, load_mesh

__all__ = [
    "ScalarGrid", "lattice_points", "sample_grid", "marching_cubes",
    "refine_mesh", "bake_vertex_colors", "AlignedTexturedMesh", "align_pca",
    "chamfer_distance", "sample_surface", "surface_distances",
    "write_ply", "read_ply", "read_obj", "load_mesh",
]
