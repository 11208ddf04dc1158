"""Regular scalar-field sampling over the [-1, 1]^3 lattice."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScalarGrid:
    """Lattice of `resolution` points per axis spanning [-1, 1] inclusive;
    spacing is 2 / (resolution - 1)."""

    resolution: int
    values: np.ndarray  # (R, R, R), indexed [ix, iy, iz]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.resolution,) * 3:
            raise ValueError(f"values shape {v.shape} != resolution^3")
        if not np.isfinite(v).all():
            raise ValueError("non-finite grid values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def spacing(self) -> float:
        return 2.0 / (self.resolution - 1)

    def coords(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.resolution)


def lattice_points(res: int) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, res)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)


def sample_grid(sdf_fn, res: int) -> ScalarGrid:
    """sdf_fn: (N, 3) points -> (N,) values. Accepts a FieldModel too."""
    if res < 8:
        raise ValueError("resolution must be >= 8")
    fn = sdf_fn.sdf_numpy if hasattr(sdf_fn, "sdf_numpy") else sdf_fn
    vals = np.asarray(fn(lattice_points(res)), dtype=np.float64)
    return ScalarGrid(res, vals.reshape(res, res, res))
