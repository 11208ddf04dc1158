"""Exception types shared across the pipeline."""


class SceneFactoryError(Exception):
    """Base class for all pipeline errors."""


class NonPositiveDepth(SceneFactoryError):
    """Point is at or behind the camera plane."""


class OutOfBounds(SceneFactoryError):
    """Pixel coordinate outside the image."""


class DegenerateLookAt(SceneFactoryError):
    """Forward and up directions are (nearly) parallel, or eye == target."""


class EmptyMesh(SceneFactoryError):
    """Operation requires a mesh with at least one face."""


class OutOfDomain(SceneFactoryError):
    """Query point outside the field domain [-1, 1]^3."""


class NonFiniteLoss(SceneFactoryError):
    """Training loss became NaN/inf; carries the iteration index."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration


class DegenerateGeometry(SceneFactoryError):
    """Geometry too degenerate to process (coplanar points, zero radius...)."""


class PlacementFailure(SceneFactoryError):
    """Rejection sampling could not place all objects without overlap."""


class DegenerateConfiguration(SceneFactoryError):
    """2D-3D correspondences are rank deficient (e.g. coplanar points)."""


class DimensionMismatch(SceneFactoryError):
    """Images have incompatible shapes."""


class SchemaError(SceneFactoryError):
    """Structured file missing or mistyping a field; message names the field."""


class MissingImage(SceneFactoryError):
    """A referenced image file does not exist."""


class ConfigError(SceneFactoryError):
    """Invalid pipeline configuration."""
