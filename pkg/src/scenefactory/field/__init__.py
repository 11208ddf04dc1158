from .encoding import HashGridEncoding
from .model import FieldConfig, FieldModel, sh_basis
from .render import RenderConfig, render_image, render_ray, render_rays
from .train import RayDataset, TrainConfig, photometric_loss, train

__all__ = [
    "FieldConfig", "FieldModel", "HashGridEncoding", "RayDataset",
    "RenderConfig", "TrainConfig", "photometric_loss", "render_image",
    "render_ray", "render_rays", "sh_basis", "train",
]
