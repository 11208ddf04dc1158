"""Surface-weighted volume rendering of the SDF field.

Opacity per segment comes from the logistic CDF of the signed distance at
consecutive samples, so rendering weights concentrate at the zero level set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..core import CameraIntrinsics, ImageBuffer, RigidPose, pixel_ray_grid

EPS = 1e-6


@dataclass(frozen=True)
class RenderConfig:
    samples_per_ray: int = 96
    near: float | None = None     # None: from unit-sphere intersection
    far: float | None = None
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.samples_per_ray < 2:
            raise ValueError("samples_per_ray must be >= 2")
        if self.near is not None and self.far is not None and not self.near < self.far:
            raise ValueError("near must be < far")


def ray_sphere_bounds(origins: torch.Tensor, dirs: torch.Tensor,
                      radius: float = 1.0) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Entry/exit distances of each ray with the bounding sphere."""
    b = (origins * dirs).sum(-1)
    c = (origins * origins).sum(-1) - radius * radius
    disc = b * b - c
    hit = disc > 0
    sq = torch.sqrt(torch.clamp(disc, min=0.0))
    near = torch.clamp(-b - sq, min=1e-4)
    far = -b + sq
    hit = hit & (far > near)
    return hit, near, far


def render_rays(model, origins: torch.Tensor, dirs: torch.Tensor,
                cfg: RenderConfig, jitter: torch.Tensor | None = None
                ) -> dict[str, torch.Tensor]:
    """Batch render. origins/dirs (N, 3); jitter (N, S) in [0,1) or None
    for midpoint sampling. Returns rgb, opacity, depth, weights, points."""
    n = origins.shape[0]
    s = cfg.samples_per_ray
    dtype = origins.dtype
    hit, near, far = ray_sphere_bounds(origins, dirs)
    if cfg.near is not None:
        near = torch.full_like(near, cfg.near)
    if cfg.far is not None:
        far = torch.full_like(far, cfg.far)

    offs = torch.arange(s, dtype=dtype).unsqueeze(0)
    if jitter is None:
        jitter = torch.full((n, s), 0.5, dtype=dtype)
    t = near[:, None] + (far - near)[:, None] * (offs + jitter) / s  # (N, S)
    pts = origins[:, None, :] + t[:, :, None] * dirs[:, None, :]
    flat = pts.reshape(-1, 3).clamp(-1.0, 1.0)

    sdf, feat = model.sdf(flat)
    sdf = sdf.reshape(n, s)
    inv_std = model.inv_std
    cdf = torch.sigmoid(sdf * inv_std)  # logistic CDF of scaled distance
    alpha = torch.clamp((cdf[:, :-1] - cdf[:, 1:])
                        / torch.clamp(cdf[:, :-1], min=EPS), min=0.0, max=1.0)
    alpha = alpha * hit[:, None].to(dtype)
    trans = torch.cumprod(
        torch.cat([torch.ones(n, 1, dtype=dtype), 1.0 - alpha + 1e-7], dim=1),
        dim=1)[:, :-1]
    weights = trans * alpha  # (N, S-1)

    dirs_rep = dirs[:, None, :].expand(n, s, 3).reshape(-1, 3)
    diffuse = model.diffuse(feat)
    specular = model.specular(feat, dirs_rep)
    rgb_samples = torch.clamp(diffuse + specular, 0.0, 1.0).reshape(n, s, 3)[:, :-1]

    opacity = weights.sum(dim=1)
    bg = torch.tensor(cfg.background, dtype=dtype)
    rgb = (weights[:, :, None] * rgb_samples).sum(dim=1) \
        + (1.0 - opacity)[:, None] * bg
    depth = (weights * t[:, :-1]).sum(dim=1) / torch.clamp(opacity, min=EPS)
    return {"rgb": rgb, "opacity": opacity, "depth": depth,
            "weights": weights, "points": flat, "sdf": sdf}


def render_ray(model, ray, cfg: RenderConfig):
    """Single-ray convenience wrapper: (rgb, opacity, depth) as numpy/floats."""
    o = torch.tensor(np.asarray(ray.origin), dtype=torch.float32).unsqueeze(0)
    d = torch.tensor(np.asarray(ray.direction), dtype=torch.float32).unsqueeze(0)
    with torch.no_grad():
        out = render_rays(model, o, d, cfg)
    return (out["rgb"][0].numpy().astype(np.float64),
            float(out["opacity"][0]), float(out["depth"][0]))


def render_image(model, cam_pose: RigidPose, intr: CameraIntrinsics,
                 cfg: RenderConfig, chunk: int = 8192) -> tuple[ImageBuffer, np.ndarray]:
    """Per-pixel render over the grid; returns image + opacity map."""
    origin, dirs = pixel_ray_grid(intr, cam_pose)
    flat = torch.from_numpy(dirs.reshape(-1, 3).astype(np.float32))
    o = torch.from_numpy(np.broadcast_to(origin, flat.shape).astype(np.float32).copy())
    rgbs, ops = [], []
    with torch.no_grad():
        for i in range(0, len(flat), chunk):
            out = render_rays(model, o[i:i + chunk], flat[i:i + chunk], cfg)
            rgbs.append(out["rgb"].numpy())
            ops.append(out["opacity"].numpy())
    rgb = np.concatenate(rgbs).reshape(intr.height, intr.width, 3)
    op = np.concatenate(ops).reshape(intr.height, intr.width)
    return ImageBuffer(np.clip(rgb, 0.0, 1.0).astype(np.float32)), op
