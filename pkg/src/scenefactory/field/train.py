"""Field training: photometric + mask + eikonal losses, Adam, cosine decay.

Training is single-threaded by design so that a fixed seed reproduces the
loss curve bit for bit; outer pipeline parallelism never touches it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..core import pixel_ray_grid
from ..errors import NonFiniteLoss
from .render import RenderConfig, render_rays

EIKONAL_SUBSAMPLE = 1024


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 5000
    rays_per_batch: int = 4096
    learning_rate: float = 1e-2
    lambda_mask: float = 0.1
    lambda_eikonal: float = 0.05
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        for name in ("iterations", "rays_per_batch", "learning_rate",
                     "lambda_mask", "lambda_eikonal", "log_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class RayDataset:
    """All training rays flattened over frames."""
    origins: torch.Tensor
    dirs: torch.Tensor
    rgb: torch.Tensor
    mask: torch.Tensor

    @staticmethod
    def from_frames(frames) -> "RayDataset":
        origins, dirs, rgbs, masks = [], [], [], []
        for fr in frames:
            o, d = pixel_ray_grid(fr.intrinsics, fr.cam_pose)
            npix = d.shape[0] * d.shape[1]
            origins.append(np.broadcast_to(o, (npix, 3)).astype(np.float32))
            dirs.append(d.reshape(-1, 3).astype(np.float32))
            rgbs.append(fr.image.pixels[:, :, :3].reshape(-1, 3))
            masks.append(fr.mask.pixels.reshape(-1))
        return RayDataset(
            torch.from_numpy(np.concatenate(origins).copy()),
            torch.from_numpy(np.concatenate(dirs)),
            torch.from_numpy(np.concatenate(rgbs)),
            torch.from_numpy(np.concatenate(masks)))

    def __len__(self) -> int:
        return len(self.origins)


def eikonal_term(model, points: torch.Tensor, gen: torch.Generator) -> torch.Tensor:
    """Mean (|grad f| - 1)^2 over a subsample of the given points."""
    if len(points) > EIKONAL_SUBSAMPLE:
        sel = torch.randperm(len(points), generator=gen)[:EIKONAL_SUBSAMPLE]
        points = points[sel]
    pts = points.detach().clone().requires_grad_(True)
    s, _ = model.sdf(pts)
    grad = torch.autograd.grad(s.sum(), pts, create_graph=True)[0]
    return ((torch.linalg.norm(grad, dim=-1) - 1.0) ** 2).mean()


def photometric_loss(model, batch: dict[str, torch.Tensor], rcfg: RenderConfig,
                     tcfg: TrainConfig, gen: torch.Generator | None = None
                     ) -> tuple[torch.Tensor, dict[str, float]]:
    """Data + mask BCE + eikonal losses on one ray batch."""
    n = batch["origins"].shape[0]
    if gen is not None:
        jitter = torch.rand(n, rcfg.samples_per_ray, generator=gen)
    else:
        jitter = None
    out = render_rays(model, batch["origins"], batch["dirs"], rcfg, jitter)
    target = batch["rgb"] * batch["mask"][:, None]
    data = ((out["rgb"] - target) ** 2).sum(dim=1).mean()
    op = torch.clamp(out["opacity"], min=1e-4, max=1.0 - 1e-4)
    bce = -(batch["mask"] * torch.log(op)
            + (1.0 - batch["mask"]) * torch.log(1.0 - op)).mean()
    eik = eikonal_term(model, out["points"],
                       gen if gen is not None else torch.Generator().manual_seed(0))
    loss = data + tcfg.lambda_mask * bce + tcfg.lambda_eikonal * eik
    return loss, {"data": float(data.detach()), "mask": float(bce.detach()),
                  "eikonal": float(eik.detach())}


def train(model, frames, tcfg: TrainConfig, rcfg: RenderConfig,
          callback=None) -> list[tuple[int, float]]:
    """Optimize in place; returns the recorded (iteration, loss) curve."""
    torch.manual_seed(tcfg.seed)
    gen = torch.Generator().manual_seed(tcfg.seed ^ 0x9E3779B9)
    data = frames if isinstance(frames, RayDataset) else RayDataset.from_frames(
        frames.frames if hasattr(frames, "frames") else frames)
    opt = torch.optim.Adam(model.parameters(), lr=tcfg.learning_rate,
                           betas=(0.9, 0.99), eps=1e-15)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(
        opt, T_max=max(tcfg.iterations, 1))
    curve: list[tuple[int, float]] = []
    model.train()
    for it in range(tcfg.iterations):
        idx = torch.randint(0, len(data), (tcfg.rays_per_batch,), generator=gen)
        batch = {"origins": data.origins[idx], "dirs": data.dirs[idx],
                 "rgb": data.rgb[idx], "mask": data.mask[idx]}
        loss, parts = photometric_loss(model, batch, rcfg, tcfg, gen)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(it)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        sched.step()
        if it == 0 or (it + 1) % tcfg.log_every == 0 or it == tcfg.iterations - 1:
            curve.append((it, float(loss.detach())))
            if callback is not None:
                callback(it, float(loss.detach()), parts)
    model.eval()
    return curve
