"""SDF field with diffuse/specular color heads.

Geometry is signed distance (negative inside); the surface is its zero
level set. An explicit sphere term (radius 0.5) plus a small-initialized
network gives a stable spherical initialization.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import OutOfDomain
from .encoding import HashGridEncoding

GEO_FEAT_DIM = 15
INIT_SPHERE_RADIUS = 0.5
_CKPT_MAGIC = b"SFCKPT1\n"


@dataclass(frozen=True)
class FieldConfig:
    n_levels: int = 8
    base_resolution: int = 16
    growth: float = 1.5
    features_per_level: int = 2
    table_size: int = 2 ** 16
    hidden: int = 64
    sh_degree: int = 4  # bands; 16 basis functions
    init_inv_std: float = 20.0
    seed: int = 0


def sh_basis(dirs: torch.Tensor) -> torch.Tensor:
    """Real spherical harmonics through band 3 (16 values), unit dirs."""
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    xx, yy, zz = x * x, y * y, z * z
    return torch.stack([
        torch.full_like(x, 0.28209479177387814),
        -0.48860251190291987 * y,
        0.48860251190291987 * z,
        -0.48860251190291987 * x,
        1.0925484305920792 * x * y,
        -1.0925484305920792 * y * z,
        0.31539156525252005 * (3 * zz - 1),
        -1.0925484305920792 * x * z,
        0.5462742152960396 * (xx - yy),
        -0.5900435899266435 * y * (3 * xx - yy),
        2.890611442640554 * x * y * z,
        -0.4570457994644658 * y * (5 * zz - 1),
        0.3731763325901154 * z * (5 * zz - 3),
        -0.4570457994644658 * x * (5 * zz - 1),
        1.445305721320277 * z * (xx - yy),
        -0.5900435899266435 * x * (xx - 3 * yy),
    ], dim=-1)


def _mlp(dims: list[int], act, final_scale: float, gen: torch.Generator) -> nn.Sequential:
    layers = []
    for i in range(len(dims) - 1):
        lin = nn.Linear(dims[i], dims[i + 1])
        with torch.no_grad():
            std = (2.0 / dims[i]) ** 0.5
            if i == len(dims) - 2:
                std *= final_scale
            lin.weight.normal_(0.0, std, generator=gen)
            lin.bias.zero_()
        layers.append(lin)
        if i < len(dims) - 2:
            layers.append(act())
    return nn.Sequential(*layers)


class FieldModel(nn.Module):
    def __init__(self, cfg: FieldConfig = FieldConfig()):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(cfg.seed + 0x11D)
        self.encoding = HashGridEncoding(cfg.n_levels, cfg.base_resolution,
                                         cfg.growth, cfg.features_per_level,
                                         cfg.table_size)
        in_dim = self.encoding.output_dim + 3
        act = lambda: nn.Softplus(beta=100)
        self.sdf_head = _mlp([in_dim, cfg.hidden, cfg.hidden, 1 + GEO_FEAT_DIM],
                             act, 1e-4, gen)
        self.diffuse_head = _mlp([GEO_FEAT_DIM, cfg.hidden, cfg.hidden, 3],
                                 nn.ReLU, 1.0, gen)
        self.specular_head = _mlp([GEO_FEAT_DIM + 16, cfg.hidden, cfg.hidden, 3],
                                  nn.ReLU, 1.0, gen)
        with torch.no_grad():
            self.specular_head[-1].bias.fill_(-3.0)  # starts near-black
        self.log_inv_std = nn.Parameter(
            torch.tensor(float(np.log(cfg.init_inv_std))))

    # ------------------------------------------------------------ queries

    @property
    def inv_std(self) -> torch.Tensor:
        return torch.exp(self.log_inv_std)

    def sdf(self, x: torch.Tensor, check_domain: bool = False) -> tuple[torch.Tensor, torch.Tensor]:
        """x: (N, 3) in [-1, 1]^3 -> (signed distance (N,), geo features)."""
        if check_domain and (x.abs() > 1.0 + 1e-9).any():
            raise OutOfDomain("query outside [-1, 1]^3")
        h = self.sdf_head(torch.cat([self.encoding(x), x], dim=-1))
        sphere = torch.linalg.norm(x, dim=-1) - INIT_SPHERE_RADIUS
        return h[:, 0] + sphere, h[:, 1:]

    def sdf_with_grad(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """SDF value, spatial gradient (autograd), geo features."""
        x = x.requires_grad_(True)
        s, feat = self.sdf(x)
        grad = torch.autograd.grad(s.sum(), x, create_graph=self.training)[0]
        return s, grad, feat

    def diffuse(self, feat: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.diffuse_head(feat))

    def specular(self, feat: torch.Tensor, dirs: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.specular_head(
            torch.cat([feat, sh_basis(dirs)], dim=-1)))

    # ------------------------------------------------- numpy conveniences

    def _np_query(self, pts: np.ndarray, fn, chunk: int = 2 ** 16):
        pts = np.asarray(pts, dtype=np.float32).reshape(-1, 3)
        outs = []
        with torch.no_grad():
            for i in range(0, len(pts), chunk):
                outs.append(fn(torch.from_numpy(pts[i:i + chunk])))
        return np.concatenate(outs)

    def sdf_numpy(self, pts: np.ndarray) -> np.ndarray:
        return self._np_query(pts, lambda t: self.sdf(t)[0].numpy().astype(np.float64))

    def sdf_grad_numpy(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float32).reshape(-1, 3)
        was_training = self.training
        self.eval()
        outs = []
        for i in range(0, len(pts), 2 ** 14):
            t = torch.from_numpy(pts[i:i + 2 ** 14])
            _, g, _ = self.sdf_with_grad(t)
            outs.append(g.detach().numpy().astype(np.float64))
        if was_training:
            self.train()
        return np.concatenate(outs)

    def diffuse_numpy(self, pts: np.ndarray) -> np.ndarray:
        def fn(t):
            _, feat = self.sdf(t)
            return self.diffuse(feat).numpy().astype(np.float64)
        return self._np_query(pts, fn)

    # ------------------------------------------------------ flat vector IO

    def parameter_names(self) -> list[str]:
        return [n for n, _ in self.named_parameters()]

    def flatten(self) -> np.ndarray:
        with torch.no_grad():
            return np.concatenate([p.detach().numpy().ravel().astype(np.float32)
                                   for _, p in self.named_parameters()])

    def unflatten(self, vec: np.ndarray) -> None:
        vec = np.array(vec, dtype=np.float32)  # copy: torch needs writable
        off = 0
        with torch.no_grad():
            for _, p in self.named_parameters():
                n = p.numel()
                p.copy_(torch.from_numpy(vec[off:off + n].reshape(p.shape)))
                off += n
        if off != len(vec):
            raise ValueError(f"parameter vector length {len(vec)} != {off}")

    def save(self, path) -> None:
        vec = self.flatten()
        header = json.dumps({"config": asdict(self.cfg), "n_params": len(vec)},
                            sort_keys=True).encode() + b"\n"
        with open(Path(path), "wb") as f:
            f.write(_CKPT_MAGIC)
            f.write(header)
            f.write(vec.astype("<f4").tobytes())

    @staticmethod
    def load(path) -> "FieldModel":
        with open(Path(path), "rb") as f:
            magic = f.read(len(_CKPT_MAGIC))
            if magic != _CKPT_MAGIC:
                raise ValueError("not a field checkpoint")
            header = json.loads(f.readline().decode())
            vec = np.frombuffer(f.read(), dtype="<f4")
        if len(vec) != header["n_params"]:
            raise ValueError("checkpoint truncated")
        model = FieldModel(FieldConfig(**header["config"]))
        model.unflatten(vec)
        return model
