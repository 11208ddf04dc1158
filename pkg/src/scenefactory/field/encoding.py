"""Multiresolution hash-grid positional encoding (trilinear, trainable).

All levels share one flattened table tensor and are interpolated in one
vectorized pass; corner lookups use the classic large-prime XOR hash with
collisions tolerated (training resolves them).
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

_PRIMES = (1, 2654435761, 805459861)

_CORNERS = torch.tensor(
    [[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)],
    dtype=torch.long)


class HashGridEncoding(nn.Module):
    """Trainable feature tables at geometrically growing grid resolutions.

    Input positions live in [-1, 1]^3; output concatenates the trilinearly
    interpolated features of every level (n_levels * features_per_level).
    """

    def __init__(self, n_levels: int = 8, base_resolution: int = 16,
                 growth: float = 1.5, features_per_level: int = 2,
                 table_size: int = 2 ** 16):
        super().__init__()
        self.n_levels = n_levels
        self.base_resolution = base_resolution
        self.growth = growth
        self.features_per_level = features_per_level
        self.table_size = table_size
        self.resolutions = [int(np.floor(base_resolution * growth ** lvl))
                            for lvl in range(n_levels)]
        self.tables = nn.Parameter(torch.empty(n_levels * table_size,
                                               features_per_level))
        with torch.no_grad():
            gen = torch.Generator().manual_seed(0x5CE9E)
            self.tables.uniform_(-1e-4, 1e-4, generator=gen)
        if table_size & (table_size - 1):
            raise ValueError("table_size must be a power of two")
        res = torch.tensor(self.resolutions, dtype=torch.long)
        self.register_buffer("_res_f", res.to(torch.get_default_dtype()).view(-1, 1, 1))
        self.register_buffer("_level_off",
                             (torch.arange(n_levels) * table_size).view(-1, 1, 1))

    @property
    def output_dim(self) -> int:
        return self.n_levels * self.features_per_level

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n = x.shape[0]
        u = (x + 1.0) * 0.5  # [0, 1]^3
        g = u.unsqueeze(0) * self._res_f.to(x.dtype)  # (L, N, 3)
        base = torch.clamp(torch.floor(g.detach()), min=0)
        base = torch.minimum(base, self._res_f.to(x.dtype) - 1)
        frac = g - base

        # int32 wraparound multiplication matches the uint32 prime hash
        b = base.to(torch.int32)
        p1 = np.int64(_PRIMES[1]).astype(np.int32)
        p2 = np.int64(_PRIMES[2]).astype(np.int32)
        hx = (b[..., 0], b[..., 0] + 1)
        hy = (b[..., 1] * int(p1), (b[..., 1] + 1) * int(p1))
        hz = (b[..., 2] * int(p2), (b[..., 2] + 1) * int(p2))
        idx = torch.empty(self.n_levels, n, 8, dtype=torch.int32,
                          device=x.device)
        k = 0
        for cx in (0, 1):
            for cy in (0, 1):
                hxy = torch.bitwise_xor(hx[cx], hy[cy])
                for cz in (0, 1):
                    idx[:, :, k] = torch.bitwise_xor(hxy, hz[cz])
                    k += 1
        mask = self.table_size - 1  # table_size is a power of two
        idx = (idx & mask) + self._level_off.view(-1, 1, 1).to(torch.int32)

        f = self.tables[idx.reshape(-1).long()].view(
            self.n_levels, n, 8, self.features_per_level).to(x.dtype)
        # corners are ordered z-fastest: lerp z, then y, then x
        fz = frac[..., 2].unsqueeze(-1).unsqueeze(-1)
        fy = frac[..., 1].unsqueeze(-1).unsqueeze(-1)
        fx = frac[..., 0].unsqueeze(-1)
        f = f[:, :, 0::2, :] * (1 - fz) + f[:, :, 1::2, :] * fz
        f = f[:, :, 0::2, :] * (1 - fy) + f[:, :, 1::2, :] * fy
        f = f[:, :, 0, :] * (1 - fx) + f[:, :, 1, :] * fx  # (L, N, F)
        return f.permute(1, 0, 2).reshape(n, self.output_dim)
