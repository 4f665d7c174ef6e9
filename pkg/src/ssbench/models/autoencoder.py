"""
Point-cloud autoencoder and the chamfer distance it is trained with.

The reconstruction X'_encoder feeds the encoder branch of the AdvPC loss.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch
import torch.nn as nn

from ..errors import ModelError
from ..geometry import PointCloud


@dataclass(frozen=True)
class AutoencoderSpec:
    latent_dim: int = 128
    decoder_points: int = 256
    encoder_widths: Tuple[int, ...] = (64, 128)
    decoder_widths: Tuple[int, ...] = (256, 256)

    def __post_init__(self):
        object.__setattr__(self, 'encoder_widths', tuple(int(w) for w in self.encoder_widths))
        object.__setattr__(self, 'decoder_widths', tuple(int(w) for w in self.decoder_widths))
        if self.latent_dim < 1:
            raise ModelError("latent_dim must be at least 1")
        if self.decoder_points < 1:
            raise ModelError("decoder_points must be at least 1")

    def to_dict(self) -> dict:
        return {
            'latent_dim': self.latent_dim,
            'decoder_points': self.decoder_points,
            'encoder_widths': list(self.encoder_widths),
            'decoder_widths': list(self.decoder_widths),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'AutoencoderSpec':
        return cls(**data)


class PointAutoencoder(nn.Module):
    """Pointwise encoder with max-pool to a latent code, MLP decoder to N x 3."""

    def __init__(self, spec: AutoencoderSpec):
        super().__init__()
        self.spec = spec
        layers = []
        in_features = 3
        for width in spec.encoder_widths + (spec.latent_dim,):
            layers += [nn.Linear(in_features, width), nn.ReLU()]
            in_features = width
        self.encoder = nn.Sequential(*layers[:-1])
        layers = []
        for width in spec.decoder_widths:
            layers += [nn.Linear(in_features, width), nn.ReLU()]
            in_features = width
        layers.append(nn.Linear(in_features, 3 * spec.decoder_points))
        self.decoder = nn.Sequential(*layers)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x).max(dim=1).values

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.spec.decoder_points:
            raise ModelError(
                f"autoencoder expects N={self.spec.decoder_points} points, got {x.shape[1]}")
        return self.decoder(self.encode(x)).view(x.shape[0], self.spec.decoder_points, 3)


def autoencode(ae: PointAutoencoder, cloud):
    """Reconstruct a cloud; tensors stay on the autograd graph, PointClouds come back as PointClouds."""
    if isinstance(cloud, PointCloud):
        ae.eval()
        dtype = next(ae.parameters()).dtype
        with torch.no_grad():
            reconstruction = ae(torch.as_tensor(cloud.points, dtype=dtype).unsqueeze(0))[0]
        return cloud.with_points(reconstruction.double())
    single = cloud.dim() == 2
    x = cloud.unsqueeze(0) if single else cloud
    reconstruction = ae(x)
    return reconstruction[0] if single else reconstruction


def _as_tensor(cloud) -> torch.Tensor:
    if isinstance(cloud, PointCloud):
        return torch.as_tensor(cloud.points)
    if isinstance(cloud, torch.Tensor):
        return cloud
    return torch.as_tensor(np.asarray(cloud, dtype=np.float64))


def chamfer_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Batched symmetric chamfer: mean squared NN distance a->b plus b->a, shape (B,)."""
    squared = ((a.unsqueeze(2) - b.unsqueeze(1)) ** 2).sum(dim=-1)
    return squared.min(dim=2).values.mean(dim=1) + squared.min(dim=1).values.mean(dim=1)


def chamfer(a, b) -> float:
    """Chamfer distance between two clouds (any of PointCloud, array, tensor)."""
    ta, tb = _as_tensor(a), _as_tensor(b)
    if ta.shape[-2] == 0 or tb.shape[-2] == 0:
        raise ModelError("chamfer needs nonempty clouds")
    dtype = torch.promote_types(ta.dtype, tb.dtype)
    value = chamfer_distance(ta.to(dtype).reshape(1, -1, 3), tb.to(dtype).reshape(1, -1, 3))[0]
    return float(value)
