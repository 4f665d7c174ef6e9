"""
Objective functions of the four baseline attacks and their SS forms.

Every loss takes the current adversarial coordinates as an (N, 3) tensor and
returns a `Loss` whose `total` stays on the autograd graph. `transform` is
the SS draw for this evaluation; None means a fresh draw from `rng` (or from
the config's own persistent stream) when the config enables SS, otherwise
identity.
"""

import threading
from typing import Dict, NamedTuple, Optional

import numpy as np
import torch
import torch.nn as nn

from ..errors import AttackConfigError, ModelError
from ..geometry import IDENTITY, TransformParams, apply_transform, sample_transform
from ..models.autoencoder import PointAutoencoder, autoencode
from ..models.classifiers import Logits, as_model_input
from ..spectral import SpectralBasis, low_freq_project
from .config import AttackConfig, AttackKind, derive_seed


class Loss(NamedTuple):
    total: torch.Tensor
    terms: Dict[str, float]


def _best_other(z: torch.Tensor, excluded: int) -> torch.Tensor:
    mask = torch.zeros_like(z, dtype=torch.bool)
    mask[excluded] = True
    return z.masked_fill(mask, float('-inf')).max()


def margin_loss(logits, y_gt: int, kappa: float = 0.0, targeted: bool = False,
                y_target: Optional[int] = None):
    """CW hinge on the logit gap.

    untargeted: max(Z_gt - max_{y != gt} Z_y + kappa, 0)
    targeted:   max(max_{y != t} Z_y - Z_t + kappa, 0)

    Logits give a float; a tensor gives a differentiable scalar tensor.
    """
    if isinstance(logits, Logits):
        return float(margin_loss(torch.as_tensor(logits.values), y_gt, kappa, targeted, y_target))
    z = logits.reshape(-1)
    num_classes = z.shape[0]
    if num_classes < 2:
        raise ModelError("margin loss needs at least two classes")
    if not 0 <= y_gt < num_classes:
        raise AttackConfigError(f"class {y_gt} out of range for {num_classes} logits")
    if targeted:
        if y_target is None or not 0 <= y_target < num_classes:
            raise AttackConfigError(f"invalid target class {y_target}")
        if y_target == y_gt:
            raise AttackConfigError("target class equals ground truth")
        gap = _best_other(z, y_target) - z[y_target]
    else:
        gap = z[y_gt] - _best_other(z, y_gt)
    return torch.clamp(gap + kappa, min=0.0)


def knn_distances(points: torch.Tensor, k: int) -> torch.Tensor:
    """d_p: mean squared distance from each point to its k nearest other points."""
    num_points = points.shape[0]
    if num_points <= k:
        raise AttackConfigError(f"kNN loss needs N > k, got N={num_points}, k={k}")
    squared = ((points.unsqueeze(1) - points.unsqueeze(0)) ** 2).sum(dim=-1)
    eye = torch.eye(num_points, dtype=torch.bool, device=points.device)
    squared = squared.masked_fill(eye, float('inf'))
    nearest = squared.topk(k, dim=1, largest=False).values
    return nearest.mean(dim=1)


def knn_outlier_weights(d: torch.Tensor, alpha: float) -> torch.Tensor:
    """w_p = 1 where d_p > mean(d) + alpha * std(d), else 0."""
    d = d.detach()
    threshold = d.mean() + alpha * d.std(unbiased=False)
    return (d > threshold).to(d.dtype)


_default_streams: Dict[AttackConfig, np.random.Generator] = {}
_default_streams_lock = threading.Lock()


def default_transform_stream(cfg: AttackConfig) -> np.random.Generator:
    """The generator SS draws come from when no rng is passed; one per config, seeded once."""
    with _default_streams_lock:
        rng = _default_streams.get(cfg)
        if rng is None:
            rng = np.random.default_rng(derive_seed(cfg.rng_seed, cfg.name, f"policy:{cfg.policy.rng_seed}"))
            _default_streams[cfg] = rng
        return rng


def resolve_transform(cfg: AttackConfig, transform: Optional[TransformParams],
                      rng: Optional[np.random.Generator]) -> TransformParams:
    """Each call without an explicit transform is a fresh draw."""
    if transform is not None:
        return transform
    if not cfg.ss_enabled:
        return IDENTITY
    return sample_transform(cfg.policy, rng if rng is not None else default_transform_stream(cfg))


def _logits(model: nn.Module, points: torch.Tensor) -> torch.Tensor:
    if model.training:
        model.eval()
    return model(as_model_input(model, points))[0]


def _margin(model, points, y_gt, cfg: AttackConfig, y_target):
    return margin_loss(_logits(model, points), y_gt, cfg.kappa, cfg.targeted, y_target)


def loss_3d_adv(x_adv: torch.Tensor, x: torch.Tensor, model: nn.Module, cfg: AttackConfig, y_gt: int,
                const: float = 1.0, transform: Optional[TransformParams] = None,
                rng: Optional[np.random.Generator] = None, y_target: Optional[int] = None) -> Loss:
    """c * l_adv(T(X')) + ||X' - X||^2; the distance uses the untransformed X'."""
    transform = resolve_transform(cfg, transform, rng)
    margin = _margin(model, apply_transform(transform, x_adv), y_gt, cfg, y_target)
    distance = ((x_adv - x) ** 2).sum()
    total = const * margin + distance
    return Loss(total, {'adv': float(margin), 'distance': float(distance), 'const': const})


def loss_knn(x_adv: torch.Tensor, model: nn.Module, cfg: AttackConfig, y_gt: int,
             const: float = 1.0, transform: Optional[TransformParams] = None,
             rng: Optional[np.random.Generator] = None, y_target: Optional[int] = None) -> Loss:
    """l_adv(Y) + (1/N) sum_p w_p d_p with Y = T(X'); both terms see the transformed cloud."""
    transform = resolve_transform(cfg, transform, rng)
    y = apply_transform(transform, x_adv)
    margin = _margin(model, y, y_gt, cfg, y_target)
    d = knn_distances(y, cfg.knn_k)
    smooth = (knn_outlier_weights(d, cfg.knn_threshold_alpha) * d).sum() / y.shape[0]
    total = const * margin + smooth
    return Loss(total, {'adv': float(margin), 'smooth': float(smooth), 'const': const})


def loss_advpc(x_adv: torch.Tensor, model: nn.Module, ae: PointAutoencoder, cfg: AttackConfig, y_gt: int,
               const: float = 1.0, transform: Optional[TransformParams] = None,
               rng: Optional[np.random.Generator] = None, y_target: Optional[int] = None) -> Loss:
    """(1 - gamma) l_adv(T(X')) + gamma l_adv(AE(X')); only the direct branch is transformed."""
    if ae.spec.decoder_points != x_adv.shape[0]:
        raise ModelError(f"autoencoder reconstructs {ae.spec.decoder_points} points, cloud has {x_adv.shape[0]}")
    transform = resolve_transform(cfg, transform, rng)
    direct = _margin(model, apply_transform(transform, x_adv), y_gt, cfg, y_target)
    reconstruction = autoencode(ae, x_adv.to(next(ae.parameters()).dtype))
    encoded = _margin(model, reconstruction, y_gt, cfg, y_target)
    adv = (1.0 - cfg.gamma) * direct + cfg.gamma * encoded
    return Loss(const * adv, {'adv': float(adv), 'direct': float(direct), 'encoder': float(encoded),
                              'const': const})


def loss_aof(x_adv: torch.Tensor, model: nn.Module, basis: SpectralBasis, cfg: AttackConfig, y_gt: int,
             const: float = 1.0, transform: Optional[TransformParams] = None,
             rng: Optional[np.random.Generator] = None, y_target: Optional[int] = None) -> Loss:
    """(1 - gamma) l_adv(T(X')) + gamma l_adv(X'_lfc); the low-frequency branch is not transformed."""
    k_lf = cfg.k_lf or default_k_lf(x_adv.shape[0])
    transform = resolve_transform(cfg, transform, rng)
    direct = _margin(model, apply_transform(transform, x_adv), y_gt, cfg, y_target)
    lfc, _ = low_freq_project(x_adv, basis, k_lf)
    low = _margin(model, lfc, y_gt, cfg, y_target)
    adv = (1.0 - cfg.gamma) * direct + cfg.gamma * low
    return Loss(const * adv, {'adv': float(adv), 'direct': float(direct), 'low_freq': float(low),
                              'const': const})


def default_k_lf(num_points: int) -> int:
    return max(1, num_points // 10)


def attack_loss(kind: AttackKind, x_adv: torch.Tensor, x: torch.Tensor, model: nn.Module, cfg: AttackConfig,
                y_gt: int, const: float = 1.0, transform: Optional[TransformParams] = None,
                rng: Optional[np.random.Generator] = None, y_target: Optional[int] = None,
                ae: Optional[PointAutoencoder] = None, basis: Optional[SpectralBasis] = None) -> Loss:
    """Dispatch to the loss of one attack kind."""
    common = dict(const=const, transform=transform, rng=rng, y_target=y_target)
    if kind is AttackKind.ADV3D:
        return loss_3d_adv(x_adv, x, model, cfg, y_gt, **common)
    if kind is AttackKind.KNN:
        return loss_knn(x_adv, model, cfg, y_gt, **common)
    if kind is AttackKind.ADVPC:
        if ae is None:
            raise AttackConfigError("advpc needs a trained autoencoder")
        return loss_advpc(x_adv, model, ae, cfg, y_gt, **common)
    if kind is AttackKind.AOF:
        if basis is None:
            raise AttackConfigError("aof needs a spectral basis")
        return loss_aof(x_adv, model, basis, cfg, y_gt, **common)
    raise AttackConfigError(f"attack {kind.value!r} has no loss")
