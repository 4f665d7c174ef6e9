"""
Desk-scale point-cloud classifiers.

Two architectures give one victim and one structurally different transfer
target: a pointwise MLP with max-pooling (PointNet-like) and a dynamic-graph
edge convolution network (DGCNN-like). Both consume (B, N, 3) tensors and are
invariant to point order.
"""

from dataclasses import dataclass, field
from typing import Callable, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from ..errors import ModelError
from ..geometry import PointCloud

ARCHITECTURES = ('pointwise-maxpool', 'edge-conv')


@dataclass(frozen=True)
class ClassifierSpec:
    architecture: str = 'pointwise-maxpool'
    widths: Tuple[int, ...] = (64, 128, 256)
    num_classes: int = 8
    knn_k: int = 10
    head: Tuple[int, ...] = (128,)
    dropout: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, 'widths', tuple(int(w) for w in self.widths))
        object.__setattr__(self, 'head', tuple(int(w) for w in self.head))
        if self.architecture not in ARCHITECTURES:
            raise ModelError(f"Unknown architecture {self.architecture!r}; choose from {', '.join(ARCHITECTURES)}")
        if self.num_classes < 2:
            raise ModelError("num_classes must be at least 2")
        if not self.widths:
            raise ModelError("widths must be nonempty")
        if self.knn_k < 1:
            raise ModelError("knn_k must be positive")

    def to_dict(self) -> dict:
        return {
            'architecture': self.architecture,
            'widths': list(self.widths),
            'num_classes': self.num_classes,
            'knn_k': self.knn_k,
            'head': list(self.head),
            'dropout': self.dropout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ClassifierSpec':
        return cls(**data)


@dataclass(frozen=True)
class Logits:
    """Pre-softmax scores Z of one cloud."""
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ModelError("logits must be a finite vector")
        object.__setattr__(self, 'values', values)

    @property
    def prediction(self) -> int:
        return int(np.argmax(self.values))

    def __len__(self):
        return len(self.values)


def _classifier_head(in_features: int, spec: ClassifierSpec) -> nn.Sequential:
    layers = []
    for width in spec.head:
        layers += [nn.Linear(in_features, width), nn.ReLU(), nn.Dropout(spec.dropout)]
        in_features = width
    layers.append(nn.Linear(in_features, spec.num_classes))
    return nn.Sequential(*layers)


class PointwiseMaxPoolNet(nn.Module):
    """Shared per-point MLP, global max-pool, MLP head."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        layers = []
        in_features = 3
        for width in spec.widths:
            layers += [nn.Linear(in_features, width), nn.ReLU()]
            in_features = width
        self.point_mlp = nn.Sequential(*layers)
        self.head = _classifier_head(in_features, spec)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        features = self.point_mlp(x)              # (B, N, C)
        pooled = features.max(dim=1).values       # (B, C)
        return self.head(pooled)


def knn_indices(x: torch.Tensor, k: int) -> torch.Tensor:
    """Indices of the k nearest rows of each row (self included), (B, N, k)."""
    distances = torch.cdist(x, x)
    return distances.topk(k, dim=-1, largest=False).indices


def edge_features(x: torch.Tensor, k: int) -> torch.Tensor:
    """Edge features [x_i, x_j - x_i] over the feature-space kNN graph, (B, N, k, 2C)."""
    batch, num_points, channels = x.shape
    idx = knn_indices(x.detach(), k)
    offsets = torch.arange(batch, device=x.device).view(-1, 1, 1) * num_points
    neighbours = x.reshape(batch * num_points, channels)[(idx + offsets).reshape(-1)]
    neighbours = neighbours.view(batch, num_points, k, channels)
    centre = x.unsqueeze(2).expand(batch, num_points, k, channels)
    return torch.cat([centre, neighbours - centre], dim=-1)


class EdgeConvNet(nn.Module):
    """Dynamic-graph edge convolutions with max and mean pooled readout."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__()
        self.spec = spec
        self.edge_mlps = nn.ModuleList()
        in_features = 3
        for width in spec.widths:
            self.edge_mlps.append(nn.Sequential(nn.Linear(2 * in_features, width), nn.LeakyReLU(0.2)))
            in_features = width
        total = sum(spec.widths)
        self.head = _classifier_head(2 * total, spec)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] < self.spec.knn_k:
            raise ModelError(f"edge-conv needs at least knn_k={self.spec.knn_k} points, got {x.shape[1]}")
        outputs = []
        for mlp in self.edge_mlps:
            x = mlp(edge_features(x, self.spec.knn_k)).max(dim=2).values
            outputs.append(x)
        features = torch.cat(outputs, dim=-1)
        pooled = torch.cat([features.max(dim=1).values, features.mean(dim=1)], dim=-1)
        return self.head(pooled)


def build_classifier(spec: ClassifierSpec) -> nn.Module:
    if spec.architecture == 'edge-conv':
        return EdgeConvNet(spec)
    return PointwiseMaxPoolNet(spec)


def parameter_dtype(model: nn.Module) -> torch.dtype:
    for parameter in model.parameters():
        return parameter.dtype
    return torch.float32


def as_model_input(model: nn.Module, cloud: Union[PointCloud, np.ndarray, torch.Tensor]) -> torch.Tensor:
    """Batch a single cloud as a (1, N, 3) tensor of the model's dtype."""
    if isinstance(cloud, PointCloud):
        tensor = torch.as_tensor(cloud.points)
    elif isinstance(cloud, torch.Tensor):
        tensor = cloud
    else:
        tensor = torch.as_tensor(np.asarray(cloud, dtype=np.float64))
    if tensor.dim() == 2:
        tensor = tensor.unsqueeze(0)
    if tensor.dim() != 3 or tensor.shape[-1] != 3:
        raise ModelError(f"expected (N, 3) or (B, N, 3) input, got {tuple(tensor.shape)}")
    if not torch.isfinite(tensor).all():
        raise ModelError("non-finite input")
    return tensor.to(parameter_dtype(model))


def forward(model: nn.Module, cloud) -> Logits:
    """Evaluation-mode logits of one cloud."""
    model.eval()
    with torch.no_grad():
        values = model(as_model_input(model, cloud))[0]
    return Logits(values.cpu().numpy())


def input_gradient(model: nn.Module, loss: Callable[[torch.Tensor], torch.Tensor], cloud) -> np.ndarray:
    """Gradient of loss(logits) with respect to every coordinate, N x 3.

    At exact ties inside a max (margin loss, max-pool) autograd routes the
    gradient to one argmax, which is a valid subgradient.
    """
    model.eval()
    x = as_model_input(model, cloud).detach().clone().requires_grad_(True)
    value = loss(model(x)[0])
    if not value.requires_grad:
        return np.zeros(tuple(x.shape[1:]))
    (grad,) = torch.autograd.grad(value, x, allow_unused=True)
    if grad is None:
        return np.zeros(tuple(x.shape[1:]))
    return grad[0].detach().cpu().numpy().astype(np.float64)


def batch_logits(model: nn.Module, clouds, batch_size: int = 64) -> np.ndarray:
    """Logits of many clouds, (len(clouds), C); clouds of different sizes are batched separately."""
    model.eval()
    by_size = {}
    for index, cloud in enumerate(clouds):
        points = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
        by_size.setdefault(points.shape[0], []).append((index, points))
    dtype = parameter_dtype(model)
    rows = {}
    with torch.no_grad():
        for members in by_size.values():
            for start in range(0, len(members), batch_size):
                chunk = members[start:start + batch_size]
                batch = torch.as_tensor(np.stack([p for _, p in chunk]), dtype=dtype)
                values = model(batch).cpu().numpy().astype(np.float64)
                for (index, _), row in zip(chunk, values):
                    rows[index] = row
    return np.stack([rows[i] for i in range(len(clouds))])


def predict(model: nn.Module, clouds, batch_size: int = 64) -> np.ndarray:
    """Argmax predictions of many clouds."""
    if not len(clouds):
        return np.empty(0, dtype=np.int64)
    return batch_logits(model, clouds, batch_size).argmax(axis=1)


def evaluate_accuracy(model: nn.Module, clouds, batch_size: int = 64) -> float:
    """Percentage of clouds whose prediction matches their label."""
    if not clouds:
        raise ModelError("cannot evaluate accuracy on an empty split")
    labels = np.array([c.label for c in clouds])
    return float(100.0 * np.mean(predict(model, clouds, batch_size) == labels))
