"""
Training loops for the classifiers and the autoencoder.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from ..dataset import Dataset
from ..errors import ModelError
from .autoencoder import PointAutoencoder, chamfer_distance
from .classifiers import evaluate_accuracy

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: nn.Module
    test_accuracy: float
    history: List[float] = field(default_factory=list)
    checkpoint_path: Optional[str] = None


def _stack(clouds) -> Tuple[torch.Tensor, torch.Tensor]:
    points = torch.as_tensor(np.stack([c.points for c in clouds]), dtype=torch.float32)
    labels = torch.as_tensor([c.label for c in clouds], dtype=torch.long)
    return points, labels


def _random_scale(points: torch.Tensor, scale_range, generator: torch.Generator) -> torch.Tensor:
    lo, hi = scale_range
    factors = torch.rand(points.shape[0], 1, 3, generator=generator, dtype=points.dtype) * (hi - lo) + lo
    return points * factors


def train(model: nn.Module, dataset: Dataset, epochs: int = 50, lr: float = 1e-3, batch_size: int = 32,
          rng_seed: int = 0, augment_scale: Optional[Tuple[float, float]] = (0.8, 1.25),
          checkpoint_repo=None, checkpoint_name: Optional[str] = None) -> TrainResult:
    """Train with Adam on cross-entropy, report clean test accuracy, optionally checkpoint."""
    if not dataset.train or not dataset.test:
        raise ModelError("dataset needs nonempty train and test splits")
    torch.manual_seed(rng_seed)
    generator = torch.Generator().manual_seed(rng_seed)
    points, labels = _stack(dataset.train)
    model.float()
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    history = []

    for epoch in tqdm(range(epochs), desc='train', leave=False, disable=None):
        model.train()
        order = torch.randperm(len(points), generator=generator)
        total = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start:start + batch_size]
            x = points[batch]
            if augment_scale is not None:
                x = _random_scale(x, augment_scale, generator)
            loss = F.cross_entropy(model(x), labels[batch])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss) * len(batch)
        history.append(total / len(points))
        logger.debug(f"epoch {epoch + 1}/{epochs}: loss {history[-1]:.4f}")

    model.eval()
    accuracy = evaluate_accuracy(model, dataset.test)
    logger.info(f"Trained {type(model).__name__} for {epochs} epochs: test accuracy {accuracy:.2f}%")

    checkpoint_path = None
    if checkpoint_repo is not None:
        path = checkpoint_repo.save(model, checkpoint_name or type(model).__name__,
                                    metadata={'test_accuracy': accuracy, 'epochs': epochs, 'rng_seed': rng_seed})
        checkpoint_path = str(path)
    return TrainResult(model=model, test_accuracy=accuracy, history=history, checkpoint_path=checkpoint_path)


def reconstruction_error(ae: PointAutoencoder, clouds) -> float:
    """Mean chamfer distance between clouds and their reconstructions."""
    ae.eval()
    points, _ = _stack(clouds)
    with torch.no_grad():
        return float(chamfer_distance(ae(points), points).mean())


def train_autoencoder(ae: PointAutoencoder, dataset: Dataset, epochs: int = 100, lr: float = 1e-3,
                      batch_size: int = 32, rng_seed: int = 0,
                      checkpoint_repo=None, checkpoint_name: Optional[str] = None) -> TrainResult:
    """Train on chamfer loss; the reported metric is mean test chamfer distance."""
    if not dataset.train or not dataset.test:
        raise ModelError("dataset needs nonempty train and test splits")
    torch.manual_seed(rng_seed)
    generator = torch.Generator().manual_seed(rng_seed)
    points, _ = _stack(dataset.train)
    ae.float()
    optimizer = torch.optim.Adam(ae.parameters(), lr=lr)
    history = []

    for _ in tqdm(range(epochs), desc='autoencoder', leave=False, disable=None):
        ae.train()
        order = torch.randperm(len(points), generator=generator)
        total = 0.0
        for start in range(0, len(order), batch_size):
            x = points[order[start:start + batch_size]]
            loss = chamfer_distance(ae(x), x).mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss) * len(x)
        history.append(total / len(points))

    error = reconstruction_error(ae, dataset.test)
    logger.info(f"Trained autoencoder for {epochs} epochs: test chamfer {error:.4f}")
    checkpoint_path = None
    if checkpoint_repo is not None:
        checkpoint_path = str(checkpoint_repo.save(ae, checkpoint_name or 'autoencoder',
                                                   metadata={'test_chamfer': error, 'epochs': epochs}))
    return TrainResult(model=ae, test_accuracy=error, history=history, checkpoint_path=checkpoint_path)
