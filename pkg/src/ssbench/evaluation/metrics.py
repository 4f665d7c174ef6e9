"""
Transferability and targeted-success metrics.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import torch.nn as nn

from ..errors import EvaluationError
from ..geometry import PointCloud
from ..models.classifiers import predict


@dataclass(frozen=True, eq=False)
class AdvSample:
    """One (clean, adversarial, ground truth) triple crafted on a victim."""
    clean: PointCloud
    adversarial: PointCloud
    label: int
    target_class: Optional[int] = None

    @property
    def id(self) -> Optional[str]:
        return self.clean.id


def transfer_counts(clean_predictions: np.ndarray, adv_predictions: np.ndarray,
                    labels: np.ndarray) -> Tuple[int, int]:
    """(|S^tm|, |S_v2t|): clean samples the model gets right, and those among them whose adversarial it gets wrong."""
    correct = clean_predictions == labels
    flipped = correct & (adv_predictions != labels)
    return int(correct.sum()), int(flipped.sum())


def trans_metric(samples: Sequence[AdvSample], transfer_model: nn.Module) -> float:
    """T_rans = |S_v2t| / |S^tm| * 100."""
    if not samples:
        raise EvaluationError("trans_metric needs at least one sample")
    labels = np.array([s.label for s in samples])
    clean = predict(transfer_model, [s.clean for s in samples])
    adversarial = predict(transfer_model, [s.adversarial for s in samples])
    correct, flipped = transfer_counts(clean, adversarial, labels)
    if correct == 0:
        raise EvaluationError("transfer model classifies no clean sample correctly")
    return 100.0 * flipped / correct


def targeted_success_rate(samples: Sequence[AdvSample], transfer_model: nn.Module,
                          targets: Optional[Sequence[int]] = None) -> float:
    """Percentage of adversarials the transfer model assigns to their target class."""
    if not samples:
        return 0.0
    if targets is None:
        targets = [s.target_class for s in samples]
    if any(t is None for t in targets):
        raise EvaluationError("targeted success needs a target class for every sample")
    predictions = predict(transfer_model, [s.adversarial for s in samples])
    return float(100.0 * np.mean(predictions == np.asarray(targets)))


def adversarial_accuracy(samples: Sequence[AdvSample], model: nn.Module) -> float:
    """Percentage of adversarials still classified as their ground truth."""
    if not samples:
        return 0.0
    labels = np.array([s.label for s in samples])
    predictions = predict(model, [s.adversarial for s in samples])
    return float(100.0 * np.mean(predictions == labels))
