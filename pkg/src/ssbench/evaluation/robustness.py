"""
Classifier accuracy and loss under random scale or shear of increasing intensity.
"""

import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..attacks.config import derive_seed
from ..errors import EvaluationError
from ..geometry import PointCloud, TransformPolicy, apply_transform, sample_transform
from ..models.classifiers import batch_logits

logger = logging.getLogger(__name__)

ROBUSTNESS_SAMPLES = 500

# None is the undeformed baseline row
SCALE_SWEEP: Tuple[Optional[Tuple[float, float]], ...] = (
    None, (0.9, 1.1), (0.8, 1.25), (0.6, 1.428), (0.5, 1.5), (0.4, 2.5), (0.3, 3.33), (0.2, 5.0),
)
SHEAR_SWEEP: Tuple[Optional[Tuple[float, float]], ...] = (
    None, (0.0, 0.1), (0.05, 0.15), (0.1, 0.2), (0.2, 0.3), (0.25, 0.35), (0.3, 0.4), (0.35, 0.45),
    (0.4, 0.5), (0.45, 0.55),
)


@dataclass(frozen=True)
class RobustnessRow:
    model: str
    kind: str
    low: Optional[float]
    high: Optional[float]
    accuracy: float
    mean_loss: float
    n: int

    @property
    def label(self) -> str:
        if self.low is None:
            return 'none'
        return f"[{self.low:g},{self.high:g}]"

    def to_dict(self) -> dict:
        return asdict(self)


def _policy(kind: str, intensity: Tuple[float, float]) -> TransformPolicy:
    if kind == 'scale':
        return TransformPolicy(p_a=1.0, p_s=1.0, scale_range=intensity)
    if kind == 'shear':
        return TransformPolicy(p_a=1.0, p_s=0.0, shear_range=intensity)
    raise EvaluationError(f"Unknown deformation {kind!r}; choose scale or shear")


def accuracy_under_transform(model: nn.Module, clouds: Sequence[PointCloud], kind: str = 'scale',
                             ranges: Optional[Sequence] = None, limit: int = ROBUSTNESS_SAMPLES,
                             rng_seed: int = 0, model_name: str = 'model') -> List[RobustnessRow]:
    """One random transform per sample per intensity range; accuracy and mean cross-entropy per range."""
    if ranges is None:
        ranges = SCALE_SWEEP if kind == 'scale' else SHEAR_SWEEP
    clouds = list(clouds)[:limit]
    if not clouds:
        raise EvaluationError("accuracy_under_transform needs at least one cloud")
    labels = torch.as_tensor([c.label for c in clouds])
    rows = []
    for intensity in ranges:
        if intensity is None:
            deformed = clouds
        else:
            policy = _policy(kind, tuple(intensity))
            deformed = []
            for cloud in clouds:
                rng = np.random.default_rng(derive_seed(rng_seed, cloud.id, f"{kind}:{intensity}"))
                deformed.append(apply_transform(sample_transform(policy, rng), cloud))
        logits = torch.as_tensor(batch_logits(model, deformed))
        accuracy = float(100.0 * (logits.argmax(dim=1) == labels).double().mean())
        mean_loss = float(F.cross_entropy(logits, labels))
        low, high = (None, None) if intensity is None else (float(intensity[0]), float(intensity[1]))
        rows.append(RobustnessRow(model_name, kind, low, high, accuracy, mean_loss, len(clouds)))
        logger.info(f"{model_name} {kind} {rows[-1].label}: accuracy {accuracy:.2f}%, loss {mean_loss:.4f}")
    return rows
