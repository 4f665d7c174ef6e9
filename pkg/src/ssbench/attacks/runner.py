"""
CW-style optimization loop shared by every attack.

Adam updates a perturbation that starts at zero; after each step the
perturbation is clamped to the l-infinity budget. With SS enabled one fresh
transform is drawn per iteration. With binary_search_steps > 0 an outer loop
searches the constant c that weighs the adversarial term.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import torch
import torch.nn as nn

from ..errors import AttackConfigError, AttackDivergedError
from ..geometry import IDENTITY, PointCloud, sample_transform
from ..models.autoencoder import PointAutoencoder
from ..models.classifiers import as_model_input, parameter_dtype
from ..spectral import SpectralBasis, compute_basis
from .config import AttackConfig, AttackKind, derive_seed
from .losses import attack_loss

logger = logging.getLogger(__name__)

INITIAL_CONST = 10.0
CONST_RANGE = (0.1, 100.0)


@dataclass(frozen=True)
class IterationRecord:
    step: int
    iteration: int
    const: float
    loss: float
    success: bool
    distance: float
    transform: str = 'identity'


@dataclass(frozen=True, eq=False)
class AttackResult:
    adversarial: PointCloud
    perturbation: np.ndarray = field(repr=False)
    success: bool
    final_loss_terms: Dict[str, float]
    iterations_used: int
    linf_norm: float
    l2_norm: float
    attack: str = ''
    target_class: Optional[int] = None
    trace: List[IterationRecord] = field(default_factory=list, repr=False)

    @property
    def losses(self) -> List[float]:
        return [record.loss for record in self.trace]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.adversarial.id,
            'label': self.adversarial.label,
            'attack': self.attack,
            'success': self.success,
            'target_class': self.target_class,
            'iterations_used': self.iterations_used,
            'linf_norm': self.linf_norm,
            'l2_norm': self.l2_norm,
            'final_loss_terms': self.final_loss_terms,
        }


def select_target(y_gt: int, num_classes: int, rng: np.random.Generator) -> int:
    """Uniform draw over the non-ground-truth classes."""
    if num_classes < 2:
        raise AttackConfigError("targeted attacks need at least two classes")
    candidates = [c for c in range(num_classes) if c != y_gt]
    return int(candidates[rng.integers(len(candidates))])


def _num_classes(model: nn.Module) -> int:
    spec = getattr(model, 'spec', None)
    if spec is not None and hasattr(spec, 'num_classes'):
        return spec.num_classes
    raise AttackConfigError("model carries no ClassifierSpec; cannot pick a target class")


def _is_success(logits: torch.Tensor, y_gt: int, y_target: Optional[int]) -> bool:
    prediction = int(logits.argmax())
    if y_target is not None:
        return prediction == y_target
    return prediction != y_gt


def run_attack(model: nn.Module, cloud: PointCloud, cfg: AttackConfig, rng: Optional[np.random.Generator] = None,
               ae: Optional[PointAutoencoder] = None, basis: Optional[SpectralBasis] = None) -> AttackResult:
    """Craft X' = X + delta against `model`.

    `rng` drives the SS transform draws; by default it is derived from
    (cfg.rng_seed, cloud.id), so concurrent attacks on different samples never
    share a stream. Returns the successful iterate with the smallest squared
    l2 distance, or the final iterate when none succeeded.
    """
    if cloud.label is None:
        raise AttackConfigError(f"cloud {cloud.id} has no label")
    y_gt = cloud.label
    if rng is None:
        rng = np.random.default_rng(derive_seed(cfg.rng_seed, cloud.id, 'transform'))

    y_target = None
    if cfg.targeted:
        y_target = cfg.target_class
        if y_target is None:
            target_rng = np.random.default_rng(derive_seed(cfg.rng_seed, cloud.id, 'target'))
            y_target = select_target(y_gt, _num_classes(model), target_rng)
        if y_target == y_gt:
            raise AttackConfigError("target class equals ground truth")

    model.eval()
    dtype = parameter_dtype(model)
    x = torch.as_tensor(cloud.points, dtype=dtype)

    if cfg.attack is AttackKind.NONE:
        return _identity_result(model, cloud, cfg, y_gt, y_target)
    if cfg.attack is AttackKind.ADVPC and ae is None:
        raise AttackConfigError("advpc needs a trained autoencoder")
    if cfg.attack is AttackKind.AOF and basis is None:
        basis = compute_basis(cloud, cfg.k_graph)

    trace: List[IterationRecord] = []
    best_delta = None
    best_terms: Dict[str, float] = {}
    best_distance = float('inf')
    last_delta = None
    last_terms: Dict[str, float] = {}

    search_steps = max(1, cfg.binary_search_steps)
    const = INITIAL_CONST if cfg.binary_search_steps > 0 else 1.0
    lower, upper = CONST_RANGE

    for step in range(search_steps):
        delta = torch.zeros_like(x, requires_grad=True)
        optimizer = torch.optim.Adam([delta], lr=cfg.lr)
        step_success = False
        for iteration in range(cfg.iterations):
            transform = sample_transform(cfg.policy, rng) if cfg.ss_enabled else IDENTITY
            loss = attack_loss(cfg.attack, x + delta, x, model, cfg, y_gt, const=const, transform=transform,
                               y_target=y_target, ae=ae, basis=basis)
            value = float(loss.total)
            if not np.isfinite(value):
                raise AttackDivergedError(
                    f"non-finite loss at step {step}, iteration {iteration} of {cfg.name} on {cloud.id}",
                    trace=trace)
            # Gradient w.r.t. delta only; shared model parameters never accumulate .grad.
            (delta.grad,) = torch.autograd.grad(loss.total, [delta], allow_unused=True)
            if delta.grad is None:
                delta.grad = torch.zeros_like(delta)
            optimizer.step()
            with torch.no_grad():
                delta.clamp_(-cfg.epsilon, cfg.epsilon)
                adversarial = x + delta
                success = _is_success(model(as_model_input(model, adversarial))[0], y_gt, y_target)
                distance = float((delta ** 2).sum())
            trace.append(IterationRecord(step, iteration, const, value, success, distance, transform.kind.value))
            if success:
                step_success = True
                if distance < best_distance:
                    best_distance = distance
                    best_delta = delta.detach().clone()
                    best_terms = loss.terms
        last_delta = delta.detach().clone()
        last_terms = loss.terms

        if cfg.binary_search_steps > 0:
            if step_success:
                upper = min(upper, const)
            else:
                lower = max(lower, const)
            logger.debug(f"{cfg.name} {cloud.id}: step {step} success={step_success}, next c in [{lower}, {upper}]")
            const = (lower + upper) / 2.0

    chosen, terms = (best_delta, best_terms) if best_delta is not None else (last_delta, last_terms)
    perturbation = chosen.cpu().numpy().astype(np.float64)
    adversarial = cloud.with_points(cloud.points + perturbation)
    with torch.no_grad():
        final_logits = model(as_model_input(model, adversarial))[0]
    return AttackResult(
        adversarial=adversarial,
        perturbation=perturbation,
        success=_is_success(final_logits, y_gt, y_target),
        final_loss_terms=dict(terms),
        iterations_used=len(trace),
        linf_norm=float(np.abs(perturbation).max()),
        l2_norm=float(np.linalg.norm(perturbation)),
        attack=cfg.name,
        target_class=y_target,
        trace=trace,
    )


def _identity_result(model, cloud, cfg, y_gt, y_target) -> AttackResult:
    with torch.no_grad():
        logits = model(as_model_input(model, cloud))[0]
    return AttackResult(
        adversarial=cloud,
        perturbation=np.zeros_like(cloud.points),
        success=_is_success(logits, y_gt, y_target),
        final_loss_terms={},
        iterations_used=0,
        linf_norm=0.0,
        l2_norm=0.0,
        attack=cfg.name,
        target_class=y_target,
    )
