"""
Parameter sweeps: p_a, p_s, iterations and budget rerun the matrix per value;
scale and shear measure classifier robustness to the deformations themselves.
"""

import logging
from typing import Mapping, Optional, Sequence

import torch.nn as nn

from ..attacks.config import AttackConfig
from ..defenses import DefenseConfig
from ..errors import EvaluationError
from ..geometry import PointCloud
from ..models.autoencoder import PointAutoencoder
from .matrix import MATRIX_SAMPLES, run_matrix
from .report import SWEEP_PARAMS, TransferReport
from .robustness import ROBUSTNESS_SAMPLES, accuracy_under_transform

logger = logging.getLogger(__name__)

ROBUSTNESS_PARAMS = ('scale', 'shear')
ALL_SWEEP_PARAMS = SWEEP_PARAMS + ROBUSTNESS_PARAMS


def sweep_attack_config(cfg: AttackConfig, param: str, value: float) -> AttackConfig:
    """The attack config of one sweep point."""
    if param in ('pa', 'ps') and not cfg.ss_enabled:
        raise EvaluationError(f"sweeping {param} needs an SS attack, got {cfg.name}")
    if param == 'pa':
        return cfg.with_overrides(p_a=float(value), p_s=0.5)
    if param == 'ps':
        return cfg.with_overrides(p_a=0.5, p_s=float(value))
    if param == 'iterations':
        if float(value) != int(value):
            raise EvaluationError(f"iterations must be whole numbers, got {value}")
        return cfg.with_overrides(iterations=int(value))
    if param == 'budget':
        return cfg.with_overrides(epsilon=float(value))
    raise EvaluationError(f"Unknown sweep parameter {param!r}; choose from {', '.join(ALL_SWEEP_PARAMS)}")


def run_sweep(param: str, values: Sequence, models: Mapping[str, nn.Module], attacks: Sequence[AttackConfig],
              clouds: Sequence[PointCloud], defenses: Sequence[DefenseConfig] = (), seeds: Sequence[int] = (0,),
              workers: int = 1, autoencoder: Optional[PointAutoencoder] = None,
              limit: Optional[int] = None, victims: Optional[Sequence[str]] = None) -> TransferReport:
    """One report holding every sweep point; entries carry `param` and `value`.

    For scale/shear, `values` are (low, high) ranges and the report's
    robustness rows are filled instead of matrix entries.
    """
    if not values:
        raise EvaluationError("sweep needs at least one value")
    report = TransferReport(seeds=list(seeds))

    if param in ROBUSTNESS_PARAMS:
        for name, model in models.items():
            rows = accuracy_under_transform(model, clouds, kind=param, ranges=list(values),
                                            limit=limit or ROBUSTNESS_SAMPLES, rng_seed=seeds[0], model_name=name)
            report.robustness.extend(row.to_dict() for row in rows)
        return report

    if param in ('pa', 'ps'):
        skipped = [cfg.name for cfg in attacks if not cfg.ss_enabled]
        if skipped:
            logger.warning(f"sweep {param}: skipping non-SS attacks {', '.join(skipped)}")
        attacks = [cfg for cfg in attacks if cfg.ss_enabled]
        if not attacks:
            raise EvaluationError(f"sweeping {param} needs at least one SS attack")

    for value in values:
        point_attacks = [sweep_attack_config(cfg, param, value) for cfg in attacks]
        logger.info(f"sweep {param}={value:g}: {', '.join(c.name for c in point_attacks)}")
        point = run_matrix(models, point_attacks, defenses, clouds, seeds=seeds, workers=workers,
                           autoencoder=autoencoder, limit=limit or MATRIX_SAMPLES, victims=victims)
        for entry in point.entries:
            entry.param = param
            entry.value = float(value)
        for error in point.errors:
            error[param] = float(value)
        point.seeds = []
        report.extend(point)
    return report
