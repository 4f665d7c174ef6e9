"""
The victim x transfer x attack x defense experiment matrix.

Adversarials are crafted once per (seed, victim, attack) and then scored
against every transfer model under every defense. Per-sample random streams
derive from (seed, sample id), so cells do not depend on sample order or on
the number of workers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch.nn as nn
from tqdm import tqdm

from ..attacks.config import AttackConfig, derive_seed
from ..attacks.runner import AttackResult, run_attack
from ..defenses import DefenseConfig, apply_defense
from ..errors import BenchmarkError, EvaluationError
from ..geometry import PointCloud
from ..models.autoencoder import PointAutoencoder
from .metrics import AdvSample, adversarial_accuracy, targeted_success_rate, trans_metric
from .report import ReportEntry, TransferReport

logger = logging.getLogger(__name__)

MATRIX_SAMPLES = 200


def craft_adversarials(victim: nn.Module, clouds: Sequence[PointCloud], cfg: AttackConfig,
                       autoencoder: Optional[PointAutoencoder] = None, workers: int = 1,
                       description: str = '') -> Tuple[List[AttackResult], List[Dict[str, str]]]:
    """Run one attack over many clouds; returns results in input order plus per-sample failures."""
    def attack_one(cloud):
        try:
            return run_attack(victim, cloud, cfg, ae=autoencoder), None
        except BenchmarkError as e:
            return None, {'sample': cloud.id, 'error': f"{type(e).__name__}: {e}"}

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        outcomes = list(tqdm(pool.map(attack_one, clouds), total=len(clouds), desc=description or cfg.name,
                             leave=False, disable=None))
    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    return results, failures


def defended_samples(results: Sequence[AttackResult], clean: Mapping[str, PointCloud],
                     defense: DefenseConfig, seed: int) -> List[AdvSample]:
    """Defend clean and adversarial clouds with the same per-sample stream."""
    samples = []
    for result in results:
        original = clean[result.adversarial.id]
        stream = derive_seed(seed, original.id, f"defense:{defense.name}")
        samples.append(AdvSample(
            clean=apply_defense(original, defense, np.random.default_rng(stream)),
            adversarial=apply_defense(result.adversarial, defense, np.random.default_rng(stream)),
            label=original.label,
            target_class=result.target_class,
        ))
    return samples


def _aggregate(values: List[float]) -> Tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std())


def run_matrix(models: Mapping[str, nn.Module], attacks: Sequence[AttackConfig], defenses: Sequence[DefenseConfig],
               clouds: Sequence[PointCloud], seeds: Sequence[int] = (0,), workers: int = 1,
               autoencoder: Optional[PointAutoencoder] = None, limit: int = MATRIX_SAMPLES,
               victims: Optional[Sequence[str]] = None) -> TransferReport:
    """T_rans (and accuracy / targeted success) for every cell, mean and std over seeds.

    Failures of single samples or cells are recorded in `report.errors`;
    the rest of the matrix still runs.
    """
    if len(models) < 2:
        raise EvaluationError("run_matrix needs at least two trained models")
    if not seeds:
        raise EvaluationError("run_matrix needs at least one seed")
    clouds = list(clouds)[:limit]
    if not clouds:
        raise EvaluationError("run_matrix needs at least one sample")
    by_id = {cloud.id: cloud for cloud in clouds}
    if len(by_id) != len(clouds):
        raise EvaluationError("sample ids must be unique")

    victim_names = list(victims) if victims is not None else list(models)
    defenses = list(defenses) or [DefenseConfig()]
    report = TransferReport(seeds=list(seeds))
    # (victim, transfer, attack, defense) -> metric -> per-seed values
    cells: Dict[tuple, Dict[str, List[float]]] = {}
    counts: Dict[tuple, int] = {}

    for seed in seeds:
        for victim_name in victim_names:
            victim = models[victim_name]
            for base_cfg in attacks:
                cfg = base_cfg.with_overrides(rng_seed=seed)
                logger.info(f"seed {seed}: crafting {cfg.name} on {victim_name} ({len(clouds)} samples)")
                results, failures = craft_adversarials(victim, clouds, cfg, autoencoder, workers,
                                                       f"{cfg.name}/{victim_name}/seed {seed}")
                for failure in failures:
                    report.errors.append({'seed': seed, 'victim': victim_name, 'attack': cfg.name, **failure})
                if not results:
                    continue
                for defense in defenses:
                    try:
                        samples = defended_samples(results, by_id, defense, seed)
                    except BenchmarkError as e:
                        report.errors.append({'seed': seed, 'victim': victim_name, 'attack': cfg.name,
                                              'defense': defense.name, 'error': f"{type(e).__name__}: {e}"})
                        continue
                    for transfer_name, transfer in models.items():
                        key = (victim_name, transfer_name, cfg.name, defense.name)
                        try:
                            metrics = {
                                'trans': trans_metric(samples, transfer),
                                'accuracy': adversarial_accuracy(samples, transfer),
                            }
                            if cfg.targeted:
                                metrics['targeted_success'] = targeted_success_rate(samples, transfer)
                        except BenchmarkError as e:
                            report.errors.append({'seed': seed, 'victim': victim_name, 'transfer': transfer_name,
                                                  'attack': cfg.name, 'defense': defense.name,
                                                  'error': f"{type(e).__name__}: {e}"})
                            continue
                        for metric, value in metrics.items():
                            cells.setdefault(key, {}).setdefault(metric, []).append(value)
                        counts[key] = len(samples)

    for key, metrics in cells.items():
        victim_name, transfer_name, attack, defense = key
        trans, trans_std = _aggregate(metrics['trans'])
        accuracy, accuracy_std = _aggregate(metrics['accuracy'])
        targeted, targeted_std = _aggregate(metrics['targeted_success']) if 'targeted_success' in metrics \
            else (None, None)
        report.entries.append(ReportEntry(
            victim=victim_name, transfer=transfer_name, attack=attack, defense=defense,
            trans=trans, trans_std=trans_std, accuracy=accuracy, accuracy_std=accuracy_std,
            targeted_success=targeted, targeted_success_std=targeted_std,
            n_samples=counts[key], n_seeds=len(metrics['trans']),
        ))
    if report.errors:
        logger.warning(f"{len(report.errors)} matrix failures recorded in the report")
    return report
