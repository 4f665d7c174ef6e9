# Attack configs, losses and the optimization loop
from .config import AttackConfig, AttackKind, BUDGET_SWEEP, ITERATION_SWEEP, derive_seed, parse_attack_name
from .losses import (
    Loss, attack_loss, knn_distances, knn_outlier_weights, loss_3d_adv, loss_advpc, loss_aof, loss_knn,
    margin_loss,
)
from .runner import AttackResult, IterationRecord, run_attack, select_target

__all__ = [
    'AttackConfig', 'AttackKind', 'BUDGET_SWEEP', 'ITERATION_SWEEP', 'derive_seed', 'parse_attack_name',
    'Loss', 'attack_loss', 'knn_distances', 'knn_outlier_weights', 'loss_3d_adv', 'loss_advpc', 'loss_aof',
    'loss_knn', 'margin_loss',
    'AttackResult', 'IterationRecord', 'run_attack', 'select_target',
]
