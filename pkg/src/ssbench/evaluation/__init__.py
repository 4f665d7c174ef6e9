# Metrics, the experiment matrix, sweeps and report emission
from .matrix import MATRIX_SAMPLES, craft_adversarials, defended_samples, run_matrix
from .metrics import AdvSample, adversarial_accuracy, targeted_success_rate, trans_metric, transfer_counts
from .report import ReportEntry, TransferReport, emit_report
from .robustness import SCALE_SWEEP, SHEAR_SWEEP, RobustnessRow, accuracy_under_transform
from .sweeps import ALL_SWEEP_PARAMS, run_sweep, sweep_attack_config

__all__ = [
    'MATRIX_SAMPLES', 'craft_adversarials', 'defended_samples', 'run_matrix',
    'AdvSample', 'adversarial_accuracy', 'targeted_success_rate', 'trans_metric', 'transfer_counts',
    'ReportEntry', 'TransferReport', 'emit_report',
    'SCALE_SWEEP', 'SHEAR_SWEEP', 'RobustnessRow', 'accuracy_under_transform',
    'ALL_SWEEP_PARAMS', 'run_sweep', 'sweep_attack_config',
]
