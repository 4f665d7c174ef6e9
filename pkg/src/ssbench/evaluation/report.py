"""
Transfer reports and their CSV, JSON and SVG renderings.
"""

import csv
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import EvaluationError  # noqa: E402
from ..formats import REPORT_FORMAT  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('victim', 'transfer', 'attack', 'defense', 'metric', 'value', 'std', 'n')
ROBUSTNESS_COLUMNS = ('model', 'kind', 'low', 'high', 'accuracy', 'mean_loss', 'n')
SWEEP_PARAMS = ('pa', 'ps', 'iterations', 'budget')
SWEEP_LABELS = {
    'pa': 'p_a',
    'ps': 'p_s',
    'iterations': 'iterations',
    'budget': 'attack budget (l-inf)',
}


@dataclass
class ReportEntry:
    """One matrix cell, aggregated over seeds."""
    victim: str
    transfer: str
    attack: str
    defense: str
    trans: float
    trans_std: float = 0.0
    accuracy: float = 0.0
    accuracy_std: float = 0.0
    targeted_success: Optional[float] = None
    targeted_success_std: Optional[float] = None
    n_samples: int = 0
    n_seeds: int = 1
    param: Optional[str] = None
    value: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.trans <= 100.0:
            raise EvaluationError(f"T_rans must lie in [0, 100], got {self.trans}")

    @property
    def white_box(self) -> bool:
        return self.victim == self.transfer

    @property
    def attack_label(self) -> str:
        if self.param is None:
            return self.attack
        return f"{self.attack}@{self.param}={self.value:g}"

    def metrics(self) -> List[tuple]:
        rows = [('trans', self.trans, self.trans_std), ('accuracy', self.accuracy, self.accuracy_std)]
        if self.targeted_success is not None:
            rows.append(('targeted_success', self.targeted_success, self.targeted_success_std))
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReportEntry':
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@dataclass
class TransferReport:
    entries: List[ReportEntry] = field(default_factory=list)
    config_digest: str = ''
    seeds: List[int] = field(default_factory=list)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    robustness: List[Dict[str, Any]] = field(default_factory=list)

    def find(self, victim: str, transfer: str, attack: str, defense: str = 'none',
             value: Optional[float] = None) -> Optional[ReportEntry]:
        for entry in self.entries:
            if (entry.victim, entry.transfer, entry.attack, entry.defense) == (victim, transfer, attack, defense) \
                    and (value is None or entry.value == value):
                return entry
        return None

    def extend(self, other: 'TransferReport'):
        self.entries.extend(other.entries)
        self.errors.extend(other.errors)
        self.robustness.extend(other.robustness)
        for seed in other.seeds:
            if seed not in self.seeds:
                self.seeds.append(seed)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format': REPORT_FORMAT,
            'config_digest': self.config_digest,
            'seeds': list(self.seeds),
            'entries': [e.to_dict() for e in self.entries],
            'errors': list(self.errors),
            'robustness': list(self.robustness),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TransferReport':
        return cls(
            entries=[ReportEntry.from_dict(e) for e in data.get('entries', [])],
            config_digest=data.get('config_digest', ''),
            seeds=list(data.get('seeds', [])),
            errors=list(data.get('errors', [])),
            robustness=list(data.get('robustness', [])),
        )


def write_csv(report: TransferReport, path: Path) -> Path:
    """Long format: one row per (cell, metric)."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for entry in report.entries:
            for metric, value, std in entry.metrics():
                writer.writerow([entry.victim, entry.transfer, entry.attack_label, entry.defense,
                                 metric, repr(float(value)), repr(float(std or 0.0)), entry.n_samples])
    return path


def write_robustness_csv(report: TransferReport, path: Path) -> Path:
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=ROBUSTNESS_COLUMNS, extrasaction='ignore')
        writer.writeheader()
        for row in report.robustness:
            writer.writerow(row)
    return path


def _configure_svg():
    # Keep text as <text> so tick values stay searchable in the SVG.
    plt.rcParams['svg.fonttype'] = 'none'


def plot_sweep(report: TransferReport, param: str, path: Path) -> Path:
    """T_rans against the swept value, one line per (victim -> transfer, attack, defense)."""
    entries = [e for e in report.entries if e.param == param]
    if not entries:
        raise EvaluationError(f"report holds no {param} sweep")
    _configure_svg()
    values = sorted({e.value for e in entries})
    fig, ax = plt.subplots(figsize=(6, 4))
    series: Dict[tuple, List[ReportEntry]] = {}
    for entry in entries:
        series.setdefault((entry.victim, entry.transfer, entry.attack, entry.defense), []).append(entry)
    for (victim, transfer, attack, defense), members in sorted(series.items()):
        members.sort(key=lambda e: e.value)
        label = f"{attack} {victim}->{transfer}" + ('' if defense == 'none' else f" ({defense})")
        ax.plot([e.value for e in members], [e.trans for e in members], marker='o', label=label)
    ax.set_xticks(values)
    ax.set_xticklabels([f"{v:g}" for v in values], rotation=45)
    ax.set_xlabel(SWEEP_LABELS.get(param, param))
    ax.set_ylabel('T_rans (%)')
    ax.legend(fontsize='small')
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def plot_robustness(report: TransferReport, kind: str, path: Path) -> Path:
    """Accuracy per deformation intensity, one line per model."""
    rows = [r for r in report.robustness if r['kind'] == kind]
    if not rows:
        raise EvaluationError(f"report holds no {kind} robustness rows")
    _configure_svg()
    fig, ax = plt.subplots(figsize=(6, 4))
    by_model: Dict[str, List[dict]] = {}
    for row in rows:
        by_model.setdefault(row['model'], []).append(row)
    labels = []
    for model, members in sorted(by_model.items()):
        labels = ['none' if r['low'] is None else f"[{r['low']:g},{r['high']:g}]" for r in members]
        ax.plot(range(len(members)), [r['accuracy'] for r in members], marker='o', label=model)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45)
    ax.set_xlabel(f"{kind} range")
    ax.set_ylabel('accuracy (%)')
    ax.legend(fontsize='small')
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path


def emit_report(report: TransferReport, output_dir, formats: Sequence[str] = ('csv', 'json', 'svg'),
                name: str = 'report') -> List[Path]:
    """Write report.csv, report.json and one SVG per sweep present in the report."""
    from ..repositories.json_repository import ReportRepository

    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise EvaluationError(f"cannot write report to {output_dir}: {e}")
    written = []
    try:
        if 'csv' in formats:
            written.append(write_csv(report, output_dir / f"{name}.csv"))
            if report.robustness:
                written.append(write_robustness_csv(report, output_dir / f"{name}_robustness.csv"))
        if 'json' in formats:
            written.append(ReportRepository(output_dir).save(report, name))
        if 'svg' in formats:
            for param in SWEEP_PARAMS:
                if any(e.param == param for e in report.entries):
                    written.append(plot_sweep(report, param, output_dir / f"sweep_{param}.svg"))
            for kind in ('scale', 'shear'):
                if any(r['kind'] == kind for r in report.robustness):
                    written.append(plot_robustness(report, kind, output_dir / f"robustness_{kind}.svg"))
    except OSError as e:
        raise EvaluationError(f"cannot write report to {output_dir}: {e}")
    for path in written:
        logger.info(f"Wrote {path}")
    return written
