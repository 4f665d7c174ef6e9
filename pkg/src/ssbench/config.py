"""
Flat run configuration shared by every CLI command.

Precedence, lowest first: field defaults, the JSON config file (either a flat
document or a run manifest, whose `config` object is used), the SSBENCH_SEED
environment variable, explicit command-line flags.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from . import __version__
from .dataset import SUPPORTED_SHAPES
from .errors import ConfigError, FormatError
from .formats import check_format, check_producer_version

logger = logging.getLogger(__name__)

SEED_ENV_VAR = 'SSBENCH_SEED'


@dataclass
class RunConfig:
    # global
    seed: int = 0
    output_dir: str = 'runs'
    workers: int = 1
    log_level: str = 'INFO'
    # dataset
    data_dir: Optional[str] = None
    classes: int = len(SUPPORTED_SHAPES)
    per_class: int = 100
    points: int = 256
    noise: float = 0.01
    train_fraction: float = 0.8
    # classifier / autoencoder training
    architecture: str = 'pointwise-maxpool'
    widths: List[int] = field(default_factory=lambda: [64, 128, 256])
    edge_k: int = 10
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 32
    augment: bool = True
    model_name: Optional[str] = None
    autoencoder_latent: int = 128
    autoencoder_epochs: int = 100
    # attack
    attack: str = '3d-adv'
    victim: Optional[str] = None
    autoencoder: Optional[str] = None
    pa: Optional[float] = None
    ps: Optional[float] = None
    epsilon: Optional[float] = None
    iterations: Optional[int] = None
    attack_lr: Optional[float] = None
    binary_search_steps: Optional[int] = None
    kappa: Optional[float] = None
    gamma: Optional[float] = None
    knn_k: int = 5
    knn_alpha: float = 1.1
    k_lf: Optional[int] = None
    targeted: bool = False
    target_class: Optional[int] = None
    split: str = 'test'
    limit: int = 200
    # defense
    defense: str = 'none'
    srs_drop: Optional[int] = None
    sor_k: int = 2
    sor_alpha: float = 1.1
    # evaluation, sweeps and reports
    models: List[str] = field(default_factory=list)
    attacks: List[str] = field(default_factory=lambda: ['knn', 'ss-knn'])
    defenses: List[str] = field(default_factory=lambda: ['none'])
    seeds: Optional[List[int]] = None
    param: Optional[str] = None
    values: Optional[str] = None
    report: Optional[str] = None
    formats: List[str] = field(default_factory=lambda: ['csv', 'json', 'svg'])

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.limit < 1:
            raise ConfigError("limit must be at least 1")
        if self.split not in ('train', 'test'):
            raise ConfigError(f"split must be train or test, got {self.split!r}")

    @property
    def run_seeds(self) -> List[int]:
        return list(self.seeds) if self.seeds else [self.seed]

    @property
    def dataset_dir(self) -> Path:
        return Path(self.data_dir) if self.data_dir else Path(self.output_dir) / 'data'

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> 'RunConfig':
        """Build from a flat mapping; kebab-case keys are accepted, unknown keys are not."""
        data = {str(k).replace('-', '_'): v for k, v in mapping.items()}
        unknown = sorted(set(data) - set(cls.field_names()))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid config: {e}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def merged(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        data = self.to_dict()
        data.update({k.replace('-', '_'): v for k, v in overrides.items() if v is not None})
        return RunConfig.from_mapping(data)


def load_config_file(path) -> Dict[str, Any]:
    """Read a flat JSON config, or the `config` object of a run manifest."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON ({e.msg})")
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if 'format' in document and 'config' in document:
        try:
            check_format(document['format'], 'manifest')
        except FormatError as e:
            raise ConfigError(f"{path}: {e}")
        check_producer_version(document.get('ssbench_version', ''), __version__)
        logger.info(f"Re-running from manifest {path} (command {document.get('command')})")
        return dict(document['config'])
    return document


def resolve_config(file_path=None, overrides: Optional[Mapping[str, Any]] = None,
                   environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    environ = os.environ if environ is None else environ
    config = RunConfig.from_mapping(load_config_file(file_path)) if file_path else RunConfig()
    seed_text = environ.get(SEED_ENV_VAR)
    if seed_text:
        try:
            config = config.merged({'seed': int(seed_text)})
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {seed_text!r}")
    if overrides:
        config = config.merged(overrides)
    return config


def config_digest(config: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON form."""
    canonical = json.dumps(config, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def parse_values(text: str) -> List[float]:
    """'0.1:1.0:0.1' (inclusive range) or '0.01,0.04,0.05' (list)."""
    text = text.strip()
    try:
        if ':' in text:
            parts = [float(p) for p in text.split(':')]
            if len(parts) != 3:
                raise ConfigError(f"range must be start:stop:step, got {text!r}")
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ConfigError(f"empty range {text!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(count)]
        values = [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse values {text!r}")
    if not values:
        raise ConfigError("no values given")
    return values


def parse_ranges(text: str) -> List[Optional[Tuple[float, float]]]:
    """'none,0.9/1.1,0.5/1.5' -> [None, (0.9, 1.1), (0.5, 1.5)]."""
    ranges = []
    for item in text.split(','):
        item = item.strip()
        if not item:
            continue
        if item == 'none':
            ranges.append(None)
            continue
        try:
            low, high = (float(v) for v in item.split('/'))
        except ValueError:
            raise ConfigError(f"range must look like low/high, got {item!r}")
        ranges.append((low, high))
    if not ranges:
        raise ConfigError("no ranges given")
    return ranges
