"""
Attack hyperparameters and their per-attack defaults.
"""

import hashlib
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional

from ..errors import AttackConfigError
from ..geometry import TransformPolicy


class AttackKind(str, Enum):
    NONE = 'none'
    ADV3D = '3d-adv'
    KNN = 'knn'
    ADVPC = 'advpc'
    AOF = 'aof'


BUDGET_SWEEP = (0.01, 0.04, 0.05, 0.08, 0.10, 0.15, 0.18)
ITERATION_SWEEP = (100, 200, 500, 1000, 1500, 2000, 2500)

# Optimizer schedule of each baseline: iterations, binary-search steps, lr, kappa.
BASELINE_DEFAULTS: Dict[AttackKind, Dict[str, Any]] = {
    AttackKind.NONE: {'iterations': 1, 'binary_search_steps': 0, 'lr': 0.0, 'kappa': 0.0},
    AttackKind.ADV3D: {'iterations': 500, 'binary_search_steps': 10, 'lr': 0.01, 'kappa': 0.0},
    AttackKind.KNN: {'iterations': 2500, 'binary_search_steps': 0, 'lr': 0.001, 'kappa': 15.0},
    AttackKind.ADVPC: {'iterations': 200, 'binary_search_steps': 2, 'lr': 0.01, 'kappa': 0.0},
    AttackKind.AOF: {'iterations': 200, 'binary_search_steps': 2, 'lr': 0.01, 'kappa': 0.0},
}

# (p_a, p_s) of the SS variants
SS_POLICY_DEFAULTS: Dict[AttackKind, tuple] = {
    AttackKind.ADV3D: (0.5, 0.5),
    AttackKind.KNN: (0.7, 0.7),
    AttackKind.ADVPC: (0.7, 0.7),
    AttackKind.AOF: (0.7, 0.7),
}


def parse_attack_name(name: str):
    """'ss-knn' -> (AttackKind.KNN, True)."""
    name = name.strip().lower()
    ss_enabled = name.startswith('ss-')
    base = name[3:] if ss_enabled else name
    try:
        kind = AttackKind(base)
    except ValueError:
        known = ', '.join(k.value for k in AttackKind)
        raise AttackConfigError(f"Unknown attack {name!r}; known attacks: {known} (prefix 'ss-' for SS variants)")
    if ss_enabled and kind is AttackKind.NONE:
        raise AttackConfigError("'none' has no SS variant")
    return kind, ss_enabled


@dataclass(frozen=True)
class AttackConfig:
    attack: AttackKind = AttackKind.ADV3D
    ss_enabled: bool = False
    policy: TransformPolicy = field(default_factory=TransformPolicy)
    kappa: float = 0.0
    gamma: float = 0.25
    epsilon: float = 0.18
    iterations: int = 500
    lr: float = 0.01
    binary_search_steps: int = 10
    knn_k: int = 5
    knn_threshold_alpha: float = 1.1
    k_lf: Optional[int] = None
    k_graph: int = 10
    targeted: bool = False
    target_class: Optional[int] = None
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'attack', AttackKind(self.attack))
        if not 0.0 <= self.gamma <= 1.0:
            raise AttackConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.epsilon <= 0:
            raise AttackConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.iterations < 1:
            raise AttackConfigError("iterations must be at least 1")
        if self.lr < 0:
            raise AttackConfigError("lr must be nonnegative")
        if self.binary_search_steps < 0:
            raise AttackConfigError("binary_search_steps must be nonnegative")
        if self.ss_enabled and self.binary_search_steps != 0:
            raise AttackConfigError("SS attacks run without binary search (binary_search_steps must be 0)")
        if self.knn_k < 1:
            raise AttackConfigError("knn_k must be positive")
        if self.k_lf is not None and self.k_lf < 1:
            raise AttackConfigError("k_lf must be positive")

    @property
    def name(self) -> str:
        return f"ss-{self.attack.value}" if self.ss_enabled else self.attack.value

    @classmethod
    def for_attack(cls, name: str, **overrides) -> 'AttackConfig':
        """Defaults of a named attack ("3d-adv", "ss-knn", ...), then overrides.

        p_a / p_s may be passed directly and are folded into the policy.
        """
        kind, ss_enabled = parse_attack_name(name)
        values: Dict[str, Any] = dict(BASELINE_DEFAULTS[kind])
        p_a, p_s = SS_POLICY_DEFAULTS[kind] if ss_enabled else (0.0, 0.5)
        if ss_enabled:
            values['binary_search_steps'] = 0
        if overrides.get('p_a') is not None:
            p_a = overrides['p_a']
        if overrides.get('p_s') is not None:
            p_s = overrides['p_s']
        policy = overrides.get('policy') or TransformPolicy(p_a=p_a, p_s=p_s,
                                                            rng_seed=overrides.get('rng_seed') or 0)
        values.update({k: v for k, v in overrides.items()
                       if v is not None and k not in ('p_a', 'p_s', 'policy')})
        return cls(attack=kind, ss_enabled=ss_enabled, policy=policy, **values)

    def with_overrides(self, **changes) -> 'AttackConfig':
        """Copy with some fields replaced; p_a / p_s update the policy."""
        policy_changes = {k: changes.pop(k) for k in ('p_a', 'p_s') if k in changes}
        if policy_changes:
            changes['policy'] = replace(self.policy, **policy_changes)
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['attack'] = self.attack.value
        data['name'] = self.name
        data['policy'] = self.policy.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackConfig':
        data = dict(data)
        data.pop('name', None)
        policy = data.pop('policy', None) or {}
        return cls(policy=TransformPolicy(**policy), **data)


def derive_seed(rng_seed: int, sample_id: Optional[str], stream: str = 'attack') -> int:
    """Stable 63-bit seed for one (run seed, sample, purpose) triple."""
    digest = hashlib.sha256(f"{rng_seed}:{sample_id}:{stream}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') >> 1
