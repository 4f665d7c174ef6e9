"""
Input-purification defenses: Simple Random Sampling and Statistical Outlier Removal.

Both return an order-preserving subset of the input points.
"""

from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DefenseError
from .geometry import PointCloud


class DefenseKind(str, Enum):
    NONE = 'none'
    SRS = 'srs'
    SOR = 'sor'


@dataclass(frozen=True)
class DefenseConfig:
    kind: DefenseKind = DefenseKind.NONE
    srs_drop: Optional[int] = None      # None drops N // 2
    sor_k: int = 2
    sor_alpha: float = 1.1
    rng_seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', DefenseKind(self.kind))
        except ValueError:
            raise DefenseError(f"Unknown defense {self.kind!r}; choose from none, srs, sor")
        if self.srs_drop is not None and self.srs_drop < 0:
            raise DefenseError("srs_drop must be nonnegative")
        if self.sor_k < 1:
            raise DefenseError("sor_k must be at least 1")
        if self.sor_alpha <= 0:
            raise DefenseError("sor_alpha must be positive")

    @property
    def name(self) -> str:
        return self.kind.value

    def drop_count(self, num_points: int) -> int:
        return num_points // 2 if self.srs_drop is None else self.srs_drop

    def to_dict(self) -> dict:
        data = asdict(self)
        data['kind'] = self.kind.value
        return data


def defend_srs(cloud: PointCloud, cfg: DefenseConfig, rng: Optional[np.random.Generator] = None) -> PointCloud:
    """Drop srs_drop uniformly chosen points, keeping the survivors in order."""
    drop = cfg.drop_count(cloud.num_points)
    if drop >= cloud.num_points:
        raise DefenseError(f"srs_drop={drop} must be smaller than N={cloud.num_points}")
    if drop == 0:
        return cloud
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    keep = np.sort(rng.choice(cloud.num_points, size=cloud.num_points - drop, replace=False))
    return cloud.with_points(cloud.points[keep])


def sor_mean_distances(points: np.ndarray, k: int) -> np.ndarray:
    """Mean Euclidean distance of every point to its k nearest other points."""
    distances, _ = cKDTree(points).query(points, k=k + 1)
    return distances[:, 1:].mean(axis=1)


def sor_keep_mask(cloud: PointCloud, cfg: DefenseConfig) -> np.ndarray:
    if cloud.num_points <= cfg.sor_k:
        raise DefenseError(f"SOR needs N > k, got N={cloud.num_points}, k={cfg.sor_k}")
    mean_distance = sor_mean_distances(cloud.points, cfg.sor_k)
    threshold = mean_distance.mean() + cfg.sor_alpha * mean_distance.std()
    return mean_distance <= threshold


def defend_sor(cloud: PointCloud, cfg: DefenseConfig) -> PointCloud:
    """Remove points whose mean kNN distance exceeds mu + alpha * sigma."""
    keep = sor_keep_mask(cloud, cfg)
    if not keep.any():
        raise DefenseError("degenerate after SOR")
    return cloud.with_points(cloud.points[keep])


def apply_defense(cloud: PointCloud, cfg: DefenseConfig, rng: Optional[np.random.Generator] = None) -> PointCloud:
    if cfg.kind is DefenseKind.SRS:
        return defend_srs(cloud, cfg, rng)
    if cfg.kind is DefenseKind.SOR:
        return defend_sor(cloud, cfg)
    return cloud
