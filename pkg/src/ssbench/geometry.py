"""
Point-cloud container, normalization and the scale/shear transform operator.

Clouds use the row-vector convention: a transform with matrix M maps the
N x 3 coordinate array X to X @ M. The same kernel handles numpy arrays and
(batched) torch tensors so attacks can differentiate straight through it.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
import torch

from .errors import InvalidCloudError, TransformError

DEFAULT_SCALE_RANGE = (0.5, 1.5)
DEFAULT_SHEAR_RANGE = (0.0, 0.15)

ArrayLike = Union[np.ndarray, torch.Tensor]


@dataclass(frozen=True, eq=False)
class PointCloud:
    """N x 3 cloud with optional class label and sample id."""
    points: np.ndarray
    label: Optional[int] = None
    id: Optional[str] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise InvalidCloudError(f"points must have shape (N, 3), got {points.shape}")
        if points.shape[0] < 1:
            raise InvalidCloudError("point cloud is empty")
        if not np.all(np.isfinite(points)):
            raise InvalidCloudError("non-finite coordinates")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)
        if self.label is not None:
            object.__setattr__(self, 'label', int(self.label))

    @property
    def num_points(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: ArrayLike) -> 'PointCloud':
        """Same label and id, new coordinates."""
        if isinstance(points, torch.Tensor):
            points = points.detach().cpu().numpy()
        return PointCloud(points, label=self.label, id=self.id)

    def to_tensor(self, dtype=torch.float32, device=None) -> torch.Tensor:
        return torch.as_tensor(self.points, dtype=dtype, device=device)


class TransformKind(str, Enum):
    IDENTITY = 'identity'
    SCALE = 'scale'
    SHEAR = 'shear'


@dataclass(frozen=True)
class TransformParams:
    """One sampled draw of the SS operator."""
    kind: TransformKind = TransformKind.IDENTITY
    scale: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    shear: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, 'kind', TransformKind(self.kind))
        object.__setattr__(self, 'scale', tuple(float(v) for v in self.scale))
        object.__setattr__(self, 'shear', tuple(float(v) for v in self.shear))
        if len(self.scale) != 3 or len(self.shear) != 4:
            raise TransformError("scale needs 3 factors and shear needs 4 coefficients")
        if self.kind is TransformKind.IDENTITY and (
                self.scale != (1.0, 1.0, 1.0) or self.shear != (0.0, 0.0, 0.0, 0.0)):
            raise TransformError("identity transform must carry unit scale and zero shear")

    @property
    def matrix(self) -> np.ndarray:
        if self.kind is TransformKind.SCALE:
            return scale_matrix(*self.scale)
        if self.kind is TransformKind.SHEAR:
            return shear_matrix(*self.shear)
        return np.eye(3)

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'scale': list(self.scale), 'shear': list(self.shear)}


IDENTITY = TransformParams()


@dataclass(frozen=True)
class TransformPolicy:
    """Probability schedule of the SS operator."""
    p_a: float = 0.5
    p_s: float = 0.5
    scale_range: Tuple[float, float] = DEFAULT_SCALE_RANGE
    shear_range: Tuple[float, float] = DEFAULT_SHEAR_RANGE
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_a <= 1.0:
            raise TransformError(f"p_a must lie in [0, 1], got {self.p_a}")
        if not 0.0 <= self.p_s <= 1.0:
            raise TransformError(f"p_s must lie in [0, 1], got {self.p_s}")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi and math.isfinite(hi)):
            raise TransformError(f"invalid scale range {self.scale_range}")
        lo, hi = self.shear_range
        if not (0.0 <= lo <= hi and math.isfinite(hi)):
            raise TransformError(f"invalid shear range {self.shear_range}")
        object.__setattr__(self, 'scale_range', tuple(float(v) for v in self.scale_range))
        object.__setattr__(self, 'shear_range', tuple(float(v) for v in self.shear_range))

    def to_dict(self) -> dict:
        return {
            'p_a': self.p_a,
            'p_s': self.p_s,
            'scale_range': list(self.scale_range),
            'shear_range': list(self.shear_range),
            'rng_seed': self.rng_seed,
        }


def scale_matrix(a: float, b: float, c: float) -> np.ndarray:
    factors = np.array([a, b, c], dtype=np.float64)
    if not np.all(np.isfinite(factors)):
        raise TransformError("non-finite scale factor")
    if np.any(factors == 0.0):
        raise TransformError("singular scale")
    return np.diag(factors)


def shear_matrix(d: float, e: float, f: float, g: float) -> np.ndarray:
    coefficients = np.array([d, e, f, g], dtype=np.float64)
    if not np.all(np.isfinite(coefficients)):
        raise TransformError("non-finite shear coefficient")
    return np.array([
        [1.0, 0.0, d],
        [e, 1.0, f],
        [g, 0.0, 1.0],
    ], dtype=np.float64)


def transform_points(points: ArrayLike, matrix: np.ndarray) -> ArrayLike:
    """Right-multiply (..., N, 3) coordinates by a 3 x 3 matrix."""
    if isinstance(points, torch.Tensor):
        m = torch.as_tensor(matrix, dtype=points.dtype, device=points.device)
        return points @ m
    return np.asarray(points, dtype=np.float64) @ matrix


def normalize_unit_sphere(cloud: PointCloud) -> PointCloud:
    """Center at the centroid and scale so the farthest point has norm 1."""
    centered = cloud.points - cloud.points.mean(axis=0)
    extent = np.linalg.norm(centered, axis=1).max()
    if extent == 0.0 or not np.isfinite(extent):
        raise InvalidCloudError("zero extent")
    return cloud.with_points(centered / extent)


def scale_transform(cloud: PointCloud, a: float, b: float, c: float) -> PointCloud:
    return cloud.with_points(transform_points(cloud.points, scale_matrix(a, b, c)))


def shear_transform(cloud: PointCloud, d: float, e: float, f: float, g: float) -> PointCloud:
    return cloud.with_points(transform_points(cloud.points, shear_matrix(d, e, f, g)))


def sample_transform(policy: TransformPolicy, rng: np.random.Generator) -> TransformParams:
    """Draw one transform: scale w.p. p_a*p_s, shear w.p. p_a*(1-p_s), else identity."""
    # One uniform decides whether to transform at all, so p_a = 0 never
    # touches the scale/shear draws.
    if rng.random() >= policy.p_a:
        return IDENTITY
    if rng.random() < policy.p_s:
        lo, hi = policy.scale_range
        return TransformParams(kind=TransformKind.SCALE, scale=tuple(rng.uniform(lo, hi, size=3)))
    lo, hi = policy.shear_range
    magnitudes = rng.uniform(lo, hi, size=4)
    signs = rng.choice(np.array([-1.0, 1.0]), size=4)
    return TransformParams(kind=TransformKind.SHEAR, shear=tuple(magnitudes * signs))


def apply_transform(params: TransformParams, cloud):
    """Apply a sampled transform to a PointCloud, numpy array or torch tensor.

    Identity returns its input untouched; tensors keep their autograd graph,
    so input gradients come back multiplied by the transposed matrix.
    """
    if params.kind is TransformKind.IDENTITY:
        return cloud
    if isinstance(cloud, PointCloud):
        if params.kind is TransformKind.SCALE:
            return scale_transform(cloud, *params.scale)
        return shear_transform(cloud, *params.shear)
    return transform_points(cloud, params.matrix)

