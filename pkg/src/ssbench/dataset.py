"""
Synthetic shape dataset and ingestion of point-file directories.

The synthetic dataset stands in for a mesh benchmark at desk scale: each class
is a primitive surface, sampled uniformly, jittered and normalized to the unit
sphere.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DatasetError
from .geometry import PointCloud, normalize_unit_sphere
from .repositories.point_files import list_point_files, read_point_file, write_point_file

logger = logging.getLogger(__name__)

LABELS_FILE = 'labels.csv'
SPLITS_FILE = 'splits.json'


# --- Surface samplers: (rng, n) -> (n, 3) uniform surface points ---

def _sample_triangles(rng: np.random.Generator, n: int, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted uniform samples over a (T, 3, 3) triangle soup."""
    edges_a = triangles[:, 1] - triangles[:, 0]
    edges_b = triangles[:, 2] - triangles[:, 0]
    areas = 0.5 * np.linalg.norm(np.cross(edges_a, edges_b), axis=1)
    chosen = rng.choice(len(triangles), size=n, p=areas / areas.sum())
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    return triangles[chosen, 0] + u[:, None] * edges_a[chosen] + v[:, None] * edges_b[chosen]


def sample_sphere(rng, n):
    # antithetic pairs keep the sample centroid at the sphere center
    half = rng.normal(size=((n + 1) // 2, 3))
    half /= np.linalg.norm(half, axis=1, keepdims=True)
    return np.concatenate([half, -half])[:n]


def sample_cube(rng, n):
    face_axis = rng.integers(0, 3, size=n)
    face_sign = rng.choice(np.array([-1.0, 1.0]), size=n)
    points = rng.uniform(-1.0, 1.0, size=(n, 3))
    points[np.arange(n), face_axis] = face_sign
    return points


def sample_cylinder(rng, n):
    # radius 1, height 2: lateral area 4*pi, caps 2*pi in total
    on_side = rng.random(n) < 4.0 / 6.0
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radius = np.where(on_side, 1.0, np.sqrt(rng.random(n)))
    z = np.where(on_side, rng.uniform(-1.0, 1.0, size=n), rng.choice(np.array([-1.0, 1.0]), size=n))
    return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)


def sample_cone(rng, n):
    # apex (0, 0, 1), base radius 1 at z = -1: lateral pi*sqrt(5), base pi
    lateral = np.pi * np.sqrt(5.0)
    on_side = rng.random(n) < lateral / (lateral + np.pi)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    s = np.sqrt(rng.random(n))
    radius = s
    z = np.where(on_side, 1.0 - 2.0 * s, -1.0)
    return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=1)


def sample_torus(rng, n, major=1.0, minor=0.35):
    points = np.empty((0, 3))
    while len(points) < n:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
        phi = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)
        # rejection keeps the density proportional to the surface element
        keep = rng.random(2 * n) < (major + minor * np.cos(phi)) / (major + minor)
        ring = major + minor * np.cos(phi[keep])
        batch = np.stack([ring * np.cos(theta[keep]), ring * np.sin(theta[keep]), minor * np.sin(phi[keep])], axis=1)
        points = np.concatenate([points, batch])
    return points[:n]


def sample_plane(rng, n):
    return np.stack([rng.uniform(-1.0, 1.0, n), rng.uniform(-0.5, 0.5, n), np.zeros(n)], axis=1)


_PYRAMID = np.array([
    [[-1, -1, -1], [1, -1, -1], [0, 0, 1]],
    [[1, -1, -1], [1, 1, -1], [0, 0, 1]],
    [[1, 1, -1], [-1, 1, -1], [0, 0, 1]],
    [[-1, 1, -1], [-1, -1, -1], [0, 0, 1]],
    [[-1, -1, -1], [1, -1, -1], [1, 1, -1]],
    [[-1, -1, -1], [1, 1, -1], [-1, 1, -1]],
], dtype=np.float64)


def sample_pyramid(rng, n):
    return _sample_triangles(rng, n, _PYRAMID)


def sample_helix(rng, n, turns=2.0, tube=0.1):
    t = rng.uniform(0.0, 2.0 * np.pi * turns, size=n)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    center = np.stack([np.cos(t), np.sin(t), t / (np.pi * turns) - 1.0], axis=1)
    # tube cross-section in the plane spanned by the radial and vertical axes
    radial = np.stack([np.cos(t), np.sin(t), np.zeros(n)], axis=1)
    vertical = np.array([0.0, 0.0, 1.0])
    return center + tube * (np.cos(angle)[:, None] * radial + np.sin(angle)[:, None] * vertical)


SHAPE_SAMPLERS: Dict[str, Callable[[np.random.Generator, int], np.ndarray]] = {
    'sphere': sample_sphere,
    'cube': sample_cube,
    'cylinder': sample_cylinder,
    'cone': sample_cone,
    'torus': sample_torus,
    'plane': sample_plane,
    'pyramid': sample_pyramid,
    'helix': sample_helix,
}

SUPPORTED_SHAPES = tuple(SHAPE_SAMPLERS)


@dataclass(frozen=True)
class DatasetSpec:
    classes: Tuple[str, ...] = SUPPORTED_SHAPES
    samples_per_class: int = 100
    points_per_cloud: int = 256
    noise_sigma: float = 0.01
    split: Tuple[float, float] = (0.8, 0.2)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'classes', tuple(self.classes))
        if not self.classes:
            raise DatasetError("classes must be nonempty")
        unknown = [c for c in self.classes if c not in SHAPE_SAMPLERS]
        if unknown:
            raise DatasetError(
                f"Unknown shape(s) {', '.join(unknown)}; supported shapes: {', '.join(SUPPORTED_SHAPES)}")
        if self.samples_per_class < 1:
            raise DatasetError("samples_per_class must be at least 1")
        if self.points_per_cloud < 16:
            raise DatasetError("points_per_cloud must be at least 16")
        if self.noise_sigma < 0:
            raise DatasetError("noise_sigma must be nonnegative")
        train_fraction, test_fraction = self.split
        if min(train_fraction, test_fraction) < 0 or abs(train_fraction + test_fraction - 1.0) > 1e-9:
            raise DatasetError(f"split fractions must be nonnegative and sum to 1, got {self.split}")


@dataclass
class Dataset:
    """Labelled clouds with a disjoint train/test split."""
    train: List[PointCloud]
    test: List[PointCloud]
    classes: List[str] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def all(self) -> List[PointCloud]:
        return sorted(self.train + self.test, key=lambda c: c.id)

    def subset(self, split: str = 'test', limit: Optional[int] = None) -> List[PointCloud]:
        clouds = self.train if split == 'train' else self.test
        return list(clouds if limit is None else clouds[:limit])


def _split_indices(rng: np.random.Generator, count: int, train_fraction: float) -> Tuple[np.ndarray, np.ndarray]:
    order = rng.permutation(count)
    n_train = int(round(count * train_fraction))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def generate_synthetic(spec: DatasetSpec) -> Dataset:
    """Sample, jitter and normalize spec.samples_per_class clouds per class."""
    root = np.random.SeedSequence(spec.rng_seed)
    class_seeds = root.spawn(len(spec.classes))
    train, test = [], []
    for label, (shape, class_seed) in enumerate(zip(spec.classes, class_seeds)):
        split_seed, *sample_seeds = class_seed.spawn(spec.samples_per_class + 1)
        clouds = []
        for index, sample_seed in enumerate(sample_seeds):
            rng = np.random.default_rng(sample_seed)
            points = SHAPE_SAMPLERS[shape](rng, spec.points_per_cloud)
            if spec.noise_sigma > 0:
                points = points + rng.normal(scale=spec.noise_sigma, size=points.shape)
            cloud = PointCloud(points, label=label, id=f"{shape}-{index:04d}")
            clouds.append(normalize_unit_sphere(cloud))
        train_idx, test_idx = _split_indices(np.random.default_rng(split_seed), len(clouds), spec.split[0])
        train.extend(clouds[i] for i in train_idx)
        test.extend(clouds[i] for i in test_idx)
    logger.info(f"Generated {len(train)} train / {len(test)} test clouds over {len(spec.classes)} classes")
    return Dataset(train=train, test=test, classes=list(spec.classes))


def write_dataset(dataset: Dataset, directory, suffix: str = '.xyzl') -> Path:
    """Write clouds, labels.csv and splits.json so load_dataset restores the split."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for cloud in dataset.all():
        filename = f"{cloud.id}{suffix}"
        write_point_file(directory / filename, cloud, dataset.num_classes)
        rows.append((filename, cloud.label))
    with open(directory / LABELS_FILE, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['filename', 'label'])
        writer.writerows(rows)
    with open(directory / SPLITS_FILE, 'w') as f:
        json.dump({
            'classes': dataset.classes,
            'train': [f"{c.id}{suffix}" for c in dataset.train],
            'test': [f"{c.id}{suffix}" for c in dataset.test],
        }, f, indent=2)
    return directory


def _read_labels(path: Path) -> Dict[str, int]:
    if not path.exists():
        raise DatasetError(f"missing {LABELS_FILE} in {path.parent}")
    labels = {}
    with open(path, newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ['filename', 'label']:
            raise DatasetError(f"{path}:1: header must be 'filename,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'filename,label'")
            try:
                labels[row[0]] = int(row[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-integer label {row[1]!r}")
    return labels


def load_dataset(path, num_classes: Optional[int] = None, split: Sequence[float] = (0.8, 0.2),
                 rng_seed: int = 0) -> Dataset:
    """Load a directory of xyzl/pcb files labelled by labels.csv.

    Clouds are normalized on load. splits.json, when present, fixes the
    train/test assignment; otherwise a seeded split is drawn.
    """
    directory = Path(path)
    if not directory.is_dir():
        raise DatasetError(f"{directory} is not a directory")
    files = list_point_files(directory)
    if not files:
        raise DatasetError(f"no point files in {directory}")
    labels = _read_labels(directory / LABELS_FILE)

    splits = None
    classes: List[str] = []
    if (directory / SPLITS_FILE).exists():
        with open(directory / SPLITS_FILE) as f:
            splits = json.load(f)
        classes = list(splits.get('classes', []))

    clouds = {}
    declared = num_classes or (len(classes) if classes else None)
    for file in files:
        cloud, file_classes = read_point_file(file)
        if declared is None and file_classes:
            declared = file_classes
        if file.name not in labels:
            raise DatasetError(f"{file.name} has no entry in {LABELS_FILE}")
        clouds[file.name] = PointCloud(cloud.points, label=labels[file.name], id=file.stem)

    if declared is None:
        declared = max(labels[name] for name in clouds) + 1
    for name, cloud in clouds.items():
        if not 0 <= cloud.label < declared:
            raise DatasetError(f"{name}: label {cloud.label} out of range [0, {declared})")
    clouds = {name: normalize_unit_sphere(cloud) for name, cloud in clouds.items()}
    if not classes:
        classes = [f"class-{i}" for i in range(declared)]

    names = sorted(clouds)
    if splits is not None:
        train = [clouds[n] for n in splits.get('train', []) if n in clouds]
        test = [clouds[n] for n in splits.get('test', []) if n in clouds]
        assigned = set(splits.get('train', [])) | set(splits.get('test', []))
        train.extend(clouds[n] for n in names if n not in assigned)
    else:
        train_idx, test_idx = _split_indices(np.random.default_rng(rng_seed), len(names), split[0])
        train = [clouds[names[i]] for i in train_idx]
        test = [clouds[names[i]] for i in test_idx]
    logger.info(f"Loaded {len(names)} clouds from {directory}")
    return Dataset(train=train, test=test, classes=classes)
