"""
Pytest configuration and fixtures for ssbench tests.
"""
import shutil
import tempfile

import numpy as np
import pytest
import torch
import torch.nn as nn

from ssbench import create_runtime
from ssbench.dataset import SUPPORTED_SHAPES, DatasetSpec, generate_synthetic
from ssbench.geometry import PointCloud, normalize_unit_sphere
from ssbench.models.autoencoder import AutoencoderSpec, PointAutoencoder
from ssbench.models.classifiers import ClassifierSpec, build_classifier
from ssbench.repositories.factory import get_repository_factory

NUM_CLASSES = 4
NUM_POINTS = 32


@pytest.fixture
def temp_dir():
    """A temporary directory removed after the test."""
    path = tempfile.mkdtemp()
    yield path
    shutil.rmtree(path)


@pytest.fixture
def runtime(temp_dir):
    """Resolved run config writing into a temporary output directory."""
    return create_runtime({'output_dir': temp_dir, 'seed': 0}, environ={})


@pytest.fixture
def repo_factory(runtime):
    """The repository factory of the temporary output directory."""
    return get_repository_factory()


@pytest.fixture
def tiny_dataset():
    """Four classes, six clouds each, 32 points per cloud."""
    spec = DatasetSpec(classes=SUPPORTED_SHAPES[:NUM_CLASSES], samples_per_class=6,
                       points_per_cloud=NUM_POINTS, rng_seed=0)
    return generate_synthetic(spec)


def make_classifier(architecture='pointwise-maxpool', seed=0, num_classes=NUM_CLASSES):
    torch.manual_seed(seed)
    if architecture == 'edge-conv':
        spec = ClassifierSpec(architecture='edge-conv', widths=(8, 16), num_classes=num_classes, knn_k=4,
                              head=(16,), dropout=0.0)
    else:
        spec = ClassifierSpec(widths=(16, 32), num_classes=num_classes, head=(16,), dropout=0.0)
    return build_classifier(spec).double().eval()


@pytest.fixture
def pointwise_model():
    """Untrained float64 pointwise max-pool classifier."""
    return make_classifier('pointwise-maxpool')


@pytest.fixture
def edge_model():
    """Untrained float64 edge-conv classifier."""
    return make_classifier('edge-conv', seed=1)


@pytest.fixture
def autoencoder():
    """Untrained float64 autoencoder for 32-point clouds."""
    torch.manual_seed(2)
    spec = AutoencoderSpec(latent_dim=16, decoder_points=NUM_POINTS, encoder_widths=(16,), decoder_widths=(32,))
    return PointAutoencoder(spec).double().eval()


def random_cloud(seed=0, n=NUM_POINTS, label=0, cloud_id=None):
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.normal(size=(n, 3)), label=label, id=cloud_id or f"random-{seed}")
    return normalize_unit_sphere(cloud)


@pytest.fixture
def cloud():
    """A normalized random 32-point cloud labelled 0."""
    return random_cloud(seed=0)


class CentroidClassifier(nn.Module):
    """Differentiable toy classifier scoring the cloud centroid against fixed class centres."""

    def __init__(self, centres, temperature=1.0):
        super().__init__()
        centres = torch.as_tensor(np.asarray(centres, dtype=np.float64))
        self.centres = nn.Parameter(centres, requires_grad=False)
        self.temperature = temperature
        self.spec = ClassifierSpec(num_classes=len(centres))

    def forward(self, x):
        centroid = x.mean(dim=1)
        return -((centroid.unsqueeze(1) - self.centres.unsqueeze(0)) ** 2).sum(dim=-1) / self.temperature


CENTRES = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]


def centred_clouds(count=12, n=NUM_POINTS, spread=0.3, seed=0):
    """Clouds of every class placed around their class centre, labels cycling."""
    rng = np.random.default_rng(seed)
    clouds = []
    for i in range(count):
        label = i % len(CENTRES)
        points = np.asarray(CENTRES[label]) + spread * rng.normal(size=(n, 3))
        clouds.append(PointCloud(points, label=label, id=f"centred-{i:03d}"))
    return clouds


@pytest.fixture
def centroid_models():
    """Two centroid classifiers that label every centred cloud correctly."""
    return {'centroid-a': CentroidClassifier(CENTRES), 'centroid-b': CentroidClassifier(CENTRES, temperature=3.0)}
