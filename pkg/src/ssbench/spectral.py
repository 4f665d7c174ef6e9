"""
Graph-Laplacian spectral decomposition of a point cloud.

The basis is built once from the clean cloud and reused for every iterate,
which keeps the low-frequency projector a fixed linear map.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import torch
from scipy.spatial import cKDTree

from .errors import SpectralError
from .geometry import PointCloud

DEFAULT_GRAPH_K = 10


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    k_graph: int = DEFAULT_GRAPH_K
    source_cloud_id: Optional[str] = None

    @property
    def num_points(self) -> int:
        return self.eigenvectors.shape[0]

    def low_pass(self, K: int) -> np.ndarray:
        """The N x K matrix of the K lowest-frequency eigenvectors."""
        if not 1 <= K <= self.num_points:
            raise SpectralError(f"K must lie in [1, {self.num_points}], got {K}")
        return self.eigenvectors[:, :K]


def build_knn_graph(cloud: PointCloud, k: int = DEFAULT_GRAPH_K) -> np.ndarray:
    """Symmetrized kNN adjacency with Gaussian weights exp(-d^2 / sigma^2).

    sigma^2 is the mean squared distance over all (point, kNN) pairs.
    """
    points = cloud.points
    n = points.shape[0]
    if not 1 <= k < n:
        raise SpectralError(f"k must satisfy 1 <= k < N={n}, got {k}")
    _, idx = cKDTree(points).query(points, k=k + 1)
    neighbours = idx[:, 1:]
    rows = np.repeat(np.arange(n), k)
    cols = neighbours.reshape(-1)
    squared = np.sum((points[rows] - points[cols]) ** 2, axis=1)
    sigma2 = squared.mean()
    if sigma2 <= 0.0:
        raise SpectralError("all neighbour distances are zero")

    mask = np.zeros((n, n), dtype=bool)
    mask[rows, cols] = True
    mask |= mask.T
    i, j = np.nonzero(mask)
    adjacency = np.zeros((n, n))
    adjacency[i, j] = np.exp(-np.sum((points[i] - points[j]) ** 2, axis=1) / sigma2)
    np.fill_diagonal(adjacency, 0.0)
    return adjacency


def graph_laplacian(adjacency: np.ndarray) -> np.ndarray:
    """Combinatorial Laplacian L = D - A."""
    adjacency = np.asarray(adjacency, dtype=np.float64)
    if adjacency.ndim != 2 or adjacency.shape[0] != adjacency.shape[1]:
        raise SpectralError("adjacency must be square")
    if not np.array_equal(adjacency, adjacency.T):
        raise SpectralError("adjacency must be symmetric")
    if np.any(adjacency < 0):
        raise SpectralError("adjacency must be nonnegative")
    return np.diag(adjacency.sum(axis=1)) - adjacency


def compute_basis(cloud: PointCloud, k_graph: int = DEFAULT_GRAPH_K) -> SpectralBasis:
    """Eigendecomposition of the cloud's kNN-graph Laplacian, eigenvalues ascending."""
    laplacian = graph_laplacian(build_knn_graph(cloud, k_graph))
    eigenvalues, eigenvectors = scipy.linalg.eigh(laplacian)
    return SpectralBasis(eigenvalues=eigenvalues, eigenvectors=eigenvectors,
                         k_graph=k_graph, source_cloud_id=cloud.id)


def low_freq_project(cloud, basis: SpectralBasis, K: int) -> Tuple:
    """Split a cloud into low- and high-frequency parts: X_lfc = U_K U_K^T X, X_hfc = X - X_lfc.

    PointClouds come back as PointClouds; (N, 3) or (B, N, 3) tensors stay
    differentiable.
    """
    u = basis.low_pass(K)
    if isinstance(cloud, PointCloud):
        if cloud.num_points != basis.num_points:
            raise SpectralError(f"basis built for N={basis.num_points}, cloud has N={cloud.num_points}")
        lfc = u @ (u.T @ cloud.points)
        return cloud.with_points(lfc), cloud.with_points(cloud.points - lfc)
    if isinstance(cloud, torch.Tensor):
        if cloud.shape[-2] != basis.num_points:
            raise SpectralError(f"basis built for N={basis.num_points}, cloud has N={cloud.shape[-2]}")
        ut = torch.as_tensor(u, dtype=cloud.dtype, device=cloud.device)
        lfc = ut @ (ut.transpose(0, 1) @ cloud)
        return lfc, cloud - lfc
    points = np.asarray(cloud, dtype=np.float64)
    if points.shape[-2] != basis.num_points:
        raise SpectralError(f"basis built for N={basis.num_points}, cloud has N={points.shape[-2]}")
    lfc = u @ (u.T @ points)
    return lfc, points - lfc
