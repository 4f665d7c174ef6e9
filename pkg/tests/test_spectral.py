"""
Tests for the kNN graph, Laplacian and low-frequency projection.
"""
import numpy as np
import pytest
import torch

from ssbench.errors import SpectralError
from ssbench.geometry import PointCloud
from ssbench.spectral import build_knn_graph, compute_basis, graph_laplacian, low_freq_project
from tests.conftest import random_cloud


class TestBuildKnnGraph:
    """Tests for build_knn_graph."""

    def test_collinear_symmetrization(self):
        """Test k=1 on x=0,1,3: edges 0-1 and 1-2, sigma^2 = 2."""
        cloud = PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        adjacency = build_knn_graph(cloud, k=1)
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 0] = np.exp(-0.5)
        expected[1, 2] = expected[2, 1] = np.exp(-2.0)
        assert np.allclose(adjacency, expected)

    def test_matches_brute_force(self):
        """Test weights against an explicit neighbour search."""
        cloud = random_cloud(3, n=20)
        k = 4
        points = cloud.points
        d2 = ((points[:, None] - points[None]) ** 2).sum(-1)
        np.fill_diagonal(d2, np.inf)
        neighbours = np.argsort(d2, axis=1)[:, :k]
        sigma2 = np.mean([d2[i, j] for i in range(20) for j in neighbours[i]])
        expected = np.zeros((20, 20))
        for i in range(20):
            for j in neighbours[i]:
                expected[i, j] = expected[j, i] = np.exp(-d2[i, j] / sigma2)
        assert np.allclose(build_knn_graph(cloud, k), expected)

    def test_symmetric_nonnegative_zero_diagonal(self, cloud):
        """Test the structural invariants of the adjacency."""
        adjacency = build_knn_graph(cloud, 5)
        assert np.array_equal(adjacency, adjacency.T)
        assert np.all(adjacency >= 0)
        assert np.all(np.diag(adjacency) == 0)

    @pytest.mark.parametrize('k', [0, 32])
    def test_k_out_of_range(self, cloud, k):
        """Test that k must lie in [1, N)."""
        with pytest.raises(SpectralError):
            build_knn_graph(cloud, k)


class TestGraphLaplacian:
    """Tests for graph_laplacian."""

    def test_two_nodes(self):
        """Test L = [[w, -w], [-w, w]]."""
        laplacian = graph_laplacian(np.array([[0.0, 0.3], [0.3, 0.0]]))
        assert np.allclose(laplacian, [[0.3, -0.3], [-0.3, 0.3]])

    def test_constant_vector_in_kernel(self, cloud):
        """Test that L applied to the ones vector vanishes."""
        laplacian = graph_laplacian(build_knn_graph(cloud, 5))
        assert np.allclose(laplacian @ np.ones(cloud.num_points), 0.0, atol=1e-12)

    def test_rejects_asymmetric(self):
        """Test that asymmetric adjacency is rejected."""
        with pytest.raises(SpectralError, match='symmetric'):
            graph_laplacian(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestComputeBasis:
    """Tests for compute_basis."""

    def test_orthonormal_and_ascending(self, cloud):
        """Test U^T U = I and ascending eigenvalues starting at zero."""
        basis = compute_basis(cloud, 5)
        u = basis.eigenvectors
        assert np.allclose(u.T @ u, np.eye(cloud.num_points), atol=1e-10)
        assert np.all(np.diff(basis.eigenvalues) >= -1e-12)
        assert abs(basis.eigenvalues[0]) < 1e-10
        assert basis.source_cloud_id == cloud.id

    def test_matches_dense_eigensolver(self):
        """Test eigenpairs against numpy's dense symmetric solver on several clouds."""
        for seed in range(5):
            cloud = random_cloud(seed, n=48)
            laplacian = graph_laplacian(build_knn_graph(cloud, 6))
            basis = compute_basis(cloud, 6)
            assert np.allclose(basis.eigenvalues, np.linalg.eigvalsh(laplacian), atol=1e-8)
            assert np.all(np.diff(basis.eigenvalues) >= -1e-12)
            assert np.all(basis.eigenvalues >= -1e-10)
            u = basis.eigenvectors
            rayleigh = np.einsum('ij,ik,kj->j', u, laplacian, u)
            assert np.allclose(rayleigh, basis.eigenvalues, atol=1e-8)
            assert np.allclose(laplacian @ u, u * basis.eigenvalues, atol=1e-8)

    def test_low_pass_range(self, cloud):
        """Test that K must lie in [1, N]."""
        basis = compute_basis(cloud, 5)
        with pytest.raises(SpectralError):
            basis.low_pass(0)
        with pytest.raises(SpectralError):
            basis.low_pass(cloud.num_points + 1)


class TestLowFreqProject:
    """Tests for low_freq_project."""

    def test_full_rank_is_identity(self, cloud):
        """Test that K=N reproduces the cloud with zero high-frequency part."""
        basis = compute_basis(cloud, 5)
        lfc, hfc = low_freq_project(cloud, basis, cloud.num_points)
        assert np.allclose(lfc.points, cloud.points, atol=1e-10)
        assert np.allclose(hfc.points, 0.0, atol=1e-10)

    def test_decomposition_sums_to_cloud(self, cloud):
        """Test X_lfc + X_hfc = X."""
        lfc, hfc = low_freq_project(cloud, compute_basis(cloud, 5), 4)
        assert np.allclose(lfc.points + hfc.points, cloud.points, atol=1e-12)

    def test_idempotent(self, cloud):
        """Test that projecting the low-frequency part again changes nothing."""
        basis = compute_basis(cloud, 5)
        lfc, _ = low_freq_project(cloud, basis, 6)
        again, hfc = low_freq_project(lfc, basis, 6)
        assert np.allclose(again.points, lfc.points, atol=1e-10)
        assert np.allclose(hfc.points, 0.0, atol=1e-10)

    def test_constant_cloud_is_low_frequency(self, cloud):
        """Test that a constant signal survives K=1 unchanged."""
        basis = compute_basis(cloud, 10)
        constant = np.tile([0.2, -0.4, 0.7], (cloud.num_points, 1))
        lfc, _ = low_freq_project(constant, basis, 1)
        assert np.allclose(lfc, constant, atol=1e-10)

    def test_commutes_with_scaling(self, cloud):
        """Test that a fixed basis projects sX to s times the projection of X."""
        basis = compute_basis(cloud, 5)
        lfc, _ = low_freq_project(cloud.points, basis, 5)
        scaled, _ = low_freq_project(2.5 * cloud.points, basis, 5)
        assert np.allclose(scaled, 2.5 * lfc, atol=1e-12)

    def test_tensor_path_keeps_gradient(self, cloud):
        """Test that tensors stay differentiable and match the numpy result."""
        basis = compute_basis(cloud, 5)
        x = torch.as_tensor(cloud.points).clone().requires_grad_(True)
        lfc, _ = low_freq_project(x, basis, 3)
        lfc.sum().backward()
        assert x.grad is not None
        assert np.allclose(lfc.detach().numpy(), low_freq_project(cloud.points, basis, 3)[0])

    def test_size_mismatch(self, cloud):
        """Test that the basis size must match the cloud."""
        basis = compute_basis(cloud, 5)
        with pytest.raises(SpectralError, match='basis built for N=32'):
            low_freq_project(random_cloud(1, n=24), basis, 3)
