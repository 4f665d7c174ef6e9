"""
Tests for the SRS and SOR input-purification defenses.
"""
import numpy as np
import pytest

from ssbench.defenses import (
    DefenseConfig, DefenseKind, apply_defense, defend_sor, defend_srs, sor_keep_mask, sor_mean_distances,
)
from ssbench.errors import DefenseError
from ssbench.geometry import PointCloud
from tests.conftest import random_cloud

GRID = np.array([[x, y, z] for x in range(3) for y in range(3) for z in range(3)], dtype=float)


class TestDefenseConfig:
    """Tests for DefenseConfig."""

    def test_unknown_kind(self):
        """Test that unknown defenses are rejected."""
        with pytest.raises(DefenseError, match='Unknown defense'):
            DefenseConfig(kind='dup-net')

    def test_default_drop_is_half(self):
        """Test that SRS drops N // 2 points by default."""
        assert DefenseConfig(kind='srs').drop_count(33) == 16
        assert DefenseConfig(kind='srs', srs_drop=5).drop_count(33) == 5


class TestSrs:
    """Tests for Simple Random Sampling."""

    def test_zero_drop_is_identity(self, cloud):
        """Test that dropping nothing returns the cloud."""
        assert defend_srs(cloud, DefenseConfig(kind='srs', srs_drop=0)) is cloud

    def test_ordered_subset(self, cloud):
        """Test that survivors are input rows in their original order."""
        result = defend_srs(cloud, DefenseConfig(kind='srs', srs_drop=10), np.random.default_rng(1))
        assert result.num_points == cloud.num_points - 10
        rows = [int(np.flatnonzero((cloud.points == p).all(axis=1))[0]) for p in result.points]
        assert rows == sorted(rows)
        assert len(set(rows)) == len(rows)
        assert result.label == cloud.label and result.id == cloud.id

    def test_deterministic_for_seed(self, cloud):
        """Test that the same stream drops the same points."""
        cfg = DefenseConfig(kind='srs', srs_drop=8)
        first = defend_srs(cloud, cfg, np.random.default_rng(7))
        second = defend_srs(cloud, cfg, np.random.default_rng(7))
        assert np.array_equal(first.points, second.points)

    def test_drop_everything_rejected(self, cloud):
        """Test that dropping N points is an error."""
        with pytest.raises(DefenseError):
            defend_srs(cloud, DefenseConfig(kind='srs', srs_drop=cloud.num_points))


class TestSor:
    """Tests for Statistical Outlier Removal."""

    def test_regular_grid_untouched(self):
        """Test that a 3x3x3 grid with k=2 loses no point."""
        cloud = PointCloud(GRID)
        assert np.array_equal(defend_sor(cloud, DefenseConfig(kind='sor')).points, GRID)

    def test_single_outlier_removed(self):
        """Test that the grid plus one far point loses exactly that point."""
        cloud = PointCloud(np.vstack([GRID, [[10.0, 10.0, 10.0]]]))
        result = defend_sor(cloud, DefenseConfig(kind='sor'))
        assert result.num_points == 27
        assert np.array_equal(result.points, GRID)

    def test_matches_brute_force(self):
        """Test the keep mask against explicit distance sorting."""
        cloud = random_cloud(8, n=40)
        k, alpha = 3, 1.1
        d = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        mean_distance = np.sort(d, axis=1)[:, :k].mean(axis=1)
        expected = mean_distance <= mean_distance.mean() + alpha * mean_distance.std()
        assert np.allclose(sor_mean_distances(cloud.points, k), mean_distance)
        assert np.array_equal(sor_keep_mask(cloud, DefenseConfig(kind='sor', sor_k=k, sor_alpha=alpha)), expected)

    def test_matches_brute_force_on_many_clouds(self):
        """Test defend_sor on 20 random 64-point clouds against a per-point neighbour loop."""
        cfg = DefenseConfig(kind='sor')
        for seed in range(20):
            cloud = random_cloud(100 + seed, n=64)
            points = cloud.points
            mean_distance = np.empty(len(points))
            for p in range(len(points)):
                others = sorted(float(np.linalg.norm(points[p] - points[q]))
                                for q in range(len(points)) if q != p)
                mean_distance[p] = np.mean(others[:cfg.sor_k])
            mu, sigma = mean_distance.mean(), mean_distance.std()
            expected = np.array([m <= mu + cfg.sor_alpha * sigma for m in mean_distance])
            assert np.array_equal(sor_keep_mask(cloud, cfg), expected)
            assert np.array_equal(defend_sor(cloud, cfg).points, points[expected])

    def test_nearly_idempotent_on_clean_grid(self):
        """Test that a second pass over a cleaned cloud removes nothing more."""
        cloud = PointCloud(np.vstack([GRID, [[10.0, 10.0, 10.0]]]))
        cfg = DefenseConfig(kind='sor')
        once = defend_sor(cloud, cfg)
        assert defend_sor(once, cfg).num_points == once.num_points

    def test_too_few_points(self):
        """Test that N <= k is rejected."""
        with pytest.raises(DefenseError, match='N > k'):
            defend_sor(PointCloud([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), DefenseConfig(kind='sor'))


class TestApplyDefense:
    """Tests for apply_defense dispatch."""

    def test_none_returns_input(self, cloud):
        """Test that the none defense is the identity."""
        assert apply_defense(cloud, DefenseConfig()) is cloud

    def test_dispatch(self, cloud):
        """Test that SRS and SOR are routed by kind."""
        assert apply_defense(cloud, DefenseConfig(kind=DefenseKind.SRS), np.random.default_rng(0)).num_points == 16
        assert apply_defense(cloud, DefenseConfig(kind='sor')).num_points <= cloud.num_points
