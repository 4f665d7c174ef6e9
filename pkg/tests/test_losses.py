"""
Tests for the margin loss and the four attack objectives.
"""
import numpy as np
import pytest
import torch

from ssbench.attacks import AttackConfig, AttackKind
from ssbench.attacks.losses import (
    attack_loss, default_k_lf, knn_distances, knn_outlier_weights, loss_3d_adv, loss_advpc, loss_aof, loss_knn,
    default_transform_stream, margin_loss, resolve_transform,
)
from ssbench.errors import AttackConfigError, ModelError
from ssbench.geometry import IDENTITY, TransformParams, TransformPolicy, apply_transform
from ssbench.models import Logits, autoencode
from ssbench.spectral import compute_basis
from tests.conftest import random_cloud

CUBE = [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]


def as_tensor(cloud):
    return torch.as_tensor(cloud.points, dtype=torch.float64)


class TestMarginLoss:
    """Tests for margin_loss."""

    def test_untargeted_gap(self):
        """Test Z=(5,1,0), y=0 gives 4."""
        assert margin_loss(Logits(np.array([5.0, 1.0, 0.0])), 0) == pytest.approx(4.0)

    def test_already_misclassified(self):
        """Test Z=(5,1,0), y=1 clamps to 0."""
        assert margin_loss(Logits(np.array([5.0, 1.0, 0.0])), 1) == 0.0

    def test_targeted_with_kappa(self):
        """Test Z=(5,1,0), target 2, kappa 1 gives 6."""
        logits = Logits(np.array([5.0, 1.0, 0.0]))
        assert margin_loss(logits, 0, kappa=1.0, targeted=True, y_target=2) == pytest.approx(6.0)

    def test_kappa_keeps_pushing(self):
        """Test that kappa keeps the loss positive past the decision boundary."""
        assert margin_loss(Logits(np.array([1.0, 2.0])), 0, kappa=3.0) == pytest.approx(2.0)

    def test_tensor_is_differentiable(self):
        """Test that the gradient flows to the two competing logits."""
        z = torch.tensor([5.0, 1.0, 0.0], requires_grad=True)
        margin_loss(z, 0).backward()
        assert z.grad.tolist() == [1.0, -1.0, 0.0]

    def test_single_class(self):
        """Test that one logit is rejected."""
        with pytest.raises(ModelError, match='at least two classes'):
            margin_loss(torch.tensor([1.0]), 0)

    def test_target_equals_ground_truth(self):
        """Test that y_target == y_gt is rejected."""
        with pytest.raises(AttackConfigError):
            margin_loss(torch.tensor([1.0, 0.0]), 0, targeted=True, y_target=0)


class TestKnnTerm:
    """Tests for the kNN distance and outlier weighting."""

    def test_cube_corners_have_no_outliers(self):
        """Test that equal kNN distances give zero weights."""
        d = knn_distances(torch.tensor(CUBE, dtype=torch.float64), 3)
        assert torch.allclose(d, torch.ones(8, dtype=torch.float64))
        assert knn_outlier_weights(d, 1.1).sum() == 0

    def test_cube_smoothness_term_is_zero(self, pointwise_model):
        """Test the kNN loss smoothness term on cube corners."""
        cfg = AttackConfig.for_attack('knn', knn_k=3)
        loss = loss_knn(torch.tensor(CUBE, dtype=torch.float64), pointwise_model, cfg, 0)
        assert loss.terms['smooth'] == 0.0

    def test_single_outlier_term(self, pointwise_model):
        """Test that one far point contributes d_p / N."""
        points = torch.tensor(CUBE + [[10.0, 10.0, 10.0]], dtype=torch.float64)
        cfg = AttackConfig.for_attack('knn', knn_k=3)
        loss = loss_knn(points, pointwise_model, cfg, 0)
        d_outlier = (243.0 + 262.0 + 262.0) / 3
        assert loss.terms['smooth'] == pytest.approx(d_outlier / 9)

    def test_distances_match_double_loop(self):
        """Test d_p on 20 random 64-point clouds against a pairwise double loop."""
        k = 5
        for seed in range(20):
            points = random_cloud(seed, n=64).points
            expected = np.empty(len(points))
            for p in range(len(points)):
                squared = sorted(float(np.sum((points[p] - points[q]) ** 2))
                                 for q in range(len(points)) if q != p)
                expected[p] = np.mean(squared[:k])
            d = knn_distances(torch.tensor(points, dtype=torch.float64), k)
            np.testing.assert_allclose(d.numpy(), expected, rtol=1e-12, atol=1e-12)

    def test_needs_more_points_than_k(self):
        """Test that N <= k is rejected."""
        with pytest.raises(AttackConfigError):
            knn_distances(torch.zeros(3, 3), 3)

    def test_weights_are_detached(self):
        """Test that outlier weights carry no gradient."""
        points = torch.tensor(CUBE + [[5.0, 5.0, 5.0]], dtype=torch.float64, requires_grad=True)
        assert not knn_outlier_weights(knn_distances(points, 3), 1.1).requires_grad


class TestResolveTransform:
    """Tests for resolve_transform."""

    def test_baseline_is_identity(self):
        """Test that SS disabled always gives identity."""
        cfg = AttackConfig.for_attack('knn')
        assert resolve_transform(cfg, None, np.random.default_rng(0)) is IDENTITY

    def test_explicit_transform_wins(self):
        """Test that a given transform is used as is."""
        params = TransformParams(kind='scale', scale=(1.2, 1.0, 0.8))
        assert resolve_transform(AttackConfig.for_attack('ss-knn'), params, None) is params

    def test_draws_without_rng_are_fresh(self):
        """Test that repeated calls without an rng keep drawing new transforms."""
        cfg = AttackConfig.for_attack('ss-3d-adv', policy=TransformPolicy(p_a=1.0, p_s=1.0))
        draws = [resolve_transform(cfg, None, None) for _ in range(20)]
        assert all(d.kind.value == 'scale' for d in draws)
        assert len({d.scale for d in draws}) == 20

    def test_equal_configs_share_a_stream(self):
        """Test that the fallback stream is kept per config."""
        cfg = AttackConfig.for_attack('ss-knn', rng_seed=123)
        same = AttackConfig.for_attack('ss-knn', rng_seed=123)
        assert default_transform_stream(cfg) is default_transform_stream(same)
        assert default_transform_stream(cfg) is not default_transform_stream(AttackConfig.for_attack('ss-knn'))

    def test_loss_without_rng_varies(self, pointwise_model, cloud):
        """Test that an SS objective evaluated repeatedly sees different transforms."""
        x = as_tensor(cloud)
        cfg = AttackConfig.for_attack('ss-3d-adv', policy=TransformPolicy(p_a=1.0, p_s=1.0), kappa=100.0)
        totals = {float(loss_3d_adv(x + 0.02, x, pointwise_model, cfg, 0).total) for _ in range(20)}
        assert len(totals) > 10


class TestLoss3dAdv:
    """Tests for the 3d-adv objective."""

    def test_zero_perturbation_distance(self, pointwise_model, cloud):
        """Test that X' = X has zero distance term and total c * l_adv."""
        x = as_tensor(cloud)
        loss = loss_3d_adv(x.clone(), x, pointwise_model, AttackConfig.for_attack('3d-adv'), 0, const=2.0)
        assert loss.terms['distance'] == 0.0
        assert float(loss.total) == pytest.approx(2.0 * loss.terms['adv'])

    def test_distance_ignores_transform(self, pointwise_model, cloud):
        """Test that the distance term uses the untransformed X'."""
        x = as_tensor(cloud)
        x_adv = x + 0.01
        params = TransformParams(kind='scale', scale=(1.5, 1.5, 1.5))
        cfg = AttackConfig.for_attack('ss-3d-adv')
        loss = loss_3d_adv(x_adv, x, pointwise_model, cfg, 0, transform=params)
        assert loss.terms['distance'] == pytest.approx(float(((x_adv - x) ** 2).sum()))

    def test_ss_with_pa_zero_matches_baseline(self, pointwise_model, cloud):
        """Test that p_a=0 degenerates to the baseline objective."""
        x = as_tensor(cloud)
        x_adv = x + 0.02
        baseline = loss_3d_adv(x_adv, x, pointwise_model, AttackConfig.for_attack('3d-adv'), 0)
        ss_cfg = AttackConfig.for_attack('ss-3d-adv', p_a=0.0)
        ss = loss_3d_adv(x_adv, x, pointwise_model, ss_cfg, 0, rng=np.random.default_rng(1))
        assert float(ss.total) == float(baseline.total)

    def test_transformed_cloud_reaches_classifier(self, pointwise_model, cloud):
        """Test that the adversarial term is evaluated on T(X')."""
        x = as_tensor(cloud)
        params = TransformParams(kind='scale', scale=(0.6, 1.3, 1.1))
        cfg = AttackConfig.for_attack('ss-3d-adv', kappa=100.0)
        loss = loss_3d_adv(x, x, pointwise_model, cfg, 0, transform=params)
        direct = margin_loss(pointwise_model(apply_transform(params, x).unsqueeze(0))[0], 0, kappa=100.0)
        assert loss.terms['adv'] == pytest.approx(float(direct))


class TestLossKnn:
    """Tests for the kNN objective."""

    def test_adv_term_matches_3d_adv(self, pointwise_model, cloud):
        """Test that both objectives share the same adversarial term."""
        x = as_tensor(cloud)
        knn = loss_knn(x, pointwise_model, AttackConfig.for_attack('knn', kappa=15.0), 0)
        adv = loss_3d_adv(x, x, pointwise_model, AttackConfig.for_attack('3d-adv', kappa=15.0), 0)
        assert knn.terms['adv'] == pytest.approx(adv.terms['adv'])


class TestLossAdvpc:
    """Tests for the AdvPC objective."""

    @pytest.fixture
    def inputs(self, pointwise_model, autoencoder, cloud):
        x = as_tensor(cloud) + 0.01
        direct = float(margin_loss(pointwise_model(x.unsqueeze(0))[0], 0, kappa=30.0))
        encoded = float(margin_loss(pointwise_model(autoencode(autoencoder, x).unsqueeze(0))[0], 0, kappa=30.0))
        return x, direct, encoded

    def test_gamma_zero_is_direct_only(self, pointwise_model, autoencoder, inputs):
        """Test gamma=0 leaves only the direct branch."""
        x, direct, _ = inputs
        cfg = AttackConfig.for_attack('advpc', gamma=0.0, kappa=30.0)
        assert loss_advpc(x, pointwise_model, autoencoder, cfg, 0).terms['adv'] == pytest.approx(direct)

    def test_gamma_one_is_encoder_only(self, pointwise_model, autoencoder, inputs):
        """Test gamma=1 leaves only the reconstruction branch."""
        x, _, encoded = inputs
        cfg = AttackConfig.for_attack('advpc', gamma=1.0, kappa=30.0)
        assert loss_advpc(x, pointwise_model, autoencoder, cfg, 0).terms['adv'] == pytest.approx(encoded)

    def test_default_mix(self, pointwise_model, autoencoder, inputs):
        """Test the gamma=0.25 mix."""
        x, direct, encoded = inputs
        cfg = AttackConfig.for_attack('advpc', kappa=30.0)
        expected = 0.75 * direct + 0.25 * encoded
        assert loss_advpc(x, pointwise_model, autoencoder, cfg, 0).terms['adv'] == pytest.approx(expected)

    def test_point_count_must_match_decoder(self, pointwise_model, autoencoder):
        """Test that N must equal the decoder size."""
        with pytest.raises(ModelError):
            loss_advpc(torch.zeros(24, 3, dtype=torch.float64), pointwise_model, autoencoder,
                       AttackConfig.for_attack('advpc'), 0)


class TestLossAof:
    """Tests for the AOF objective."""

    def test_full_basis_gamma_one_equals_direct(self, pointwise_model, cloud):
        """Test that K_lf=N with gamma=1 reduces to the plain margin."""
        x = as_tensor(cloud)
        basis = compute_basis(cloud, 10)
        cfg = AttackConfig.for_attack('aof', gamma=1.0, k_lf=cloud.num_points, kappa=30.0)
        loss = loss_aof(x, pointwise_model, basis, cfg, 0)
        direct = float(margin_loss(pointwise_model(x.unsqueeze(0))[0], 0, kappa=30.0))
        assert loss.terms['adv'] == pytest.approx(direct, abs=1e-8)

    def test_default_k_lf(self):
        """Test the N // 10 default with a floor of one."""
        assert default_k_lf(256) == 25
        assert default_k_lf(5) == 1


class TestAttackLossDispatch:
    """Tests for attack_loss."""

    def test_advpc_needs_autoencoder(self, pointwise_model, cloud):
        """Test that AdvPC without an autoencoder is a config error."""
        x = as_tensor(cloud)
        with pytest.raises(AttackConfigError, match='autoencoder'):
            attack_loss(AttackKind.ADVPC, x, x, pointwise_model, AttackConfig.for_attack('advpc'), 0)

    def test_aof_needs_basis(self, pointwise_model, cloud):
        """Test that AOF without a basis is a config error."""
        x = as_tensor(cloud)
        with pytest.raises(AttackConfigError, match='basis'):
            attack_loss(AttackKind.AOF, x, x, pointwise_model, AttackConfig.for_attack('aof'), 0)

    def test_none_has_no_loss(self, pointwise_model, cloud):
        """Test that the identity attack has no objective."""
        x = as_tensor(cloud)
        with pytest.raises(AttackConfigError):
            attack_loss(AttackKind.NONE, x, x, pointwise_model, AttackConfig.for_attack('none'), 0)

    def test_policy_is_used_for_ss(self, pointwise_model, cloud):
        """Test that an SS config with p_a=1 evaluates a transformed cloud."""
        x = as_tensor(cloud)
        cfg = AttackConfig.for_attack('ss-knn', policy=TransformPolicy(p_a=1.0, p_s=1.0), kappa=100.0)
        ss = attack_loss(AttackKind.KNN, x, x, pointwise_model, cfg, 0, rng=np.random.default_rng(4))
        baseline = attack_loss(AttackKind.KNN, x, x, pointwise_model, AttackConfig.for_attack('knn', kappa=100.0), 0)
        assert ss.terms['adv'] != baseline.terms['adv']


def frozen_objective(name, model, autoencoder, cloud):
    """The SS objective `name` with one shear held fixed, as a function of X'."""
    x = as_tensor(cloud)
    params = TransformParams(kind='shear', shear=(0.1, -0.05, 0.08, 0.02))
    cfg = AttackConfig.for_attack(f"ss-{name}", kappa=50.0)
    if name == '3d-adv':
        return lambda x_adv: loss_3d_adv(x_adv, x, model, cfg, 0, transform=params).total
    if name == 'knn':
        return lambda x_adv: loss_knn(x_adv, model, cfg, 0, transform=params).total
    if name == 'advpc':
        return lambda x_adv: loss_advpc(x_adv, model, autoencoder, cfg, 0, transform=params).total
    basis = compute_basis(cloud, 10)
    return lambda x_adv: loss_aof(x_adv, model, basis, cfg, 0, transform=params).total


class TestGradientCorrectness:
    """Test autograd of every objective against central finite differences."""

    @pytest.mark.parametrize('name', ['3d-adv', 'knn', 'advpc', 'aof'])
    def test_matches_finite_differences(self, name, pointwise_model, autoencoder):
        """Test 20 random clouds with the transform frozen."""
        h = 1e-5
        for seed in range(20):
            cloud = random_cloud(seed)
            objective = frozen_objective(name, pointwise_model, autoencoder, cloud)
            x_adv = (as_tensor(cloud) + 0.03).requires_grad_(True)
            (grad,) = torch.autograd.grad(objective(x_adv), x_adv)
            for i, j in [(0, 0), (5, 1), (17, 2), (31, 0)]:
                plus, minus = x_adv.detach().clone(), x_adv.detach().clone()
                plus[i, j] += h
                minus[i, j] -= h
                numeric = (float(objective(plus)) - float(objective(minus))) / (2 * h)
                assert abs(numeric - float(grad[i, j])) <= 1e-4 + 1e-3 * abs(float(grad[i, j]))
