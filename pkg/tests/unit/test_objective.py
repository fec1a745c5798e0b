"""
Unit tests for the PU objective and the decision threshold.
"""

import numpy as np
import pytest
import torch
from pydantic import ValidationError

from loglab.core.exceptions import EmptyBatch, InvalidQ, NonFiniteInput
from loglab.core.schemas import LossConfig
from loglab.services.objective import (
    decision_threshold,
    loss,
    loss_gradient,
    pu_loss,
)
from tests.oracles import oracle_gradient

pytestmark = pytest.mark.unit


def _scalar_loss(z: np.ndarray, y: np.ndarray, config: LossConfig) -> float:
    value, _ = loss(torch.from_numpy(z), torch.from_numpy(y), config)
    return value.item()


class TestLoss:
    """Tests for loss arithmetic"""

    def test_zero_p_sample(self):
        """Test a P sample at the origin costs nothing"""
        value, per_sample = loss([[0.0, 0.0]], [0], LossConfig(q=0.5))

        assert value.item() == 0.0
        assert per_sample.tolist() == [0.0]

    def test_single_u_sample(self):
        """Test q^2 / ||z|| for one U sample"""
        value, _ = loss([[0.5, 0.0]], [1], LossConfig(q=0.5))
        assert value.item() == 0.5

    def test_mixed_batch(self):
        """Test the batch mean of both branches"""
        value, per_sample = loss(
            [[2.0, 0.0], [0.0, 1.0]], [0, 1], LossConfig(q=0.5)
        )

        assert value.item() == 2.125
        assert per_sample.tolist() == [4.0, 0.25]

    def test_branches_exposed(self):
        """Test P and U terms are separated"""
        result = pu_loss([[2.0, 0.0], [0.0, 1.0]], [0, 1], LossConfig(q=0.5))

        assert result.p_terms.tolist() == [4.0, 0.0]
        assert result.u_terms.tolist() == [0.0, 0.25]

    def test_single_vector(self):
        """Test a bare vector is treated as a batch of one"""
        value, _ = loss([0.0, 0.5], [1], LossConfig(q=0.5))
        assert value.item() == 0.5

    def test_norm_floor(self):
        """Test U samples at the origin are floored by epsilon"""
        config = LossConfig(q=0.5, epsilon=1e-3)
        value, _ = loss([[0.0, 0.0]], [1], config)
        assert value.item() == pytest.approx(0.25 / 1e-3)

    def test_non_negative(self):
        """Test the loss is never negative on random batches"""
        rng = np.random.default_rng(0)
        config = LossConfig(q=0.8)
        for _ in range(50):
            z = rng.normal(size=(16, 4))
            y = rng.integers(0, 2, size=16).astype(np.float64)
            assert _scalar_loss(z, y, config) >= 0.0

    def test_empty_batch(self):
        """Test an empty batch is rejected"""
        with pytest.raises(EmptyBatch):
            loss(torch.zeros((0, 4)), torch.zeros(0), LossConfig(q=0.5))

    def test_non_finite(self):
        """Test NaN inputs are rejected"""
        with pytest.raises(NonFiniteInput):
            loss([[float("nan"), 0.0]], [0], LossConfig(q=0.5))

    def test_length_mismatch(self):
        """Test labels must align with vectors"""
        with pytest.raises(ValueError):
            loss([[1.0, 0.0], [0.0, 1.0]], [0], LossConfig(q=0.5))

    def test_q_bounds(self):
        """Test q must lie strictly inside (0, 1)"""
        with pytest.raises(ValidationError):
            LossConfig(q=1.0)
        with pytest.raises(ValidationError):
            LossConfig(q=0.0)

    def test_branch_monotonicity(self):
        """Test a grows and b shrinks with ||z||"""
        config = LossConfig(q=0.7)
        norms = [0.1, 0.5, 1.0, 2.0]
        p_values = [loss([[n, 0.0]], [0], config)[0].item() for n in norms]
        u_values = [loss([[n, 0.0]], [1], config)[0].item() for n in norms]

        assert p_values == sorted(p_values)
        assert u_values == sorted(u_values, reverse=True)

    def test_u_branch_scales_with_q_squared(self):
        """Test doubling q quadruples the U penalty"""
        z = [[0.3, 0.4]]
        low, _ = loss(z, [1], LossConfig(q=0.2))
        high, _ = loss(z, [1], LossConfig(q=0.4))
        assert high.item() == pytest.approx(4 * low.item())


class TestLossGradient:
    """Tests for the analytic gradient"""

    def test_p_sample_unit_vector(self):
        """Test d||z||^2/dz = 2z for a single P sample"""
        grad = loss_gradient([[1.0, 0.0]], [0], LossConfig(q=0.5))
        assert grad.tolist() == [[2.0, 0.0]]

    def test_p_sample_origin(self):
        """Test the P gradient vanishes at the origin"""
        grad = loss_gradient([[0.0, 0.0, 0.0, 0.0]], [0], LossConfig(q=0.5))
        assert torch.count_nonzero(grad) == 0

    def test_p_gradient_linear(self):
        """Test the P gradient is linear in z"""
        config = LossConfig(q=0.5)
        z = torch.tensor([[0.3, -1.2, 0.7, 2.0]], dtype=torch.float64)
        single = loss_gradient(z, [0], config)
        double = loss_gradient(2 * z, [0], config)
        assert torch.allclose(double, 2 * single)

    def test_matches_finite_differences(self):
        """Test agreement with central differences on d=4 vectors"""
        rng = np.random.default_rng(42)
        for _ in range(20):
            config = LossConfig(q=float(rng.uniform(0.05, 0.95)))
            z = rng.normal(size=(6, 4))
            y = np.array([0, 1, 0, 1, 1, 0], dtype=np.float64)

            analytic = loss_gradient(torch.from_numpy(z), torch.from_numpy(y), config)
            numeric = oracle_gradient(lambda p: _scalar_loss(p, y, config), z, 1e-5)

            assert np.max(np.abs(analytic.numpy() - numeric)) < 1e-6

    def test_matches_autograd(self):
        """Test agreement with autograd through pu_loss"""
        config = LossConfig(q=0.3)
        z = torch.randn(8, 4, dtype=torch.float64, requires_grad=True)
        y = torch.tensor([0, 1] * 4, dtype=torch.float64)

        pu_loss(z, y, config).loss.backward()

        assert torch.allclose(z.grad, loss_gradient(z.detach(), y, config))

    def test_floor_zero_gradient(self):
        """Test U samples below the norm floor get no gradient"""
        grad = loss_gradient([[1e-9, 0.0]], [1], LossConfig(q=0.5, epsilon=1e-6))
        assert torch.count_nonzero(grad) == 0


class TestDecisionThreshold:
    """Tests for the balance-point threshold"""

    def test_half(self):
        """Test q = 0.5 gives 0.5^(2/3)"""
        assert decision_threshold(0.5) == pytest.approx(0.6300, abs=1e-4)

    def test_bgl_q(self):
        """Test the BGL-scale ratio"""
        assert decision_threshold(0.9178) == pytest.approx(0.9443, abs=5e-4)

    def test_limit_towards_one(self):
        """Test the threshold approaches 1 as q does"""
        assert decision_threshold(1 - 1e-9) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("q", [0.0, 1.0, -0.5, 1.5])
    def test_out_of_range(self, q):
        """Test q outside (0, 1) is rejected"""
        with pytest.raises(InvalidQ):
            decision_threshold(q)

    def test_branches_balance(self):
        """Test a(t) = b(t) at the threshold for random q"""
        rng = np.random.default_rng(7)
        for q in rng.uniform(1e-3, 1 - 1e-3, size=100):
            t = decision_threshold(float(q))
            assert abs(t**2 - q**2 / t) < 1e-12
