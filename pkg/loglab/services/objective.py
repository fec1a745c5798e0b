"""
Class-imbalance-aware PU objective.

P samples pay a(z) = ||z||^2, U samples pay b(z) = q^2 / ||z||; the batch loss is
the mean over the m samples of the batch.
"""

import logging
from typing import NamedTuple, Sequence, Union

import torch

from ..core.exceptions import EmptyBatch, InvalidQ, NonFiniteInput
from ..core.schemas import LossConfig

logger = logging.getLogger(__name__)

TensorLike = Union[torch.Tensor, Sequence]


class LossResult(NamedTuple):
    loss: torch.Tensor
    per_sample: torch.Tensor
    p_terms: torch.Tensor
    u_terms: torch.Tensor


def _as_batch(z_batch: TensorLike, y_tilde_batch: TensorLike):
    if isinstance(z_batch, torch.Tensor):
        z = z_batch
    else:
        z = torch.as_tensor(z_batch, dtype=torch.float64)
    if z.dim() == 1:
        z = z.unsqueeze(0)
    y = torch.as_tensor(y_tilde_batch, dtype=z.dtype, device=z.device).reshape(-1)
    if z.size(0) == 0:
        raise EmptyBatch("loss needs at least one sample")
    if z.size(0) != y.size(0):
        raise ValueError(f"batch has {z.size(0)} vectors but {y.size(0)} weak labels")
    if not torch.isfinite(z).all():
        raise NonFiniteInput("z contains NaN or Inf")
    return z, y


def pu_loss(
    z_batch: TensorLike, y_tilde_batch: TensorLike, config: LossConfig
) -> LossResult:
    """Mean of (1 - y) * ||z||^2 + y * q^2 / max(||z||, epsilon) over the batch."""
    z, y = _as_batch(z_batch, y_tilde_batch)
    squared = (z * z).sum(dim=-1)
    norms = torch.linalg.vector_norm(z, dim=-1).clamp(min=config.epsilon)

    p_terms = (1.0 - y) * squared
    u_terms = y * (config.q**2) / norms
    per_sample = p_terms + u_terms
    return LossResult(per_sample.mean(), per_sample, p_terms, u_terms)


def loss(z_batch: TensorLike, y_tilde_batch: TensorLike, config: LossConfig):
    """Scalar loss and the per-sample terms."""
    result = pu_loss(z_batch, y_tilde_batch, config)
    return result.loss, result.per_sample


def loss_gradient(
    z_batch: TensorLike, y_tilde_batch: TensorLike, config: LossConfig
) -> torch.Tensor:
    """Analytic per-sample gradient of the batch loss with respect to each z_i.

    P: 2 z / m.  U: -q^2 z / (m ||z||^3), and 0 where the norm floor is active.
    """
    z, y = _as_batch(z_batch, y_tilde_batch)
    m = z.size(0)
    norms = torch.linalg.vector_norm(z, dim=-1, keepdim=True)
    floored = norms < config.epsilon
    safe = norms.clamp(min=config.epsilon)

    grad_p = 2.0 * z / m
    grad_u = torch.where(
        floored, torch.zeros_like(z), -(config.q**2) * z / (m * safe**3)
    )
    y = y.unsqueeze(-1)
    return (1.0 - y) * grad_p + y * grad_u


def decision_threshold(q: float) -> float:
    """Score where the two penalties balance: ||z||^2 = q^2 / ||z||, so q^(2/3)."""
    if not 0.0 < q < 1.0:
        raise InvalidQ(f"q must lie in (0, 1), got {q}")
    return q ** (2.0 / 3.0)
