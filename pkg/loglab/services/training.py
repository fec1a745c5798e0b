"""
Mini-batch training of the scorer with the PU objective, plus checkpoints.
"""

import logging
import math
import time
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import torch
from pydantic import ValidationError

from ..core.exceptions import (
    CheckpointReadError,
    DegeneratePartition,
    NonFiniteLoss,
    VersionMismatch,
)
from ..core.schemas import (
    EpochStats,
    LossConfig,
    ModelConfig,
    TrainingConfig,
    TrainingLog,
)
from .batching import batch_bounds
from .model import LogScorer, forward, init_parameters
from .objective import pu_loss
from .preprocessing import Vocabulary, encode_corpus
from .weak_supervision import WeakDataset

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "loglab-scorer"
CHECKPOINT_VERSION = 1

PathLike = Union[str, Path]


def _epoch_generator(shuffle_seed: int, epoch: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(shuffle_seed * 1_000_003 + epoch)
    return generator


def train(
    weak_dataset: WeakDataset,
    vocab: Vocabulary,
    model_config: ModelConfig,
    training_config: TrainingConfig,
    model: Optional[LogScorer] = None,
) -> Tuple[LogScorer, TrainingLog]:
    """Train for ``epochs`` passes over a per-epoch reshuffled stream.

    Weight decay is the coupled L2 form of ``torch.optim.Adam``; the last short
    batch is kept and averaged over its own size.
    """
    if weak_dataset.is_degenerate:
        raise DegeneratePartition(
            f"cannot train with |P|={weak_dataset.n_p}, |U|={weak_dataset.n_u}"
        )
    if model_config.vocab_size != len(vocab):
        raise ValueError(
            f"model vocab_size {model_config.vocab_size} != vocabulary {len(vocab)}"
        )

    loss_config = LossConfig(q=weak_dataset.q, epsilon=training_config.epsilon_norm)
    logger.info(
        f"Training on {len(weak_dataset)} records: |P|={weak_dataset.n_p}, "
        f"|U|={weak_dataset.n_u}, q={loss_config.q:.6f}"
    )

    ids_np, mask_np = encode_corpus(
        (r.content for r in weak_dataset.records), vocab, model_config.max_len
    )
    ids = torch.from_numpy(ids_np)
    mask = torch.from_numpy(mask_np)
    weak = torch.from_numpy(weak_dataset.weak_labels.astype(np.float32))
    n = ids.size(0)

    if model is None:
        model = init_parameters(model_config)
    dtype = model.embedding.weight.dtype
    weak = weak.to(dtype)

    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=training_config.learning_rate,
        betas=(training_config.beta1, training_config.beta2),
        eps=training_config.adam_eps,
        weight_decay=training_config.weight_decay,
    )

    log = TrainingLog()
    # dropout draws from the global generator; seed it for reproducible runs
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(training_config.shuffle_seed)
        for epoch in range(1, training_config.epochs + 1):
            started = time.perf_counter()
            order = torch.randperm(
                n, generator=_epoch_generator(training_config.shuffle_seed, epoch)
            )
            loss_sum = 0.0
            p_sum = 0.0
            u_sum = 0.0

            for step, (start, stop) in enumerate(
                batch_bounds(n, training_config.batch_size)
            ):
                index = order[start:stop]
                z = forward(model, ids[index], mask[index], training_mode=True)
                if not torch.isfinite(z).all():
                    raise NonFiniteLoss(
                        f"non-finite z at epoch {epoch}, step {step}: "
                        f"max |z| = {z.detach().abs().max().item():.4g}"
                    )
                result = pu_loss(z, weak[index], loss_config)
                if not torch.isfinite(result.loss):
                    raise NonFiniteLoss(
                        f"non-finite loss at epoch {epoch}, step {step}: "
                        f"max |z| = {z.detach().abs().max().item():.4g}"
                    )

                optimizer.zero_grad()
                result.loss.backward()
                optimizer.step()

                loss_sum += result.per_sample.detach().sum().item()
                p_sum += result.p_terms.detach().sum().item()
                u_sum += result.u_terms.detach().sum().item()

            stats = EpochStats(
                epoch=epoch,
                mean_loss=loss_sum / n,
                mean_p_term=p_sum / max(weak_dataset.n_p, 1),
                mean_u_term=u_sum / max(weak_dataset.n_u, 1),
                wall_time_s=time.perf_counter() - started,
            )
            log.epochs.append(stats)
            logger.info(
                f"Epoch {epoch}/{training_config.epochs}: loss={stats.mean_loss:.6f}, "
                f"P-term={stats.mean_p_term:.6f}, U-term={stats.mean_u_term:.6f}, "
                f"{stats.wall_time_s:.1f}s"
            )

    model.eval()
    return model, log


def write_training_log(log: TrainingLog, path: PathLike) -> None:
    """One JSON object per epoch."""
    with open(path, "w", encoding="utf-8") as handle:
        for stats in log.epochs:
            handle.write(stats.model_dump_json() + "\n")


def read_training_log(path: PathLike) -> TrainingLog:
    with open(path, "r", encoding="utf-8") as handle:
        epochs = [
            EpochStats.model_validate_json(line) for line in handle if line.strip()
        ]
    return TrainingLog(epochs=epochs)


def checkpoint(model: LogScorer, path: PathLike) -> None:
    """Store the configuration and all weights in a versioned container."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.model_dump(),
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
    }
    torch.save(payload, path)
    logger.info(f"Saved checkpoint to {path}")


def restore(path: PathLike, vocab_size: Optional[int] = None) -> LogScorer:
    """Load a checkpoint; shape or version disagreements raise VersionMismatch."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except OSError:
        raise
    except Exception as e:
        raise CheckpointReadError(f"cannot decode checkpoint {path}: {e}")

    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise VersionMismatch(f"{path} is not a scorer checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"checkpoint version {payload.get('version')} != {CHECKPOINT_VERSION}"
        )
    try:
        config = ModelConfig.model_validate(payload["model_config"])
    except (KeyError, ValidationError) as e:
        raise VersionMismatch(f"checkpoint {path} has an invalid model config: {e}")
    if vocab_size is not None and config.vocab_size != vocab_size:
        raise VersionMismatch(
            f"checkpoint vocab_size {config.vocab_size} != vocabulary {vocab_size}"
        )

    model = LogScorer(config)
    try:
        model.load_state_dict(payload["state_dict"])
    except (KeyError, RuntimeError) as e:
        raise VersionMismatch(f"checkpoint weights do not fit the model: {e}")
    for name, tensor in model.state_dict().items():
        if tensor.is_floating_point() and not torch.isfinite(tensor).all():
            raise CheckpointReadError(f"non-finite weights in {name}")
    model.eval()
    logger.info(f"Restored checkpoint from {path}")
    return model


def summarize_log(log: TrainingLog) -> str:
    if not log.epochs:
        return "no epochs"
    first, last = log.epochs[0], log.epochs[-1]
    ratio = last.mean_loss / first.mean_loss if first.mean_loss else math.nan
    return (
        f"{len(log.epochs)} epochs, loss {first.mean_loss:.6f} -> "
        f"{last.mean_loss:.6f} (x{ratio:.3f})"
    )
