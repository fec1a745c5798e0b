"""
Attention-based scoring network: the [CLS] output vector z and its norm as score.
"""

import logging
import math
from dataclasses import dataclass
from typing import (
    Any,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import torch
import torch.nn as nn
from pydantic import ValidationError

from ..core.exceptions import InvalidConfig, ShapeMismatch
from ..core.schemas import ModelConfig
from .batching import batch_bounds
from .ingestion import LogDataset, LogRecord
from .preprocessing import PAD_ID, EncodedSequence, Vocabulary, encode_corpus

logger = logging.getLogger(__name__)


def sinusoidal_positions(length: int, dim: int) -> torch.Tensor:
    """Fixed sine/cosine position table of shape (length, dim)."""
    position = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div_term = torch.exp(
        torch.arange(0, dim, 2, dtype=torch.float32) * (-math.log(10000.0) / dim)
    )
    table = torch.zeros(length, dim)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term)[:, : dim // 2]
    return table


class EncoderBlock(nn.Module):
    """Masked multi-head self-attention and feed-forward, each with residual + norm."""

    def __init__(
        self,
        d_model: int,
        num_heads: int,
        d_ff: int,
        dropout: float = 0.1,
        norm_first: bool = False,
    ):
        super().__init__()
        self.norm_first = norm_first
        self.attention = nn.MultiheadAttention(
            d_model, num_heads, dropout=dropout, batch_first=True
        )
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)

        self.feed_forward = nn.Sequential(
            nn.Linear(d_model, d_ff),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(d_ff, d_model),
        )
        self.dropout = nn.Dropout(dropout)

    def _attend(self, x: torch.Tensor, padding_mask: torch.Tensor) -> torch.Tensor:
        attn_output, _ = self.attention(
            x, x, x, key_padding_mask=padding_mask, need_weights=False
        )
        return self.dropout(attn_output)

    def forward(self, x: torch.Tensor, padding_mask: torch.Tensor) -> torch.Tensor:
        if self.norm_first:
            x = x + self._attend(self.norm1(x), padding_mask)
            return x + self.dropout(self.feed_forward(self.norm2(x)))

        x = self.norm1(x + self._attend(x, padding_mask))
        return self.norm2(x + self.dropout(self.feed_forward(x)))


class LogScorer(nn.Module):
    """Embeddings + positional encodings -> encoder blocks -> [CLS] output z."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(
            config.vocab_size, config.embed_dim, padding_idx=PAD_ID
        )
        self.register_buffer(
            "positions",
            sinusoidal_positions(config.max_len, config.embed_dim),
            persistent=False,
        )
        self.layers = nn.ModuleList(
            [
                EncoderBlock(
                    config.embed_dim,
                    config.n_heads,
                    config.ff_hidden_dim,
                    config.dropout,
                    config.norm_first,
                )
                for _ in range(config.n_layers)
            ]
        )
        # pre-norm stacks end on the residual stream, so close them with a norm
        self.final_norm = nn.LayerNorm(config.embed_dim) if config.norm_first else None
        self.dropout = nn.Dropout(config.dropout)

    @property
    def output_norm(self) -> nn.LayerNorm:
        if self.final_norm is not None:
            return self.final_norm
        return self.layers[-1].norm2

    def count_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters() if p.requires_grad)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x = self.embedding(ids) + self.positions[: ids.size(1)].to(
            self.embedding.weight.dtype
        )
        x = self.dropout(x)
        padding_mask = ~mask
        for layer in self.layers:
            x = layer(x, padding_mask)
        if self.final_norm is not None:
            x = self.final_norm(x)
        return x[:, 0]


def init_parameters(config: Union[ModelConfig, Mapping[str, Any]]) -> LogScorer:
    """Build a seeded model whose initial scores are close to ``output_scale``.

    Layer norm output has norm sqrt(d) per position, so scaling the last norm's
    gain to output_scale / sqrt(d) sets the initial ||z||.
    """
    if not isinstance(config, ModelConfig):
        try:
            config = ModelConfig.model_validate(config)
        except ValidationError as e:
            raise InvalidConfig(str(e))

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = LogScorer(config)
    with torch.no_grad():
        gain = config.output_scale / math.sqrt(config.embed_dim)
        model.output_norm.weight.fill_(gain)

    logger.info(
        f"Initialized scorer: d={config.embed_dim}, layers={config.n_layers}, "
        f"heads={config.n_heads}, vocab={config.vocab_size}, "
        f"parameters={model.count_parameters():,}"
    )
    return model


def anomaly_scores(z: torch.Tensor) -> torch.Tensor:
    return torch.linalg.vector_norm(z, dim=-1)


def forward(
    model: LogScorer,
    ids: torch.Tensor,
    mask: torch.Tensor,
    training_mode: bool = False,
) -> torch.Tensor:
    """Checked forward pass returning z of shape (batch, d)."""
    config = model.config
    if ids.dim() != 2 or ids.size(1) != config.max_len:
        raise ShapeMismatch(
            f"expected ids of shape (batch, {config.max_len}), got {tuple(ids.shape)}"
        )
    if mask.shape != ids.shape:
        raise ShapeMismatch(
            f"mask shape {tuple(mask.shape)} differs from ids {tuple(ids.shape)}"
        )
    if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= config.vocab_size):
        raise ShapeMismatch(f"token ids must lie in [0, {config.vocab_size})")
    model.train(training_mode)
    return model(ids, mask.to(torch.bool))


class ScoredMessage(NamedTuple):
    record_id: int
    z: Optional[np.ndarray]
    score: float


@dataclass(frozen=True)
class ScoreTable:
    """Scores aligned with record order; iterates as ScoredMessage."""

    record_ids: np.ndarray
    scores: np.ndarray
    vectors: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.scores)

    def __getitem__(self, index: int) -> ScoredMessage:
        z = None if self.vectors is None else self.vectors[index]
        return ScoredMessage(int(self.record_ids[index]), z, float(self.scores[index]))

    def __iter__(self) -> Iterator[ScoredMessage]:
        for index in range(len(self)):
            yield self[index]


def score_encoded(
    model: LogScorer,
    ids: np.ndarray,
    mask: np.ndarray,
    batch_size: int,
    keep_vectors: bool = False,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    scores = np.empty(len(ids), dtype=np.float64)
    vectors = (
        np.empty((len(ids), model.config.embed_dim), dtype=np.float64)
        if keep_vectors
        else None
    )
    with torch.no_grad():
        for start, stop in batch_bounds(len(ids), batch_size):
            z = forward(
                model,
                torch.from_numpy(ids[start:stop]),
                torch.from_numpy(mask[start:stop]),
                training_mode=False,
            )
            scores[start:stop] = anomaly_scores(z).double().numpy()
            if vectors is not None:
                vectors[start:stop] = z.double().numpy()
    return scores, vectors


def score_messages(
    model: LogScorer, batch: Sequence[EncodedSequence], record_ids: Sequence[int]
) -> List[ScoredMessage]:
    """Score already-encoded sequences in evaluation mode."""
    ids = np.asarray([e.ids for e in batch], dtype=np.int64)
    mask = np.asarray([e.attention_mask for e in batch], dtype=bool)
    if ids.ndim != 2:
        raise ShapeMismatch("encoded sequences must share one length")
    scores, vectors = score_encoded(model, ids, mask, max(len(batch), 1), True)
    return [
        ScoredMessage(int(rid), vectors[i], float(scores[i]))
        for i, rid in enumerate(record_ids)
    ]


def score_dataset(
    records: Union[LogDataset, Sequence[LogRecord]],
    vocab: Vocabulary,
    model: LogScorer,
    batch_size: int,
    keep_vectors: bool = False,
) -> ScoreTable:
    """One evaluation-mode score per record, in record order."""
    ids, mask = encode_corpus((r.content for r in records), vocab, model.config.max_len)
    scores, vectors = score_encoded(model, ids, mask, batch_size, keep_vectors)
    record_ids = np.fromiter((r.id for r in records), dtype=np.int64, count=len(records))
    if len(scores):
        logger.info(f"Scored {len(scores)} records (mean score {scores.mean():.4f})")
    return ScoreTable(record_ids=record_ids, scores=scores, vectors=vectors)
