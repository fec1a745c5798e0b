"""
Typed configuration and report models.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class DatasetFormat(BaseModel):
    """Whitespace-field layout of one log dataset."""

    model_config = ConfigDict(frozen=True)

    name: str
    label_field_index: int = Field(default=0, ge=0)
    timestamp_field_index: int = Field(default=1, ge=0)
    timestamp_unit: Literal["seconds", "milliseconds"] = "seconds"
    content_start_field_index: int = Field(default=5, ge=0)

    @model_validator(mode="after")
    def _check_indices(self) -> "DatasetFormat":
        if self.label_field_index == self.timestamp_field_index:
            raise ValueError("label and timestamp field indices must differ")
        if self.content_start_field_index <= max(
            self.label_field_index, self.timestamp_field_index
        ):
            raise ValueError(
                "content_start_field_index must follow the label and timestamp fields"
            )
        return self

    @property
    def min_fields(self) -> int:
        return self.content_start_field_index + 1


class SyntheticSpec(BaseModel):
    """Parameters of a generated log corpus.

    Templates may contain the slots ``{num}``, ``{hex}`` and ``{node}`` which are
    filled with random values per message.
    """

    model_config = ConfigDict(frozen=True)

    n_messages: int = Field(ge=1)
    templates: List[str] = Field(min_length=1)
    anomaly_templates: List[str] = Field(default_factory=list)
    n_failures: int = Field(default=0, ge=0)
    mean_rate_per_s: float = Field(default=1.0, gt=0)
    seed: int = 0
    start_ms: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_templates(self) -> "SyntheticSpec":
        unknown = [t for t in self.anomaly_templates if t not in self.templates]
        if unknown:
            raise ValueError(f"anomaly templates not in templates: {unknown[:3]}")
        if self.n_failures > 0 and not self.anomaly_templates:
            raise ValueError("n_failures > 0 requires at least one anomaly template")
        if self.n_failures > self.n_messages:
            raise ValueError("n_failures cannot exceed n_messages")
        if self.n_failures < self.n_messages and not self.normal_templates:
            raise ValueError("at least one normal template is required")
        return self

    @property
    def normal_templates(self) -> List[str]:
        return [t for t in self.templates if t not in self.anomaly_templates]


class ModelConfig(BaseModel):
    """Architecture of the scoring network."""

    model_config = ConfigDict(frozen=True)

    embed_dim: int = Field(default=128, ge=1)
    ff_hidden_dim: int = Field(default=256, ge=1)
    n_layers: int = Field(default=2, ge=1)
    n_heads: int = Field(default=2, ge=1)
    dropout: float = Field(default=0.10, ge=0.0, lt=1.0)
    max_len: int = Field(default=12, ge=2)
    vocab_size: int = Field(ge=5)
    seed: int = 0
    norm_first: bool = False
    # target norm of the [CLS] output right after initialization
    output_scale: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_heads(self) -> "ModelConfig":
        if self.embed_dim % self.n_heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )
        return self


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    q: float = Field(gt=0.0, lt=1.0)
    epsilon: float = Field(default=1e-6, gt=0.0)


class TrainingConfig(BaseModel):
    """Optimizer and loop settings; defaults follow the published setup."""

    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=1024, ge=1)
    epochs: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0)
    weight_decay: float = Field(default=5e-5, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    shuffle_seed: int = 0
    epsilon_norm: float = Field(default=1e-6, gt=0)


class EpochStats(BaseModel):
    epoch: int
    mean_loss: float
    mean_p_term: float
    mean_u_term: float
    wall_time_s: float


class TrainingLog(BaseModel):
    epochs: List[EpochStats] = Field(default_factory=list)


class EvalReport(BaseModel):
    """Confusion counts and metrics with "abnormal" as the positive class."""

    dataset: str = ""
    delta_ms: Optional[int] = None
    threshold: Optional[float] = None
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class SweepResult(BaseModel):
    reports: List[EvalReport]
    best: EvalReport


class RunConfig(BaseModel):
    """Flat run configuration; one key per field."""

    model_config = ConfigDict(extra="forbid")

    # data
    dataset: Optional[str] = None
    format: Literal["bgl", "thunderbird", "spirit", "synthetic"] = "bgl"
    limit: Optional[int] = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1)
    failure_times_path: Optional[str] = None
    failure_unit: Literal["seconds", "milliseconds"] = "milliseconds"
    synthetic_n_messages: int = Field(default=50_000, ge=1)
    synthetic_n_failures: int = Field(default=50, ge=0)
    synthetic_rate: float = Field(default=1.0, gt=0)

    # weak supervision
    delta_ms: int = Field(default=1000, ge=0)
    delta_sweep: List[int] = Field(default_factory=lambda: [1000, 5000, 15000])

    # preprocessing
    max_len: Optional[int] = Field(default=None, ge=2)
    min_freq: int = Field(default=1, ge=1)

    # model
    embed_dim: int = Field(default=128, ge=1)
    ff_hidden_dim: int = Field(default=256, ge=1)
    n_layers: int = Field(default=2, ge=1)
    n_heads: int = Field(default=2, ge=1)
    dropout: float = Field(default=0.10, ge=0.0, lt=1.0)
    norm_first: bool = False
    output_scale: float = Field(default=1.0, gt=0)

    # training
    batch_size: int = Field(default=1024, ge=1)
    epochs: int = Field(default=8, ge=1)
    learning_rate: float = Field(default=1e-4, gt=0)
    weight_decay: float = Field(default=5e-5, ge=0)
    eval_batch_size: int = Field(default=4096, ge=1)

    # labeling
    threshold: Optional[float] = Field(default=None, gt=0)

    out_dir: str = "output"
    seed: int = 0

    @model_validator(mode="after")
    def _check_consistency(self) -> "RunConfig":
        if any(d < 0 for d in self.delta_sweep):
            raise ValueError("delta_sweep entries must be >= 0")
        if self.embed_dim % self.n_heads != 0:
            raise ValueError("embed_dim must be divisible by n_heads")
        if self.synthetic_n_failures > self.synthetic_n_messages:
            raise ValueError("synthetic_n_failures exceeds synthetic_n_messages")
        return self

    def to_model_config(self, vocab_size: int, max_len: int) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim,
            ff_hidden_dim=self.ff_hidden_dim,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            dropout=self.dropout,
            max_len=max_len,
            vocab_size=vocab_size,
            seed=self.seed,
            norm_first=self.norm_first,
            output_scale=self.output_scale,
        )

    def to_training_config(self) -> TrainingConfig:
        return TrainingConfig(
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            shuffle_seed=self.seed,
        )
