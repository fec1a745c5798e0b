"""
Application configuration settings.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import ValidationError

from .exceptions import ConfigError
from .schemas import DatasetFormat, RunConfig

# Setup logging
logging.basicConfig(
    level=os.getenv("LOGLAB_LOG_LEVEL", "INFO"),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


class DatasetPreset:
    """Per-dataset defaults taken from the published experimental setup."""

    def __init__(
        self,
        dataset_format: DatasetFormat,
        max_len: int,
        abnormal_fraction: Optional[float] = None,
        full_size: Optional[int] = None,
    ):
        self.format = dataset_format
        self.max_len = max_len
        self.abnormal_fraction = abnormal_fraction
        self.full_size = full_size


# Application settings
class Config:
    """Application configuration."""

    # Application metadata
    APP_TITLE = "LogLAB"
    APP_DESCRIPTION = "Weakly supervised labeling of log anomalies"
    APP_VERSION = "1.0.0"

    # Runtime settings
    LOG_LEVEL = os.getenv("LOGLAB_LOG_LEVEL", "INFO")
    DEFAULT_OUT_DIR = os.getenv("LOGLAB_OUT_DIR", "output")
    DEFAULT_WORKERS = int(os.getenv("LOGLAB_WORKERS", "1"))

    # Ingestion settings
    PARSE_CHUNK_SIZE = 50_000
    MAX_MALFORMED_WARNINGS = 5
    ABNORMAL_FRACTION_TOLERANCE = 0.001

    # Evaluation settings
    THRESHOLD_SWEEP_FACTORS = [0.25, 0.5, 1.0, 2.0]

    # Artifact names inside the output directory
    RECORDS_FILE = "records.tsv"
    WEAK_LABELS_FILE = "weak_labels.tsv"
    VOCAB_FILE = "vocab.tsv"
    CHECKPOINT_FILE = "model.pt"
    TRAINING_LOG_FILE = "training_log.jsonl"
    LABELED_FILE = "labeled.tsv"
    REPORT_JSON_FILE = "report.json"
    REPORT_TEXT_FILE = "report.txt"
    SWEEP_FILE = "sweep.json"
    DELTA_SWEEP_FILE = "delta_sweep.txt"

    DATASET_PRESETS: Dict[str, DatasetPreset] = {
        "bgl": DatasetPreset(
            DatasetFormat(name="bgl"),
            max_len=12,
            abnormal_fraction=0.073,
            full_size=4_747_963,
        ),
        "thunderbird": DatasetPreset(
            DatasetFormat(name="thunderbird"),
            max_len=20,
            abnormal_fraction=0.045,
            full_size=5_000_000,
        ),
        "spirit": DatasetPreset(
            DatasetFormat(name="spirit"),
            max_len=16,
            abnormal_fraction=0.153,
            full_size=5_000_000,
        ),
        "synthetic": DatasetPreset(DatasetFormat(name="synthetic"), max_len=12),
    }


config = Config()

_LIST_KEYS = {"delta_sweep"}


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in _LIST_KEYS:
            values[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            values[key] = value if value != "" else None
    return values


def load_config_file(path: Path) -> Dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError("config", f"cannot read {path}: {e}")
    return parse_config_text(text)


def _first_error_key(error: ValidationError) -> str:
    for item in error.errors():
        loc = item.get("loc") or ()
        if loc:
            return str(loc[0])
    return "config"


def build_run_config(values: Mapping[str, Any]) -> RunConfig:
    """Validate merged values into a RunConfig, naming the offending key on error."""
    try:
        run_config = RunConfig(**{k: v for k, v in values.items() if v is not None})
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_first_error_key(e), first.get("msg", str(e)))

    if run_config.format != "synthetic" and not run_config.dataset:
        raise ConfigError(
            "dataset", f"a dataset path is required for format {run_config.format!r}"
        )
    if run_config.dataset and run_config.format != "synthetic":
        if not Path(run_config.dataset).is_file():
            raise ConfigError("dataset", f"file not found: {run_config.dataset}")
    if run_config.failure_times_path and not Path(
        run_config.failure_times_path
    ).is_file():
        raise ConfigError(
            "failure_times_path", f"file not found: {run_config.failure_times_path}"
        )
    return run_config


def load_run_config(
    path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """Merge a config file with CLI overrides (overrides win) and validate."""
    values: Dict[str, Any] = {"out_dir": config.DEFAULT_OUT_DIR}
    if config.DEFAULT_WORKERS > 1:
        values["workers"] = config.DEFAULT_WORKERS
    if path is not None:
        values.update(load_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    run_config = build_run_config(values)
    logger.info(
        f"Loaded run config: format={run_config.format}, "
        f"delta_ms={run_config.delta_ms}, out_dir={run_config.out_dir}"
    )
    return run_config


def resolve_max_len(run_config: RunConfig) -> int:
    if run_config.max_len is not None:
        return run_config.max_len
    return config.DATASET_PRESETS[run_config.format].max_len


def delta_sweep_values(run_config: RunConfig) -> List[int]:
    return sorted(set(run_config.delta_sweep))
