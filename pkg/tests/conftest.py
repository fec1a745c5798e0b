"""
Shared fixtures for the LogLAB test suite.
"""

from pathlib import Path
from typing import Any, Dict, List

import pytest
import torch

from loglab.core.schemas import DatasetFormat, ModelConfig
from loglab.services.ingestion import bundled_synthetic_spec, generate_synthetic
from loglab.services.model import init_parameters
from loglab.services.preprocessing import build_vocabulary, tokenize

BGL_LINES = [
    "- 1117838570 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.50.675872 "
    "R02-M1-N0-C:J12-U11 RAS KERNEL INFO instruction cache parity error corrected",
    "- 1117838571 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.51.675872 "
    "R02-M1-N0-C:J12-U11 RAS KERNEL INFO generating core.2275",
    "KERNDTLB 1117838573 2005.06.03 R23-M0-NE-C:J05-U01 2005-06-03-15.42.53.276129 "
    "R23-M0-NE-C:J05-U01 RAS KERNEL FATAL data TLB error interrupt",
    "- 1117838575 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.55.675872 "
    "R02-M1-N0-C:J12-U11 RAS KERNEL INFO CE sym 2, at 0x0b85eee0, mask 0x05",
    "- 1117838590 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.43.10.675872 "
    "R02-M1-N0-C:J12-U11 RAS APP INFO ciod: generated 128 core files",
]


@pytest.fixture
def bgl_format() -> DatasetFormat:
    return DatasetFormat(name="bgl")


@pytest.fixture
def bgl_lines() -> List[str]:
    return list(BGL_LINES)


@pytest.fixture
def bgl_file(tmp_path: Path) -> Path:
    path = tmp_path / "bgl.log"
    path.write_text("\n".join(BGL_LINES) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_corpus():
    """2,000 synthetic records with 20 failures and their failure times."""
    return generate_synthetic(
        bundled_synthetic_spec(n_messages=2000, n_failures=20, seed=3)
    )


@pytest.fixture
def small_vocab(small_corpus):
    records, _ = small_corpus
    return build_vocabulary(tokenize(r.content) for r in records)


@pytest.fixture
def tiny_model_config(small_vocab) -> ModelConfig:
    return ModelConfig(
        embed_dim=16,
        ff_hidden_dim=32,
        n_layers=2,
        n_heads=2,
        dropout=0.0,
        max_len=8,
        vocab_size=len(small_vocab),
        seed=11,
    )


@pytest.fixture
def small_model(tiny_model_config):
    """Freshly initialized scorer with dropout enabled."""
    return init_parameters(tiny_model_config.model_copy(update={"dropout": 0.2}))


@pytest.fixture
def fast_run_values(tmp_path: Path) -> Dict[str, Any]:
    """Desk-scale synthetic run that trains in seconds on a CPU."""
    return {
        "format": "synthetic",
        "synthetic_n_messages": 3000,
        "synthetic_n_failures": 30,
        "delta_ms": 5000,
        "delta_sweep": [1000, 5000],
        "embed_dim": 32,
        "ff_hidden_dim": 64,
        "n_layers": 2,
        "n_heads": 2,
        "dropout": 0.0,
        "batch_size": 64,
        "epochs": 6,
        "learning_rate": 1e-3,
        "seed": 7,
        "out_dir": str(tmp_path / "run"),
    }


@pytest.fixture(autouse=True)
def _single_thread_torch():
    """Pin intra-op threads so repeated runs reduce in the same order."""
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    yield
    torch.set_num_threads(threads)


@pytest.fixture
def fast_config_file(tmp_path: Path, fast_run_values: Dict[str, Any]) -> Path:
    """The desk-scale run written as a flat config file."""
    lines = []
    for key, value in fast_run_values.items():
        if isinstance(value, list):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    path = tmp_path / "fast.conf"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
