"""
Unit tests for configuration loading.
"""

from pathlib import Path

import pytest

from loglab.core.config import (
    build_run_config,
    config,
    delta_sweep_values,
    load_run_config,
    parse_config_text,
    resolve_max_len,
)
from loglab.core.exceptions import ConfigError, LogLabError
from loglab.core.schemas import RunConfig

pytestmark = pytest.mark.unit

CONFIGS_DIR = Path(__file__).resolve().parents[2] / "configs"


class TestParseConfigText:
    """Tests for the flat key = value format"""

    def test_comments_and_blanks(self):
        """Test comments and blank lines are ignored"""
        values = parse_config_text(
            "# run\nformat = bgl   # dataset kind\n\nseed=3\nthreshold =\n"
        )
        assert values == {"format": "bgl", "seed": "3", "threshold": None}

    def test_list_values(self):
        """Test delta_sweep is a comma-separated list"""
        values = parse_config_text("delta_sweep = 1000, 5000 ,15000")
        assert values["delta_sweep"] == ["1000", "5000", "15000"]

    def test_missing_equals(self):
        """Test a line without '=' names its line number"""
        with pytest.raises(ConfigError) as exc_info:
            parse_config_text("format bgl")
        assert exc_info.value.key == "line 1"


class TestBuildRunConfig:
    """Tests for validation into RunConfig"""

    def test_synthetic_needs_no_dataset(self):
        """Test the synthetic format runs without a dataset file"""
        run_config = build_run_config({"format": "synthetic"})
        assert run_config.dataset is None
        assert run_config.delta_ms == 1000

    def test_string_values_coerced(self):
        """Test file strings become typed values"""
        run_config = build_run_config(
            {"format": "synthetic", "delta_ms": "5000", "norm_first": "true"}
        )
        assert run_config.delta_ms == 5000
        assert run_config.norm_first is True

    def test_negative_delta_names_key(self):
        """Test a negative window is a config error naming delta_ms"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config({"format": "synthetic", "delta_ms": -1})
        assert exc_info.value.key == "delta_ms"
        assert isinstance(exc_info.value, LogLabError)

    def test_unknown_key_rejected(self):
        """Test typos in keys are reported"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config({"format": "synthetic", "learnig_rate": "0.1"})
        assert exc_info.value.key == "learnig_rate"

    def test_more_failures_than_messages(self):
        """Test the synthetic failure count cannot exceed the message count"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config(
                {
                    "format": "synthetic",
                    "synthetic_n_messages": 5,
                    "synthetic_n_failures": 10,
                }
            )
        assert exc_info.value.key == "config"
        assert "synthetic_n_failures" in str(exc_info.value)

    def test_missing_dataset(self):
        """Test real formats need a dataset path"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config({"format": "bgl"})
        assert exc_info.value.key == "dataset"

    def test_dataset_must_exist(self, tmp_path):
        """Test a dataset path that does not exist is a config error"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config({"format": "bgl", "dataset": str(tmp_path / "no.log")})
        assert exc_info.value.key == "dataset"

    def test_failure_times_must_exist(self, tmp_path):
        """Test a missing failure-time file is a config error"""
        with pytest.raises(ConfigError) as exc_info:
            build_run_config(
                {
                    "format": "synthetic",
                    "failure_times_path": str(tmp_path / "none.txt"),
                }
            )
        assert exc_info.value.key == "failure_times_path"

    def test_existing_dataset(self, bgl_file):
        """Test an existing dataset file is accepted"""
        run_config = build_run_config({"format": "bgl", "dataset": str(bgl_file)})
        assert run_config.dataset == str(bgl_file)


class TestLoadRunConfig:
    """Tests for merging files and overrides"""

    def test_overrides_win(self, tmp_path):
        """Test CLI overrides replace file values"""
        path = tmp_path / "run.conf"
        path.write_text("format = synthetic\ndelta_ms = 1000\nseed = 1\n")

        run_config = load_run_config(path, {"delta_ms": 5000, "seed": None})

        assert run_config.delta_ms == 5000
        assert run_config.seed == 1

    def test_unreadable_file(self, tmp_path):
        """Test a missing config file is a config error"""
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "absent.conf")

    def test_bundled_synthetic_config(self):
        """Test the shipped synthetic configuration validates"""
        run_config = load_run_config(CONFIGS_DIR / "synthetic.conf")

        assert run_config.format == "synthetic"
        assert run_config.delta_ms == 5000
        assert delta_sweep_values(run_config) == [1000, 5000, 15000]
        assert run_config.learning_rate == 1e-3


class TestPresets:
    """Tests for dataset presets"""

    @pytest.mark.parametrize(
        "fmt,length", [("bgl", 12), ("thunderbird", 20), ("spirit", 16)]
    )
    def test_max_len_presets(self, fmt, length, bgl_file):
        """Test each dataset gets its sequence length unless overridden"""
        run_config = build_run_config({"format": fmt, "dataset": str(bgl_file)})
        assert resolve_max_len(run_config) == length

    def test_max_len_override(self):
        """Test an explicit max_len beats the preset"""
        run_config = build_run_config({"format": "synthetic", "max_len": 6})
        assert resolve_max_len(run_config) == 6

    def test_abnormal_fractions(self):
        """Test the reported abnormal fractions are carried"""
        fractions = {
            name: preset.abnormal_fraction
            for name, preset in config.DATASET_PRESETS.items()
        }
        assert fractions["bgl"] == 0.073
        assert fractions["spirit"] == 0.153
        assert fractions["thunderbird"] == 0.045

    def test_delta_sweep_sorted_unique(self):
        """Test sweep values are de-duplicated and sorted"""
        run_config = RunConfig(format="synthetic", delta_sweep=[5000, 1000, 5000])
        assert delta_sweep_values(run_config) == [1000, 5000]

    def test_model_config_projection(self):
        """Test RunConfig projects onto the model and training configs"""
        run_config = RunConfig(format="synthetic", embed_dim=32, seed=9)
        model_config = run_config.to_model_config(vocab_size=50, max_len=12)
        training_config = run_config.to_training_config()

        assert model_config.embed_dim == 32
        assert model_config.seed == 9
        assert training_config.shuffle_seed == 9
