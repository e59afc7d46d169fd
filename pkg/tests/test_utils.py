"""Tests for config loading and logging helpers."""

import json
import logging
import re
from pathlib import Path

import pytest

from helmholtz.utils.config import (
    get_section,
    load_config,
    load_json_overrides,
    merge_overrides,
    save_config,
)
from helmholtz.utils.logging import generate_run_name, log_stage, setup_logging

CONFIGS = Path(__file__).parents[1] / "configs"


class TestLoadConfig:
    def test_quick_extends_base(self):
        config = load_config(CONFIGS / "quick_config.yaml")
        assert "_extends" not in config
        assert config["rig"]["width"] == 64
        assert config["rig"]["baseline"] == 0.05
        assert config["sgm"]["p2"] == 8.0
        assert config["refine"]["iters_per_scale"] == [10, 8, 5]

    def test_benchmark_config(self):
        config = load_config(CONFIGS / "occluded_floor.yaml")
        assert config["rig"]["width"] == 160
        assert config["rig"]["baseline"] == 0.1
        assert config["trajectory"]["step"] == [0.1, 0.0, 0.0]
        assert config["trajectory"]["frames"] == 3
        assert config["sgm"]["min_disparity"] == 3.5
        assert config["sgm"]["d_max"] == 32
        assert config["landmarks"]["depth_gate"] == 0.2

    def test_circular_extends(self, tmp_path):
        (tmp_path / "a.yaml").write_text("_extends: b.yaml\nx: 1\n")
        (tmp_path / "b.yaml").write_text("_extends: a.yaml\ny: 2\n")
        with pytest.raises(ValueError, match="circular"):
            load_config(tmp_path / "a.yaml")

    def test_top_level_must_be_mapping(self, tmp_path):
        (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
        with pytest.raises(ValueError, match="mapping"):
            load_config(tmp_path / "list.yaml")

    def test_empty_file(self, tmp_path):
        (tmp_path / "empty.yaml").write_text("")
        assert load_config(tmp_path / "empty.yaml") == {}

    def test_save_round_trip(self, tmp_path):
        config = {"losses": {"w1": 1.0, "beta": 0.0}, "seed": 3}
        save_config(config, tmp_path / "out" / "config.yaml")
        assert load_config(tmp_path / "out" / "config.yaml") == config


class TestSections:
    def test_missing_section_is_empty(self):
        assert get_section({"sgm": {"d_max": 8}}, "losses") == {}
        assert get_section(None, "losses") == {}

    def test_section_is_a_copy(self):
        config = {"sgm": {"d_max": 8}}
        get_section(config, "sgm")["d_max"] = 4
        assert config["sgm"]["d_max"] == 8

    def test_section_must_be_mapping(self):
        with pytest.raises(ValueError, match="must be a mapping"):
            get_section({"sgm": [1, 2]}, "sgm")

    def test_overrides_skip_none(self):
        config = {"exchange": {"theta": 0.02, "mode": "max"}}
        merged = merge_overrides(config, "exchange", {"theta": None, "mode": "mean"})
        assert merged["exchange"] == {"theta": 0.02, "mode": "mean"}
        assert config["exchange"]["mode"] == "max"

    def test_json_overrides(self, tmp_path):
        (tmp_path / "w.json").write_text(json.dumps({"w3": 0.0}))
        assert load_json_overrides(tmp_path / "w.json") == {"w3": 0.0}
        assert load_json_overrides(None) == {}
        (tmp_path / "bad.json").write_text("[1]")
        with pytest.raises(ValueError, match="JSON object"):
            load_json_overrides(tmp_path / "bad.json")


class TestLogging:
    def test_unknown_level(self):
        with pytest.raises(ValueError, match="unknown log level"):
            setup_logging("LOUD", name="helmholtz.test_level")

    def test_log_stage(self, caplog):
        logger = logging.getLogger("helmholtz.test_stage")
        with caplog.at_level(logging.INFO, logger="helmholtz.test_stage"):
            with log_stage(logger, "SGM"):
                pass
        messages = [r.getMessage() for r in caplog.records]
        assert messages[0] == "SGM..."
        assert re.fullmatch(r"SGM done in \d+\.\d\ds", messages[1])

    def test_run_name(self):
        assert re.fullmatch(r"refine_\d{8}_\d{6}", generate_run_name("refine"))
        name = generate_run_name("refine", "configs/scenes/desk.json")
        assert re.fullmatch(r"refine_desk_\d{8}_\d{6}", name)
