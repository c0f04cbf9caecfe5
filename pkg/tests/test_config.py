"""
Unit tests for YAML configuration files.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from src.config import (
    SimulationConfig,
    config_from_dict,
    config_to_dict,
    fingerprint,
    load_config,
    save_config,
)
from src.errors import ConfigError
from src.recon_tools import CorrectionParams


class TestConfigFromDict:
    """Test section parsing."""

    def test_empty_gives_defaults(self):
        cfg = config_from_dict(None)
        assert cfg == SimulationConfig()
        assert cfg.correction is None

    def test_partial_sections(self):
        cfg = config_from_dict({
            'pixel': {'black_level': 20},
            'camera': {'C_pos': 0.3, 'tau': 1e-3},
            'sim': {'workers': 4},
        })
        assert cfg.pixel.black_level == 20.0
        assert cfg.camera.c_pos == 0.3 and cfg.camera.tau == 1e-3
        assert cfg.sim.workers == 4
        assert cfg.radiometry.illuminance_scale == 1.0

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            config_from_dict({'network': {}})

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            config_from_dict({'pixel': {'gain': 3}})

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            config_from_dict({'camera': {'c_pos': -1}})
        with pytest.raises(ConfigError):
            config_from_dict({'radiometry': {'illuminance_scale': 'bright'}})

    def test_section_must_be_mapping(self):
        with pytest.raises(ConfigError):
            config_from_dict({'sim': [1, 2]})
        with pytest.raises(ConfigError):
            config_from_dict([1, 2])

    def test_correction_section(self):
        cfg = config_from_dict({'correction': {'a': 0.9, 'b': [1.0, 1.1], 'c': [0.0, 0.1]}})
        assert cfg.correction.a == 0.9
        assert np.array_equal(cfg.correction.b, [1.0, 1.1])


class TestFiles:
    """Test YAML round trips."""

    def test_save_and_load(self, tmp_path):
        cfg = config_from_dict({
            'pixel': {'amp_gain': 80},
            'camera': {'sigma_c': 0.02, 'seed': 9},
            'radiometry': {'illuminance_scale': 380},
            'sim': {'max_dt': 1e-4},
        })
        cfg = replace(cfg, correction=CorrectionParams(a=0.8, b=[1.2], c=[0.05]))
        path = save_config(cfg, tmp_path / "cfg.yaml")
        loaded = load_config(path)
        assert config_to_dict(loaded) == config_to_dict(cfg)
        assert fingerprint(loaded) == fingerprint(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("pixel: [unclosed\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_example_config_loads(self):
        cfg = load_config(Path(__file__).parent.parent / "config" / "config.example.yaml")
        assert cfg.pixel.black_level > 0


class TestFingerprint:
    """Test the configuration fingerprint."""

    def test_stable(self):
        assert fingerprint(SimulationConfig()) == fingerprint(SimulationConfig())
        assert len(fingerprint(SimulationConfig())) == 16

    def test_ignores_execution_settings(self):
        base = SimulationConfig()
        parallel = replace(base, sim=replace(base.sim, workers=8, shard_size=17))
        assert fingerprint(parallel) == fingerprint(base)

    def test_changes_with_model(self):
        base = SimulationConfig()
        changed = replace(base, camera=replace(base.camera, c_pos=0.3))
        assert fingerprint(changed) != fingerprint(base)
