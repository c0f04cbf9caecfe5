"""
Configuration Files

A YAML file with one section per component:

    pixel:       PixelBandwidthParams fields
    camera:      c_pos, c_neg, sigma_c, tau, seed
    radiometry:  illuminance_scale, epsilon
    sim:         SimulationOptions fields
    correction:  a, b, c   (optional, written by the correct command)

Missing sections or keys fall back to defaults; unknown ones are rejected.
See config/config.example.yaml.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from src.errors import ConfigError, InvalidArgumentError
from src.event_core import EventCameraConfig
from src.pixel_model import PixelBandwidthParams
from src.recon_tools import CorrectionParams
from src.simulator import RadiometryConfig, SimulationOptions

logger = logging.getLogger(__name__)

SECTIONS = ('pixel', 'camera', 'radiometry', 'sim', 'correction')
EXECUTION_KEYS = ('workers', 'shard_size')


@dataclass(frozen=True)
class SimulationConfig:
    pixel: PixelBandwidthParams = field(default_factory=PixelBandwidthParams.default)
    camera: EventCameraConfig = field(default_factory=EventCameraConfig)
    radiometry: RadiometryConfig = field(default_factory=RadiometryConfig)
    sim: SimulationOptions = field(default_factory=SimulationOptions)
    correction: Optional[CorrectionParams] = None


def config_from_dict(data: Optional[Dict[str, Any]]) -> SimulationConfig:
    """
    Build a SimulationConfig from parsed YAML.

    Raises:
        ConfigError: unknown sections/keys or invalid values
    """
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of sections")

    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    def section(name: str) -> Dict[str, Any]:
        value = data.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        return value

    try:
        return SimulationConfig(
            pixel=PixelBandwidthParams.from_dict(section('pixel')),
            camera=EventCameraConfig.from_dict(section('camera')),
            radiometry=RadiometryConfig.from_dict(section('radiometry')),
            sim=SimulationOptions.from_dict(section('sim')),
            correction=(CorrectionParams.from_dict(data['correction'])
                        if data.get('correction') else None),
        )
    except (InvalidArgumentError, TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def config_to_dict(cfg: SimulationConfig) -> Dict[str, Any]:
    data = {
        'pixel': cfg.pixel.to_dict(),
        'camera': cfg.camera.to_dict(),
        'radiometry': cfg.radiometry.to_dict(),
        'sim': cfg.sim.to_dict(),
    }
    if cfg.correction is not None:
        data['correction'] = cfg.correction.to_dict()
    return data


def load_config(path: Union[str, Path]) -> SimulationConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e

    cfg = config_from_dict(data)
    logger.info("Loaded config %s (fingerprint %s)", path, fingerprint(cfg))
    return cfg


def save_config(cfg: SimulationConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, 'w') as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)
    return path


def fingerprint(cfg: SimulationConfig) -> str:
    """
    First 16 hex digits of SHA-256 over the canonical JSON form.

    Execution settings (workers, shard_size) do not change the output and
    are left out.
    """
    data = config_to_dict(cfg)
    for key in EXECUTION_KEYS:
        data['sim'].pop(key, None)
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]
