"""
Radiance sources for the simulator.

A scene reports, for one pixel, the log of its incident signal radiance
log(max(illuminance_scale · I(t), ε)) where I is normalized intensity.
Two kinds are provided:

- MovingBarScene: an analytic bar sweeping horizontally across the frame
- FrameStackScene: ordered linear-radiance images with timestamps,
  interpolated linearly in the log domain and clamped outside its time range
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from src.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

DISPLAY_GAMMA = 2.2

Pixel = Tuple[int, int]


def _check_pixel(pixel: Pixel, width: int, height: int) -> Tuple[int, int]:
    x, y = pixel
    if not (0 <= x < width and 0 <= y < height):
        raise InvalidArgumentError(f"pixel {pixel} outside {width}x{height} frame")
    return int(x), int(y)


def _log_signal(intensity, illuminance_scale: float, epsilon: float):
    return np.log(np.maximum(illuminance_scale * np.asarray(intensity, dtype=float), epsilon))


@dataclass(frozen=True)
class MovingBarScene:
    """
    Full-height bar of constant intensity moving horizontally.

    The bar covers [x0 + v·t, x0 + v·t + bar_width] in pixel units; a pixel
    covers [x, x + 1] and sees the area-weighted mix of foreground and
    background.
    """
    width: int = 64
    height: int = 64
    bar_width: float = 8.0
    speed: float = 500.0       # px/s, positive moves right
    foreground: float = 1.0    # normalized intensity
    background: float = 0.02
    duration: float = 0.1
    x0: float = 0.0            # left edge at t = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("scene resolution must be positive")
        if not self.bar_width > 0:
            raise InvalidArgumentError("bar_width must be > 0")
        if self.speed == 0 or not math.isfinite(self.speed):
            raise InvalidArgumentError("speed must be finite and nonzero")
        if self.foreground < 0 or self.background < 0:
            raise InvalidArgumentError("intensities must be >= 0")
        if not self.duration > 0:
            raise InvalidArgumentError("duration must be > 0")

    @property
    def t_start(self) -> float:
        return 0.0

    def knots(self) -> np.ndarray:
        return np.array([0.0, self.duration])

    def default_max_dt(self) -> float:
        """Quarter-pixel transit time."""
        return 0.25 / abs(self.speed)

    def left_edge(self, t):
        return self.x0 + self.speed * np.asarray(t, dtype=float)

    def right_edge(self, t):
        return self.left_edge(t) + self.bar_width

    def leading_edge(self, t):
        """Edge where pixels brighten."""
        return self.right_edge(t) if self.speed > 0 else self.left_edge(t)

    def trailing_edge(self, t):
        """Edge where pixels darken."""
        return self.left_edge(t) if self.speed > 0 else self.right_edge(t)

    def intensity(self, pixel: Pixel, t):
        x, _ = _check_pixel(pixel, self.width, self.height)
        left = self.left_edge(t)
        right = left + self.bar_width
        coverage = np.clip(np.minimum(x + 1.0, right) - np.maximum(float(x), left), 0.0, 1.0)
        return self.background + (self.foreground - self.background) * coverage

    def log_signal(self, pixel: Pixel, t, illuminance_scale: float, epsilon: float):
        return _log_signal(self.intensity(pixel, t), illuminance_scale, epsilon)


@dataclass(frozen=True, eq=False)
class FrameStackScene:
    """
    Linear-radiance frames of shape (N, H, W) at strictly increasing times.

    With inverse_gamma the frames are treated as display-encoded and raised
    to the power 2.2 first.
    """
    frames: np.ndarray
    times: np.ndarray
    inverse_gamma: bool = False

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        times = np.asarray(self.times, dtype=float).ravel()
        if frames.ndim != 3 or frames.shape[0] == 0:
            raise InvalidArgumentError(
                f"frames must have shape (N, H, W) with N >= 1, got {frames.shape}")
        if frames.shape[1] == 0 or frames.shape[2] == 0:
            raise InvalidArgumentError("frames are empty")
        if times.size != frames.shape[0]:
            raise InvalidArgumentError(
                f"{frames.shape[0]} frames but {times.size} timestamps")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("frame timestamps must be strictly increasing")
        if not np.all(np.isfinite(frames)) or np.any(frames < 0):
            raise InvalidArgumentError("frame values must be finite and >= 0")
        if self.inverse_gamma:
            frames = frames ** DISPLAY_GAMMA
        object.__setattr__(self, 'frames', frames)
        object.__setattr__(self, 'times', times)

    @classmethod
    def from_npz(cls, path: Union[str, Path], inverse_gamma: bool = False) -> "FrameStackScene":
        """Load arrays 'frames' (N, H, W) and 'times' (N,) from an .npz file."""
        with np.load(path) as data:
            if 'frames' not in data or 'times' not in data:
                raise InvalidArgumentError(f"{path}: expected arrays 'frames' and 'times'")
            return cls(frames=data['frames'], times=data['times'], inverse_gamma=inverse_gamma)

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def knots(self) -> np.ndarray:
        return self.times

    def default_max_dt(self) -> float:
        if self.times.size < 2:
            return math.inf
        return float(np.min(np.diff(self.times)))

    def log_signal(self, pixel: Pixel, t, illuminance_scale: float, epsilon: float):
        x, y = _check_pixel(pixel, self.width, self.height)
        logs = _log_signal(self.frames[:, y, x], illuminance_scale, epsilon)
        result = np.interp(np.asarray(t, dtype=float), self.times, logs)
        return float(result) if result.ndim == 0 else result


SceneSource = Union[MovingBarScene, FrameStackScene]

_BAR_KEYS = {
    'width': 'bar_width',
    'speed': 'speed',
    'fg': 'foreground',
    'bg': 'background',
    'duration': 'duration',
    'x0': 'x0',
}


def _parse_options(text: str) -> Dict[str, str]:
    options = {}
    for item in filter(None, (part.strip() for part in text.split(','))):
        if '=' not in item:
            raise InvalidArgumentError(f"expected key=value, got '{item}'")
        key, value = item.split('=', 1)
        options[key.strip()] = value.strip()
    return options


def parse_scene_spec(spec: str) -> SceneSource:
    """
    Build a scene from a command-line spec.

    Forms:
        bar:width=8,speed=500,fg=1,bg=0.02,duration=0.1,size=64x64,x0=0
        frames:path=clip.npz,inverse_gamma=1
        clip.npz
    """
    if spec.endswith('.npz') and ':' not in spec:
        return FrameStackScene.from_npz(spec)

    kind, _, rest = spec.partition(':')
    options = _parse_options(rest)

    if kind == 'bar':
        kwargs = {}
        size = options.pop('size', None)
        if size is not None:
            try:
                w, h = size.lower().split('x')
                kwargs['width'], kwargs['height'] = int(w), int(h)
            except ValueError:
                raise InvalidArgumentError(f"size must look like 64x64, got '{size}'")
        for key, value in options.items():
            if key not in _BAR_KEYS:
                raise InvalidArgumentError(f"unknown bar option '{key}'")
            try:
                kwargs[_BAR_KEYS[key]] = float(value)
            except ValueError:
                raise InvalidArgumentError(f"bar option {key}={value} is not a number")
        return MovingBarScene(**kwargs)

    if kind == 'frames':
        if 'path' not in options:
            raise InvalidArgumentError("frames scene needs path=<file.npz>")
        gamma = options.get('inverse_gamma', '0').lower() in ('1', 'true', 'yes')
        return FrameStackScene.from_npz(options['path'], inverse_gamma=gamma)

    raise InvalidArgumentError(f"unknown scene kind '{kind}'")
