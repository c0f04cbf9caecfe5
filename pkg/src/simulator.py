"""
Event Simulation Engine

Drives every pixel of a scene through the discrete pixel filter and the
event detector, then merges the per-pixel events into one stream.

Per pixel:
1. Build the sample timeline. The scene's knots (frame times, or start/end
   for analytic scenes) are split into segments no longer than max_dt, and
   each segment is subdivided by a power of two so that
   dt <= 1 / (samples_per_time_constant · ω_dom(u)) at its endpoints,
   bounded below by min_dt.
2. Start from the steady state of the first input.
3. Step the filter along the timeline, recording logL_sf and logL_diff.
   Intervals with a constant input while the filter sits at its steady
   state are skipped; the state cannot move there.
4. Detect events on the trace.

Pixels are independent and processed in shards, optionally across worker
processes. Output is identical for any worker count and shard size.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidArgumentError
from src.event_core import (
    Event,
    EventCameraConfig,
    EventStream,
    PixelEventState,
    PixelTrace,
    detect_events,
    merge_streams,
    sample_pixel_thresholds,
)
from src.event_io import read_events, write_events  # noqa: F401  re-exported
from src.filter_engine import FilterState, discretize
from src.pixel_model import RADIANCE_FLOOR, PixelBandwidthParams, dominant_cutoff
from src.scenes import SceneSource

logger = logging.getLogger(__name__)

Pixel = Tuple[int, int]


@dataclass(frozen=True)
class RadiometryConfig:
    """Maps normalized scene intensity to signal radiance L_sig."""
    illuminance_scale: float = 1.0
    epsilon: float = RADIANCE_FLOOR

    def __post_init__(self):
        if not (self.illuminance_scale > 0 and math.isfinite(self.illuminance_scale)):
            raise InvalidArgumentError("illuminance_scale must be finite and > 0")
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be > 0")

    @classmethod
    def from_dict(cls, data: Dict) -> "RadiometryConfig":
        unknown = set(data) - {'illuminance_scale', 'epsilon'}
        if unknown:
            raise InvalidArgumentError(f"unknown radiometry parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict:
        return {'illuminance_scale': self.illuminance_scale, 'epsilon': self.epsilon}


@dataclass(frozen=True)
class SimulationOptions:
    """
    Sampling and execution settings.

    max_dt defaults to the scene's own choice (frame interval, or a quarter
    pixel transit for the moving bar). fixed_dt switches off adaptive
    sampling. linearization_step > 0 rounds the operating point u used to
    build the discrete matrices so the discretize cache hits more often; the
    default 0 linearizes at the exact next input. The input itself is never
    rounded.
    """
    samples_per_time_constant: float = 10.0
    max_dt: Optional[float] = None
    min_dt: float = 1e-7
    fixed_dt: Optional[float] = None
    infinite_bandwidth: bool = False
    linearization_step: float = 0.0
    workers: int = 1
    shard_size: int = 256

    def __post_init__(self):
        if not self.samples_per_time_constant > 0:
            raise InvalidArgumentError("samples_per_time_constant must be > 0")
        if self.max_dt is not None and not self.max_dt > 0:
            raise InvalidArgumentError("max_dt must be > 0")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise InvalidArgumentError("fixed_dt must be > 0")
        if not self.min_dt > 0:
            raise InvalidArgumentError("min_dt must be > 0")
        if self.linearization_step < 0:
            raise InvalidArgumentError("linearization_step must be >= 0")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")
        if self.shard_size < 1:
            raise InvalidArgumentError("shard_size must be >= 1")

    @classmethod
    def from_dict(cls, data: Dict) -> "SimulationOptions":
        known = {
            'samples_per_time_constant': float,
            'max_dt': float,
            'min_dt': float,
            'fixed_dt': float,
            'infinite_bandwidth': bool,
            'linearization_step': float,
            'workers': int,
            'shard_size': int,
        }
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidArgumentError(f"unknown sim options: {sorted(unknown)}")
        return cls(**{k: (None if v is None else known[k](v)) for k, v in data.items()})

    def to_dict(self) -> Dict:
        return {
            'samples_per_time_constant': self.samples_per_time_constant,
            'max_dt': self.max_dt,
            'min_dt': self.min_dt,
            'fixed_dt': self.fixed_dt,
            'infinite_bandwidth': self.infinite_bandwidth,
            'linearization_step': self.linearization_step,
            'workers': self.workers,
            'shard_size': self.shard_size,
        }


# ==================== Inputs ====================

def interpolate_log_radiance(source: SceneSource, radiometry: RadiometryConfig,
                             pixel: Pixel, t, black_level: float):
    """
    Effective log-radiance u = log(L_sig + L_dark) at time(s) t.

    L_sig is floored at ε and interpolated linearly in the log domain between
    frames; times outside the source are clamped to its first/last frame.

    Raises:
        InvalidArgumentError: pixel out of bounds
    """
    log_sig = source.log_signal(pixel, t, radiometry.illuminance_scale, radiometry.epsilon)
    if black_level == 0.0:
        return log_sig
    u = np.logaddexp(log_sig, math.log(black_level))
    return float(u) if np.ndim(u) == 0 else u


def initial_state(u0: float, t0: float = 0.0) -> FilterState:
    """Steady state (0, u0, u0, u0) of a constant input."""
    if not math.isfinite(u0):
        raise InvalidArgumentError(f"initial input must be finite, got {u0}")
    return FilterState.steady(u0, t0)


def _base_knots(source: SceneSource, opts: SimulationOptions) -> np.ndarray:
    """Scene knots split into equal segments no longer than max_dt."""
    knots = np.asarray(source.knots(), dtype=float)
    if opts.fixed_dt is not None:
        max_dt = opts.fixed_dt
    else:
        max_dt = opts.max_dt if opts.max_dt is not None else source.default_max_dt()

    pieces = [knots[:1]]
    for a, b in zip(knots[:-1], knots[1:]):
        n = max(1, int(math.ceil((b - a) / max_dt - 1e-9)))
        pieces.append(a + (b - a) * np.arange(1, n + 1) / n)
        pieces[-1][-1] = b
    return np.concatenate(pieces)


def sample_timeline(source: SceneSource, radiometry: RadiometryConfig,
                    params: PixelBandwidthParams, pixel: Pixel,
                    opts: SimulationOptions,
                    base: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-pixel sample times, step lengths and inputs.

    Returns:
        (times (n,), dts (n-1,), u (n,))
    """
    if base is None:
        base = _base_knots(source, opts)

    def u_at(t):
        return interpolate_log_radiance(source, radiometry, pixel, t, params.black_level)

    seg_len = np.diff(base)
    if opts.fixed_dt is not None or opts.infinite_bandwidth:
        levels = np.zeros(seg_len.size, dtype=int)
    else:
        u_base = u_at(base)
        omega = np.maximum(dominant_cutoff(params, u_base[:-1]), dominant_cutoff(params, u_base[1:]))
        wanted = seg_len * opts.samples_per_time_constant * omega
        levels = np.ceil(np.log2(np.maximum(wanted, 1.0))).astype(int)
        cap = np.floor(np.log2(np.maximum(seg_len / opts.min_dt, 1.0))).astype(int)
        levels = np.clip(levels, 0, cap)

    times = [base[:1]]
    dts = []
    for a, length, m in zip(base[:-1], seg_len, levels):
        count = 1 << int(m)
        dt = length / count
        sub = a + dt * np.arange(1, count + 1)
        sub[-1] = a + length
        times.append(sub)
        dts.append(np.full(count, dt))

    times = np.concatenate(times)
    dts = np.concatenate(dts) if dts else np.zeros(0)
    return times, dts, np.asarray(u_at(times), dtype=float)


def filter_trace(params: PixelBandwidthParams, times: np.ndarray, dts: np.ndarray,
                 u: np.ndarray, linearization_step: float = 0.0) -> PixelTrace:
    """Run the discrete filter from steady state and record its outputs."""
    n = u.size
    sf = np.empty(n)
    diff = np.empty(n)
    sf[0] = diff[0] = u[0]

    x = initial_state(float(u[0]), float(times[0])).x.copy()
    at_rest = True

    for k in range(n - 1):
        uk, uk1 = u[k], u[k + 1]
        if at_rest and uk1 == uk:
            sf[k + 1] = diff[k + 1] = uk
            continue
        at_rest = False

        u_lin = uk1
        if linearization_step > 0:
            u_lin = round(uk1 / linearization_step) * linearization_step
        d = discretize(params, float(u_lin), float(dts[k]))
        x = d.A_d @ x + d.B_d[:, 0] * uk + d.B_tilde_d[:, 0] * uk1
        sf[k + 1] = x[2]
        diff[k + 1] = x[3]

    return PixelTrace(times=times, log_sf=sf, log_diff=diff)


# ==================== Per-Pixel Pipeline ====================

@dataclass(frozen=True)
class _ShardTask:
    source: SceneSource
    radiometry: RadiometryConfig
    params: PixelBandwidthParams
    cam: EventCameraConfig
    opts: SimulationOptions
    base: np.ndarray
    pixels: Tuple[Pixel, ...]


def simulate_pixel(source: SceneSource, radiometry: RadiometryConfig,
                   params: PixelBandwidthParams, cam: EventCameraConfig,
                   opts: SimulationOptions, pixel: Pixel,
                   base: Optional[np.ndarray] = None) -> List[Event]:
    """Events of one pixel over the whole source duration."""
    times, dts, u = sample_timeline(source, radiometry, params, pixel, opts, base)

    if opts.infinite_bandwidth:
        trace = PixelTrace.ideal(times, u)
        omega_diff = math.inf
    else:
        trace = filter_trace(params, times, dts, u, opts.linearization_step)
        omega_diff = params.omega_c_diff

    start = initial_state(float(u[0]), float(times[0]))
    state = PixelEventState.start(pixel, start, sample_pixel_thresholds(cam, pixel))
    events, state = detect_events(trace, state, cam, omega_diff)
    return events


def _run_shard(task: _ShardTask) -> List[List[Event]]:
    return [simulate_pixel(task.source, task.radiometry, task.params, task.cam,
                           task.opts, pixel, task.base)
            for pixel in task.pixels]


def _shards(width: int, height: int, shard_size: int) -> List[Tuple[Pixel, ...]]:
    pixels = [(x, y) for y in range(height) for x in range(width)]
    return [tuple(pixels[i:i + shard_size]) for i in range(0, len(pixels), shard_size)]


def simulate(source: SceneSource, radiometry: RadiometryConfig,
             pixel_params: PixelBandwidthParams, cam: EventCameraConfig,
             sim_opts: Optional[SimulationOptions] = None,
             fingerprint: str = "") -> EventStream:
    """
    Simulate the event stream of a scene.

    With sim_opts.infinite_bandwidth the filter is bypassed and logL_blur = u,
    the ideal event camera.

    Raises:
        InvalidArgumentError: the source has no pixels or no time extent
    """
    opts = sim_opts or SimulationOptions()
    if source.width <= 0 or source.height <= 0 or not source.duration > 0:
        raise InvalidArgumentError("source is empty")

    base = _base_knots(source, opts)
    shards = _shards(source.width, source.height, opts.shard_size)
    tasks = [_ShardTask(source, radiometry, pixel_params, cam, opts, base, pixels)
             for pixels in shards]

    logger.info("Simulating %dx%d pixels over %.4gs: %d shards, %d workers%s",
                source.width, source.height, source.duration, len(tasks), opts.workers,
                " (infinite bandwidth)" if opts.infinite_bandwidth else "")

    per_pixel: List[List[Event]] = []
    if opts.workers == 1 or len(tasks) == 1:
        for task in tasks:
            per_pixel.extend(_run_shard(task))
    else:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            for result in pool.map(_run_shard, tasks):
                per_pixel.extend(result)

    stream = merge_streams(per_pixel, source.width, source.height, source.duration,
                           fingerprint=fingerprint, t_start=source.t_start)
    logger.info("Simulation produced %d events", len(stream))
    return stream


# ==================== Analysis Helpers ====================

def event_statistics(stream: EventStream) -> Dict[str, float]:
    """Counts per polarity and the mean event rate."""
    p = stream.events['p']
    positive = int(np.count_nonzero(p > 0))
    negative = int(np.count_nonzero(p < 0))
    total = positive + negative
    return {
        'total': total,
        'positive': positive,
        'negative': negative,
        'rate_hz': total / stream.duration if stream.duration > 0 else 0.0,
    }


def compare_to_ideal(source: SceneSource, radiometry: RadiometryConfig,
                     params: PixelBandwidthParams, cam: EventCameraConfig,
                     opts: Optional[SimulationOptions] = None) -> Dict[str, float]:
    """
    Simulate a source with the pixel filter and with an ideal camera.

    Returns the filtered and ideal event totals and their ratio (nan when
    the ideal camera produces no events).
    """
    opts = opts or SimulationOptions()
    filtered = event_statistics(simulate(source, radiometry, params, cam, opts))
    ideal = event_statistics(simulate(source, radiometry, params, cam,
                                      replace(opts, infinite_bandwidth=True)))
    ratio = filtered['total'] / ideal['total'] if ideal['total'] else math.nan
    return {
        'filtered': filtered['total'],
        'ideal': ideal['total'],
        'ratio': ratio,
    }


def edge_offset_spread(stream: EventStream, edge_position: Callable, polarity: int) -> float:
    """
    Standard deviation of x-offsets between events of one polarity and an edge.

    Each event's offset is its pixel centre minus edge_position(t) at its own
    time. Returns nan when there are fewer than two such events.
    """
    mask = stream.events['p'] == polarity
    if np.count_nonzero(mask) < 2:
        return math.nan
    selected = stream.events[mask]
    offsets = selected['x'] + 0.5 - np.asarray(edge_position(selected['t']), dtype=float)
    return float(np.std(offsets))
