"""
Event Generation

Per-pixel contrast-threshold detection on blurred log-radiance traces.

A pixel fires an event of polarity p when its blurred log-radiance moves by
p·C_p from the reference level latched at the last reset:

    logL_blur(t) - logL_sf(t_ref) = p·C_p

After an event the pixel is blind for the refractory period τ. At
t_ref = t_event + τ the differencing amplifier resets: the reference becomes
the current logL_sf and the comparison signal restarts from it,

    logL_blur(t) = logL_diff(t) + (logL_sf - logL_diff)(t_ref)·e^(-ω_c,diff·(t - t_ref))

Resets are modelled with this latch instead of rewriting the filter state;
the two give the same logL_blur because the differencing stage is linear.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidArgumentError
from src.filter_engine import FilterState, apply_reset

logger = logging.getLogger(__name__)

THRESHOLD_FLOOR_FRACTION = 0.01

# Packed little-endian record layout shared by EventStream and the binary writer
EVENT_DTYPE = np.dtype([
    ('t', '<f8'),
    ('x', '<u2'),
    ('y', '<u2'),
    ('p', 'i1'),
    ('t_prev', '<f8'),
])

Pixel = Tuple[int, int]


@dataclass(frozen=True)
class EventCameraConfig:
    """Contrast thresholds, their pixel-to-pixel spread, refractory period and seed."""
    c_pos: float = 0.25
    c_neg: float = 0.25
    sigma_c: float = 0.0
    tau: float = 0.0      # refractory period, seconds
    seed: int = 0

    def __post_init__(self):
        if not (self.c_pos > 0 and self.c_neg > 0):
            raise InvalidArgumentError("contrast thresholds must be > 0")
        if not (math.isfinite(self.c_pos) and math.isfinite(self.c_neg)):
            raise InvalidArgumentError("contrast thresholds must be finite")
        if not self.sigma_c >= 0:
            raise InvalidArgumentError(f"sigma_c must be >= 0, got {self.sigma_c}")
        if not self.tau >= 0:
            raise InvalidArgumentError(f"refractory period must be >= 0, got {self.tau}")

    @classmethod
    def from_dict(cls, data: Dict) -> "EventCameraConfig":
        # Section keys are matched case-insensitively (C_pos == c_pos)
        lowered = {str(k).lower(): v for k, v in data.items()}
        known = {'c_pos', 'c_neg', 'sigma_c', 'tau', 'seed'}
        unknown = set(lowered) - known
        if unknown:
            raise InvalidArgumentError(f"unknown camera parameters: {sorted(unknown)}")
        kwargs = {k: float(v) for k, v in lowered.items() if k != 'seed'}
        if 'seed' in lowered:
            kwargs['seed'] = int(lowered['seed'])
        return cls(**kwargs)

    def to_dict(self) -> Dict:
        return {
            'c_pos': self.c_pos,
            'c_neg': self.c_neg,
            'sigma_c': self.sigma_c,
            'tau': self.tau,
            'seed': self.seed,
        }


@dataclass(frozen=True)
class Event:
    x: int
    y: int
    p: int
    t_prev: float
    t_curr: float


@dataclass(frozen=True)
class PixelTrace:
    """Filter outputs of one pixel on its sample timeline."""
    times: np.ndarray
    log_sf: np.ndarray
    log_diff: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        sf = np.asarray(self.log_sf, dtype=float).ravel()
        diff = np.asarray(self.log_diff, dtype=float).ravel()
        if not (times.size == sf.size == diff.size):
            raise InvalidArgumentError("trace arrays must have equal length")
        if times.size == 0:
            raise InvalidArgumentError("trace is empty")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("trace timestamps must be strictly increasing")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'log_sf', sf)
        object.__setattr__(self, 'log_diff', diff)

    @classmethod
    def ideal(cls, times, u) -> "PixelTrace":
        """Infinite bandwidth: both filter outputs equal the input."""
        u = np.asarray(u, dtype=float)
        return cls(times=times, log_sf=u, log_diff=u)

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class PixelEventState:
    """
    Detection state of one pixel.

    ref_level is logL_sf(t_ref); delta_ref is (logL_sf - logL_diff)(t_ref).
    refractory_until >= t_ref - tau always holds; outside a refractory window
    refractory_until == t_ref.
    """
    pixel: Pixel
    filter: FilterState
    ref_level: float
    delta_ref: float
    t_ref: float
    refractory_until: float
    last_event_t: float
    c_neg: float
    c_pos: float

    @property
    def t(self) -> float:
        return self.filter.t

    @classmethod
    def start(cls, pixel: Pixel, filter_state: FilterState,
              thresholds: Tuple[float, float]) -> "PixelEventState":
        """Initial reset at the filter's current time."""
        t0 = filter_state.t
        return cls(
            pixel=pixel,
            filter=filter_state,
            ref_level=filter_state.log_sf,
            delta_ref=filter_state.log_sf - filter_state.log_diff,
            t_ref=t0,
            refractory_until=t0,
            last_event_t=t0,
            c_neg=thresholds[0],
            c_pos=thresholds[1],
        )


@dataclass(eq=False)
class EventStream:
    """Globally ordered events with a small header."""
    width: int
    height: int
    duration: float
    events: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=EVENT_DTYPE))
    fingerprint: str = ""
    t_start: float = 0.0

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=EVENT_DTYPE)
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("stream resolution must be positive")
        if self.events.size:
            if np.any(self.events['x'] >= self.width) or np.any(self.events['y'] >= self.height):
                raise InvalidArgumentError("event coordinates outside the stream resolution")

    def __len__(self) -> int:
        return int(self.events.size)

    def to_events(self) -> List[Event]:
        return [Event(int(e['x']), int(e['y']), int(e['p']), float(e['t_prev']), float(e['t']))
                for e in self.events]

    def header(self) -> Dict:
        return {
            'width': self.width,
            'height': self.height,
            'duration': self.duration,
            't_start': self.t_start,
            'fingerprint': self.fingerprint,
        }


# ==================== Thresholds ====================

def pixel_rng(seed: int, pixel: Pixel) -> np.random.Generator:
    """Independent generator per pixel; depends only on (seed, pixel)."""
    x, y = pixel
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(x), int(y)))
    return np.random.Generator(np.random.SFC64(seq))


def sample_pixel_thresholds(cfg: EventCameraConfig, pixel: Pixel,
                            rng: Optional[np.random.Generator] = None) -> Tuple[float, float]:
    """
    Per-pixel (C_neg, C_pos) drawn from N(C_p, sigma_c²), clipped at 0.01·C_p.

    Without an explicit generator the draw comes from pixel_rng(cfg.seed, pixel).
    """
    if cfg.sigma_c == 0:
        return cfg.c_neg, cfg.c_pos

    if rng is None:
        rng = pixel_rng(cfg.seed, pixel)

    nominal = np.array([cfg.c_neg, cfg.c_pos])
    drawn = rng.normal(nominal, cfg.sigma_c)
    drawn = np.maximum(drawn, THRESHOLD_FLOOR_FRACTION * nominal)
    return float(drawn[0]), float(drawn[1])


# ==================== Detection ====================

def _lerp(t: float, t0: float, t1: float, v0: float, v1: float) -> float:
    if t >= t1:
        return v1
    return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def detect_events(trace: PixelTrace, state: PixelEventState,
                  cfg: EventCameraConfig,
                  omega_c_diff: float = math.inf) -> Tuple[List[Event], PixelEventState]:
    """
    Detect threshold crossings along one pixel's trace.

    logL_blur is linear between samples; crossing times are interpolated.
    Crossings inside a refractory window are dropped. omega_c_diff controls
    how fast the post-reset comparison signal settles onto logL_diff; the
    default (infinite) makes logL_blur = logL_diff right after a reset.

    Args:
        trace: samples starting at the state's current time
        state: detection state carried from the previous call
        cfg: thresholds and refractory period

    Returns:
        (events in time order, updated state)

    Raises:
        InvalidArgumentError: trace does not start at the state's time
    """
    times, sf, diff = trace.times, trace.log_sf, trace.log_diff
    if abs(times[0] - state.t) > 1e-12 * max(1.0, abs(state.t)):
        raise InvalidArgumentError(
            f"trace starts at {times[0]}, state is at {state.t}")

    x, y = state.pixel
    c_neg, c_pos = state.c_neg, state.c_pos
    tau = cfg.tau

    ref = state.ref_level
    delta = state.delta_ref
    t_ref = state.t_ref
    refractory_until = state.refractory_until
    last_event_t = state.last_event_t

    def blur(t: float, diff_t: float) -> float:
        if delta == 0.0:
            return diff_t
        if math.isinf(omega_c_diff):
            return diff_t if t > t_ref else diff_t + delta
        return apply_reset(diff_t, delta, omega_c_diff, t - t_ref)

    events: List[Event] = []

    for i in range(len(trace) - 1):
        t0, t1 = times[i], times[i + 1]
        cursor = t0
        b_start: Optional[float] = None  # blur at cursor when it differs from blur(t0)

        while True:
            if refractory_until > cursor:
                if refractory_until > t1:
                    break
                # Reset of the differencing amplifier
                t_ref = refractory_until
                sf_r = _lerp(t_ref, t0, t1, sf[i], sf[i + 1])
                diff_r = _lerp(t_ref, t0, t1, diff[i], diff[i + 1])
                ref = sf_r
                delta = sf_r - diff_r
                cursor = t_ref
                b_start = ref

            if cursor >= t1:
                break

            b0 = b_start if b_start is not None else blur(t0, diff[i])
            b1 = blur(t1, diff[i + 1])

            up = ref + c_pos
            down = ref - c_neg
            if b1 >= up:
                polarity, target = 1, up
            elif b1 <= down:
                polarity, target = -1, down
            else:
                break

            if b1 == b0:
                frac = 0.0
            else:
                frac = min(max((target - b0) / (b1 - b0), 0.0), 1.0)
            t_event = cursor + frac * (t1 - cursor)

            events.append(Event(x=x, y=y, p=polarity, t_prev=last_event_t, t_curr=t_event))
            last_event_t = t_event
            refractory_until = t_event + tau

            if tau == 0.0:
                # Immediate reset at the event; refractory_until == cursor triggers it
                t_ref = t_event
                sf_r = _lerp(t_event, t0, t1, sf[i], sf[i + 1])
                diff_r = _lerp(t_event, t0, t1, diff[i], diff[i + 1])
                ref = sf_r
                delta = sf_r - diff_r
                cursor = t_event
                b_start = ref
                if cursor >= t1:
                    break
            else:
                cursor = t_event

    new_state = replace(
        state,
        ref_level=ref,
        delta_ref=delta,
        t_ref=t_ref,
        refractory_until=refractory_until,
        last_event_t=last_event_t,
    )

    if events:
        logger.debug("pixel (%d, %d): %d events", x, y, len(events))

    return events, new_state


# ==================== Merging ====================

def events_to_array(events: Iterable[Event]) -> np.ndarray:
    events = list(events)
    arr = np.zeros(len(events), dtype=EVENT_DTYPE)
    if events:
        arr['t'] = [e.t_curr for e in events]
        arr['x'] = [e.x for e in events]
        arr['y'] = [e.y for e in events]
        arr['p'] = [e.p for e in events]
        arr['t_prev'] = [e.t_prev for e in events]
    return arr


def sort_events(arr: np.ndarray) -> np.ndarray:
    """Order by (t, y, x, p)."""
    order = np.lexsort((arr['p'], arr['x'], arr['y'], arr['t']))
    return arr[order]


def merge_streams(per_pixel: Sequence[Sequence[Event]], width: int, height: int,
                  duration: float, fingerprint: str = "",
                  t_start: float = 0.0) -> EventStream:
    """
    Merge per-pixel event lists into one stream ordered by (t, y, x, p).

    The result does not depend on the order of the input lists.
    """
    chunks = [events_to_array(evts) for evts in per_pixel if len(evts)]
    if chunks:
        merged = sort_events(np.concatenate(chunks))
    else:
        merged = np.zeros(0, dtype=EVENT_DTYPE)

    return EventStream(width=width, height=height, duration=duration,
                       events=merged, fingerprint=fingerprint, t_start=t_start)
