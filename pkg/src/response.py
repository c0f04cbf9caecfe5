"""
Filter response analysis: time-domain responses to simple log-radiance
signals, bandwidth sweeps over radiance, and Bode tables.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from src.errors import InvalidArgumentError
from src.filter_engine import FilterState, InputSequence, discretize, step
from src.pixel_model import (
    PixelBandwidthParams,
    bandwidth_hz,
    dominant_bandwidth_hz,
    frequency_response,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Signal:
    """A log-radiance signal u(t) with its defining parameters."""
    kind: str
    params: Dict[str, float]

    def __call__(self, t):
        p = self.params
        t = np.asarray(t, dtype=float)
        if self.kind == 'step':
            return np.where(t > p['t0'], p['u1'], p['u0'])
        if self.kind == 'ramp':
            return p['u0'] + p['rate'] * np.maximum(t - p['t0'], 0.0)
        if self.kind == 'sine':
            return p['u0'] + p['amplitude'] * np.sin(2 * math.pi * p['freq'] * t)
        raise InvalidArgumentError(f"unknown signal kind '{self.kind}'")

    @property
    def duration(self) -> float:
        return self.params['duration']


_SIGNAL_DEFAULTS = {
    'step': {'u0': 0.0, 'u1': 1.0, 't0': 0.0, 'duration': 0.1},
    'ramp': {'u0': 0.0, 'rate': 10.0, 't0': 0.0, 'duration': 0.1},
    'sine': {'u0': 0.0, 'amplitude': 0.5, 'freq': 100.0, 'duration': 0.1},
}


def parse_signal_spec(spec: str) -> Signal:
    """
    Parse "kind:key=value,..." into a Signal.

    Examples:
        step:u0=3,u1=5,duration=0.05
        ramp:u0=4,rate=20
        sine:u0=6,amplitude=0.5,freq=200
    """
    kind, _, rest = spec.partition(':')
    if kind not in _SIGNAL_DEFAULTS:
        raise InvalidArgumentError(
            f"unknown signal kind '{kind}' (use {', '.join(_SIGNAL_DEFAULTS)})")

    params = dict(_SIGNAL_DEFAULTS[kind])
    for item in filter(None, (part.strip() for part in rest.split(','))):
        key, sep, value = item.partition('=')
        if not sep or key not in params:
            raise InvalidArgumentError(f"bad {kind} option '{item}'")
        try:
            params[key] = float(value)
        except ValueError:
            raise InvalidArgumentError(f"{key}={value} is not a number")

    if not params['duration'] > 0:
        raise InvalidArgumentError("duration must be > 0")
    return Signal(kind, params)


def signal_response(params: PixelBandwidthParams, signal: Callable,
                    times: Sequence[float]) -> np.ndarray:
    """
    Filter trace for u = signal(t) sampled at the given times.

    Starts at the steady state of the first sample.

    Returns:
        array (n, 5): t, u, logL_p, logL_sf, logL_diff
    """
    times = np.asarray(times, dtype=float)
    u = np.asarray(signal(times), dtype=float)
    inputs = InputSequence(times, u)

    rows = np.empty((len(inputs), 5))
    state = FilterState.steady(float(u[0]), float(times[0]))
    rows[0] = (times[0], u[0], state.x[1], state.x[2], state.x[3])

    for k in range(len(inputs) - 1):
        d = discretize(params, float(u[k + 1]), float(times[k + 1] - times[k]))
        state = step(state, float(u[k]), float(u[k + 1]), d)
        rows[k + 1] = (times[k + 1], u[k + 1], state.x[1], state.x[2], state.x[3])

    return rows


def step_response(params: PixelBandwidthParams, u0: float, u1: float,
                  duration: float, n: int = 1000) -> np.ndarray:
    """Response to a step from u0 to u1 at t = 0, sampled at n+1 points on [0, duration]."""
    if n < 1 or not duration > 0:
        raise InvalidArgumentError("need n >= 1 and duration > 0")
    signal = Signal('step', {'u0': u0, 'u1': u1, 't0': 0.0, 'duration': duration})
    return signal_response(params, signal, np.linspace(0.0, duration, n + 1))


def bandwidth_sweep(params: PixelBandwidthParams, radiances: Sequence[float]) -> np.ndarray:
    """
    Rows of (L, bandwidth_hz, dominant-pole bandwidth in Hz).
    """
    rows = []
    for L in radiances:
        rows.append((float(L), bandwidth_hz(params, float(L)), dominant_bandwidth_hz(params, float(L))))
    logger.debug("Bandwidth sweep over %d radiance values", len(rows))
    return np.array(rows)


def bode_table(params: PixelBandwidthParams, radiance: float,
               freqs_hz: Sequence[float]) -> np.ndarray:
    """Rows of (f, |H| in dB, phase in degrees) for the logL_diff output."""
    f = np.asarray(freqs_hz, dtype=float)
    h = frequency_response(params, radiance, f)
    return np.column_stack([f, 20 * np.log10(np.abs(h)), np.degrees(np.unwrap(np.angle(h)))])


def format_table(header: List[str], rows: np.ndarray, precision: int = 6) -> str:
    """CSV text with a header line."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.{precision}g}" for v in row))
    return "\n".join(lines) + "\n"


def _options(text: str) -> Dict[str, float]:
    options = {}
    for item in filter(None, (part.strip() for part in text.split(','))):
        key, sep, value = item.partition('=')
        if not sep:
            raise InvalidArgumentError(f"expected key=value, got '{item}'")
        try:
            options[key.strip()] = float(value)
        except ValueError:
            raise InvalidArgumentError(f"{key}={value} is not a number")
    return options


def run_response_spec(params: PixelBandwidthParams, spec: str, n: int = 2000):
    """
    Evaluate a response request from the command line.

    Forms:
        step:... / ramp:... / sine:...   time response (see parse_signal_spec)
        sweep:lo=1,hi=1e6,n=61           bandwidth over log-spaced radiance
        bode:L=1000,lo=1,hi=1e6,n=200    magnitude/phase at one radiance

    Returns:
        (header, rows)
    """
    kind, _, rest = spec.partition(':')

    if kind == 'sweep':
        opts = {'lo': 1.0, 'hi': 1e6, 'n': 61}
        opts.update(_options(rest))
        radiances = np.logspace(math.log10(opts['lo']), math.log10(opts['hi']), int(opts['n']))
        return ['L', 'bandwidth_hz', 'dominant_pole_hz'], bandwidth_sweep(params, radiances)

    if kind == 'bode':
        opts = {'L': 1000.0, 'lo': 1.0, 'hi': 1e6, 'n': 200}
        opts.update(_options(rest))
        freqs = np.logspace(math.log10(opts['lo']), math.log10(opts['hi']), int(opts['n']))
        return ['f_hz', 'magnitude_db', 'phase_deg'], bode_table(params, opts['L'], freqs)

    signal = parse_signal_spec(spec)
    times = np.linspace(0.0, signal.duration, n + 1)
    return ['t', 'u', 'log_p', 'log_sf', 'log_diff'], signal_response(params, signal, times)
