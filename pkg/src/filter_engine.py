"""
Discrete-Time Pixel Filter

Turns the continuous model of pixel_model into something we can step on
sampled inputs u[k] = log L[k] taken at (possibly irregular) timestamps t_k.

For each interval (t_k, t_k+1] the filter is linearized at the steady state
of the *next* input u[k+1] and discretized with a first-order hold, i.e. the
input is assumed to vary linearly across the interval:

    exp([[A·δt, B·δt, 0], [0, 0, 1], [0, 0, 0]]) = [[Φ, Γ₁, Γ₂], [0, 1, 1], [0, 0, 1]]

    x[k+1] = A_d x[k] + B_d u[k] + B̃_d u[k+1]
    A_d = Φ,  B_d = Γ₁ - Γ₂,  B̃_d = Γ₂

With a scalar input the block matrix is 6x6.

The output after many steps can also be written as a weighted sum of the
inputs (zero-state response). Normalizing the weights per channel removes
the bias from a finite window, which lets us synthesize blurred
log-radiance at any timestamp from a small importance-sampled set of inputs.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidArgumentError
from src.numerics import mat_exp
from src.pixel_model import (
    OUTPUT_MATRIX,
    PixelBandwidthParams,
    continuous_matrices,
    omega_c_dom_min,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_SIZE = 30
TRUNCATION_PROBABILITY = 0.95
MIN_DT = 1e-9  # seconds

N_STATES = 4


@dataclass(frozen=True)
class FilterState:
    """State x = [d logL_p/dt, logL_p, logL_sf, logL_diff] at time t."""
    x: np.ndarray
    t: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(N_STATES)
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("filter state has non-finite entries")
        object.__setattr__(self, 'x', x)

    @classmethod
    def steady(cls, u: float, t: float = 0.0) -> "FilterState":
        """Equilibrium (0, u, u, u) for a constant input u."""
        return cls(x=np.array([0.0, u, u, u]), t=t)

    @property
    def log_sf(self) -> float:
        return float(self.x[2])

    @property
    def log_diff(self) -> float:
        return float(self.x[3])

    def output(self) -> np.ndarray:
        """y = C x = (logL_sf, logL_diff)."""
        return OUTPUT_MATRIX @ self.x


@dataclass(frozen=True)
class DiscreteStep:
    """Discrete system matrices for one interval of length dt."""
    A_d: np.ndarray         # 4x4
    B_d: np.ndarray         # 4x1
    B_tilde_d: np.ndarray   # 4x1
    dt: float


@dataclass(frozen=True)
class InputSequence:
    """Timestamped log-radiance samples; timestamps strictly increasing."""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        if times.size != values.size:
            raise InvalidArgumentError(
                f"{times.size} timestamps but {values.size} values")
        if times.size == 0:
            raise InvalidArgumentError("input sequence is empty")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise InvalidArgumentError("input sequence has non-finite entries")
        if np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("timestamps must be strictly increasing")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_samples(cls, times: Sequence[float], values: Sequence[float]) -> "InputSequence":
        """
        Build a sequence, merging samples closer than MIN_DT.

        A run of coincident samples keeps the last timestamp and value.
        """
        times = np.asarray(times, dtype=float).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if times.size != values.size:
            raise InvalidArgumentError(
                f"{times.size} timestamps but {values.size} values")

        keep = np.ones(times.size, dtype=bool)
        keep[:-1] = np.diff(times) >= MIN_DT
        return cls(times=times[keep], values=values[keep])

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class WeightSequence:
    """
    Zero-state weights, one column per output channel (logL_sf, logL_diff).

    `weights` are sum-normalized; `raw` are the unnormalized values whose
    channel sums approach 1 as the window grows.
    """
    times: np.ndarray
    weights: np.ndarray  # (N, 2)
    raw: np.ndarray      # (N, 2)

    @property
    def raw_sums(self) -> np.ndarray:
        return self.raw.sum(axis=0)


# ==================== Discretization ====================

@lru_cache(maxsize=1 << 16)
def _discretize(params: PixelBandwidthParams, u_next: float, dt: float) -> DiscreteStep:
    A, B, _ = continuous_matrices(params, u_next)

    n = N_STATES
    block = np.zeros((n + 2, n + 2))
    block[:n, :n] = A * dt
    block[:n, n] = B[:, 0] * dt
    block[n, n + 1] = 1.0

    expo = mat_exp(block)
    phi = expo[:n, :n]
    gamma1 = expo[:n, n:n + 1]
    gamma2 = expo[:n, n + 1:n + 2]

    A_d = phi.copy()
    B_d = gamma1 - gamma2
    B_tilde_d = gamma2.copy()
    for arr in (A_d, B_d, B_tilde_d):
        arr.setflags(write=False)

    return DiscreteStep(A_d=A_d, B_d=B_d, B_tilde_d=B_tilde_d, dt=dt)


def discretize(params: PixelBandwidthParams, u_next: float, dt: float) -> DiscreteStep:
    """
    First-order-hold discretization over an interval of length dt.

    The model is linearized at the steady state of u_next. Results are
    memoized on (params, u_next, dt); the returned arrays are read-only.

    Raises:
        InvalidArgumentError: dt <= 0 or non-finite input
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidArgumentError(f"dt must be finite and > 0, got {dt}")
    if not math.isfinite(u_next):
        raise InvalidArgumentError(f"input must be finite, got {u_next}")
    return _discretize(params, float(u_next), float(dt))


def discretize_sequence(params: PixelBandwidthParams,
                        inputs: InputSequence) -> List[DiscreteStep]:
    """One DiscreteStep per interval of the input sequence."""
    dts = np.diff(inputs.times)
    return [discretize(params, float(inputs.values[i + 1]), float(dts[i]))
            for i in range(dts.size)]


def step(state: FilterState, u_k: float, u_k1: float, d: DiscreteStep) -> FilterState:
    """x[k+1] = A_d x[k] + B_d u[k] + B̃_d u[k+1]"""
    x = d.A_d @ state.x + d.B_d[:, 0] * u_k + d.B_tilde_d[:, 0] * u_k1
    return FilterState(x=x, t=state.t + d.dt)


# ==================== Transient & Zero-State Solutions ====================

def transient_solution(x0: FilterState, inputs: InputSequence,
                       params: PixelBandwidthParams) -> np.ndarray:
    """
    Outputs y[k] = (logL_sf, logL_diff) at every input timestamp.

    Computed as zero-input response φ(k₀,k)x[k₀] plus the accumulated forced
    response, so both parts of the transient stay visible.

    Returns:
        array of shape (len(inputs), 2); row 0 is C x0
    """
    u = inputs.values
    outputs = np.empty((len(inputs), 2))
    outputs[0] = OUTPUT_MATRIX @ x0.x

    transition = np.eye(N_STATES)
    forced = np.zeros(N_STATES)
    for i, d in enumerate(discretize_sequence(params, inputs)):
        transition = d.A_d @ transition
        forced = d.A_d @ forced + d.B_d[:, 0] * u[i] + d.B_tilde_d[:, 0] * u[i + 1]
        outputs[i + 1] = OUTPUT_MATRIX @ (transition @ x0.x + forced)

    return outputs


def zero_state_weights(inputs: InputSequence,
                       params: PixelBandwidthParams) -> WeightSequence:
    """
    Per-sample weights of the zero-state response at the last timestamp.

        w[k₀] = C φ(k₀+1,k) B_d[k₀]
        w[i]  = C (φ(i+1,k) B_d[i] + φ(i,k) B̃_d[i-1])    k₀ < i < k
        w[k]  = C B̃_d[k-1]

    Each channel is then divided by its sum.

    Raises:
        InvalidArgumentError: fewer than 2 samples
    """
    if len(inputs) < 2:
        raise InvalidArgumentError("need at least 2 input samples")

    steps = discretize_sequence(params, inputs)
    raw = np.zeros((len(inputs), 2))

    # Walk backwards carrying C φ(i+1, k)
    carry = OUTPUT_MATRIX.copy()
    for i in range(len(steps) - 1, -1, -1):
        d = steps[i]
        raw[i + 1] += carry @ d.B_tilde_d[:, 0]
        raw[i] += carry @ d.B_d[:, 0]
        carry = carry @ d.A_d

    sums = raw.sum(axis=0)
    return WeightSequence(times=inputs.times.copy(), weights=raw / sums, raw=raw)


def blurred_log_radiance(weights: WeightSequence,
                         inputs: InputSequence) -> Tuple[float, float]:
    """Weighted estimate (logL_sf, logL_diff) = Σ ŵ[i] u[i]."""
    if weights.weights.shape[0] != len(inputs):
        raise InvalidArgumentError(
            f"{weights.weights.shape[0]} weights for {len(inputs)} inputs")
    sf, diff = weights.weights.T @ inputs.values
    return float(sf), float(diff)


# ==================== Reset & Sampling ====================

def apply_reset(log_diff: float, log_delta_ref: float, omega_c_diff: float,
                elapsed: float) -> float:
    """
    Blurred log-radiance after a reset of the differencing amplifier.

        logL_blur(t) = logL_diff(t) + logL_delta(t_ref)·e^(-ω_c,diff·(t - t_ref))

    with logL_delta = logL_sf - logL_diff latched at t_ref.

    Raises:
        InvalidArgumentError: elapsed < 0
    """
    if elapsed < 0:
        raise InvalidArgumentError(f"elapsed time must be >= 0, got {elapsed}")
    return log_diff + log_delta_ref * math.exp(-omega_c_diff * elapsed)


def sample_input_timestamps(t_k: float, n: int = DEFAULT_SAMPLE_SIZE,
                            omega_min: float = 1.0) -> np.ndarray:
    """
    Deterministic importance-sampled timestamps ending at t_k.

    Offsets follow the inverse CDF of an exponential with rate omega_min,
    truncated so the kept support holds 95% of the mass:

        Δᵢ = -ln(1 - 0.95·pᵢ) / omega_min,   pᵢ = i/(n-1),  i = 1..n-1

    so the earliest sample sits at t_k - ln(20)/omega_min. Samples are kept at
    least MIN_DT apart.

    Raises:
        InvalidArgumentError: n < 2 or omega_min <= 0
    """
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 samples, got {n}")
    if not omega_min > 0:
        raise InvalidArgumentError(f"omega_min must be > 0, got {omega_min}")

    quantiles = np.arange(1, n) / (n - 1)
    offsets = -np.log1p(-TRUNCATION_PROBABILITY * quantiles) / omega_min

    times = np.empty(n)
    times[:-1] = t_k - offsets[::-1]
    times[-1] = t_k
    for i in range(n - 2, -1, -1):
        times[i] = min(times[i], times[i + 1] - MIN_DT)

    return times


def synthesize_blurred_log_radiance(u_fn: Callable[[float], float], t_k: float,
                                    params: PixelBandwidthParams,
                                    n: int = DEFAULT_SAMPLE_SIZE,
                                    t_start: Optional[float] = None) -> Tuple[float, float]:
    """
    Blurred (logL_sf, logL_diff) at t_k from n importance-sampled inputs.

    Inputs requested before t_start take the value at t_start, treating the
    signal as stationary before the sequence begins.
    """
    times = sample_input_timestamps(t_k, n, omega_c_dom_min(params))
    if t_start is not None:
        values = [u_fn(max(t, t_start)) for t in times]
    else:
        values = [u_fn(t) for t in times]

    inputs = InputSequence.from_samples(times, values)
    weights = zero_state_weights(inputs, params)
    return blurred_log_radiance(weights, inputs)
