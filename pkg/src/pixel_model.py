"""
Continuous-Time Pixel Bandwidth Model

The pixel is modelled as a unity-gain 4th-order non-linear low-pass filter on
effective log-radiance u = log L, with L = L_sig + L_dark:

    ẋ = A(u) x + B(u) u,   y = C x,   x = [d logL_p/dt, logL_p, logL_sf, logL_diff]

        | -2ζωₙ  -ωₙ²     0         0       |        | ωₙ² |
    A = |   1      0      0         0       |    B = |  0  |
        |   0    ω_sf   -ω_sf       0       |        |  0  |
        |   0      0    ω_diff   -ω_diff    |        |  0  |

Stage by stage:
1. Logarithmic photoreceptor: 2nd-order, ζ(u) and ωₙ(u) depend on radiance
   through τ_in(u) = c_in / e^u and τ_mil(u) = c_mil / e^u
2. Source follower buffer: 1st-order, fixed cutoff ω_sf
3. Differencing amplifier: 1st-order, fixed cutoff ω_diff > ω_sf

Key behaviour:
- Under low light the photoreceptor collapses to a single pole at
  ω_c,p̂(u) = (A_loop + 1) / (τ_in(u) + (A_amp + 1) τ_mil(u)),
  directly proportional to the effective radiance.
- At high radiance the photoreceptor pole saturates near (A_loop + 1) / τ_out.
- The black level L_dark sets the minimum bandwidth.

Only the lumped constants c_in = C_in·V_T/κ and c_mil = C_mil·V_T/κ are
identifiable, so the individual capacitances are not represented.
"""

import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, Optional, Tuple

import numpy as np

from src.errors import InvalidArgumentError

# Minimum effective radiance applied before every log
RADIANCE_FLOOR = 1e-3

# Radiance units per lux of scene illuminance (per unit normalized intensity)
# for the default parameter set. 1 000 lux -> illuminance_scale 38 000.
RADIANCE_PER_LUX = 38.0

# Output matrix: the filter exposes logL_sf and logL_diff
OUTPUT_MATRIX = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
])
OUTPUT_MATRIX.setflags(write=False)

SF_INDEX = 2
DIFF_INDEX = 3


@dataclass(frozen=True)
class PixelBandwidthParams:
    """
    Parameter set of the 4th-order pixel filter.

    The defaults are a placeholder calibrated to the expected trend, not
    measured sensor values: with illuminance_scale = lux_to_illuminance_scale(1000)
    the bandwidth runs from ~55 Hz at 1% intensity to ~3 kHz at full intensity,
    rising linearly with radiance under low light and saturating near 5 kHz.
    """
    amp_gain: float = 100.0           # A_amp
    loop_gain: float = 4.0            # A_loop
    tau_out: float = 1.0 / (2 * math.pi * 1000.0)  # seconds
    c_in: float = 1.0                 # C_in·V_T/κ, radiance·seconds
    c_mil: float = 0.05               # C_mil·V_T/κ, radiance·seconds
    omega_c_sf: float = 2 * math.pi * 20000.0   # rad/s
    omega_c_diff: float = 2 * math.pi * 50000.0  # rad/s
    black_level: float = 40.0         # L_dark, radiance units

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{f.name} must be finite and > 0, got {value}")
        if not self.omega_c_diff > self.omega_c_sf:
            raise InvalidArgumentError("omega_c_diff must exceed omega_c_sf")
        if not self.c_in > RADIANCE_FLOOR:
            raise InvalidArgumentError(
                f"c_in must exceed the radiance floor {RADIANCE_FLOOR}")

    @classmethod
    def default(cls) -> "PixelBandwidthParams":
        return cls()

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> "PixelBandwidthParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown pixel parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def lux_to_illuminance_scale(lux: float) -> float:
    """Radiometric scale matching a scene illuminance, for the default parameters."""
    return RADIANCE_PER_LUX * lux


def effective_log_radiance(signal, black_level: float, floor: float = RADIANCE_FLOOR):
    """u = log(max(L_sig + L_dark, floor)); works on scalars and arrays."""
    total = np.maximum(np.asarray(signal, dtype=float) + black_level, floor)
    u = np.log(total)
    return float(u) if u.ndim == 0 else u


# ==================== Coefficient Functions ====================

def tau_in(params: PixelBandwidthParams, u: float) -> float:
    """Input-node time constant c_in / e^u."""
    return params.c_in / math.exp(u)


def tau_mil(params: PixelBandwidthParams, u: float) -> float:
    """Miller time constant c_mil / e^u."""
    return params.c_mil / math.exp(u)


def damping_ratio(params: PixelBandwidthParams, u: float) -> float:
    """
    Radiance-dependent damping ratio of the photoreceptor.

    ζ(u) = (τ_out + τ_in + (A_amp+1)τ_mil) / (2·√(τ_out·(τ_in+τ_mil)·(A_loop+1)))
    """
    t_in = tau_in(params, u)
    t_mil = tau_mil(params, u)
    numerator = params.tau_out + t_in + (params.amp_gain + 1) * t_mil
    denominator = 2 * math.sqrt(params.tau_out * (t_in + t_mil) * (params.loop_gain + 1))
    return numerator / denominator


def natural_frequency(params: PixelBandwidthParams, u: float) -> float:
    """ωₙ(u) = √((A_loop+1) / (τ_out·(τ_in+τ_mil))), rad/s."""
    t_sum = tau_in(params, u) + tau_mil(params, u)
    return math.sqrt((params.loop_gain + 1) / (params.tau_out * t_sum))


def dominant_cutoff(params: PixelBandwidthParams, u):
    """
    Low-light dominant pole (A_loop+1) / (τ_in + (A_amp+1)τ_mil), rad/s.

    Accepts a scalar or an array of inputs.
    """
    lumped = params.c_in + (params.amp_gain + 1) * params.c_mil
    omega = (params.loop_gain + 1) * np.exp(np.asarray(u, dtype=float)) / lumped
    return float(omega) if omega.ndim == 0 else omega


def omega_c_dom_min(params: PixelBandwidthParams) -> float:
    """Dominant cutoff in the dark (L = L_dark): the slowest the pixel gets."""
    return dominant_cutoff(params, math.log(params.black_level))


# ==================== State-Space Matrices ====================

def continuous_matrices(params: PixelBandwidthParams,
                        u: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Assemble A(u) (4x4), B(u) (4x1) and C (2x4).

    Linearizing at the steady state (0, u, u, u) reproduces these same
    matrices, so they double as the linearized model.
    """
    zeta = damping_ratio(params, u)
    wn = natural_frequency(params, u)
    w_sf = params.omega_c_sf
    w_diff = params.omega_c_diff

    A = np.array([
        [-2 * zeta * wn, -wn * wn, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, w_sf, -w_sf, 0.0],
        [0.0, 0.0, w_diff, -w_diff],
    ])
    B = np.array([[wn * wn], [0.0], [0.0], [0.0]])

    return A, B, OUTPUT_MATRIX.copy()


def dominant_pole_matrices(params: PixelBandwidthParams,
                           u: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1st-order low-light photoreceptor: A = -ω_c,p̂(u), B = ω_c,p̂(u), C = 1."""
    w = dominant_cutoff(params, u)
    return np.array([[-w]]), np.array([[w]]), np.array([[1.0]])


# ==================== Bandwidth Analysis ====================

def transfer_function(A, B, c_row, freqs_hz) -> np.ndarray:
    """Evaluate c (j2πf·I - A)⁻¹ B at each frequency."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float).reshape(-1)
    c = np.asarray(c_row, dtype=float).reshape(-1)
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))

    s = 2j * np.pi * f
    systems = s[:, None, None] * np.eye(A.shape[0]) - A
    rhs = np.broadcast_to(b, (f.size, b.size))[..., None].astype(complex)
    states = np.linalg.solve(systems, rhs)[..., 0]
    return states @ c


def cutoff_frequency_hz(A, B, c_row, points_per_decade: int = 64,
                        rtol: float = 1e-6) -> float:
    """
    Smallest frequency where |H(f)| drops to |H(0)|/√2.

    Scans a log-spaced grid spanning three decades either side of the
    system's pole magnitudes, then bisects in log-frequency around the first
    crossing.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float).reshape(-1)
    c = np.asarray(c_row, dtype=float).reshape(-1)

    dc_gain = abs(float(c @ np.linalg.solve(-A, b)))
    target = dc_gain / math.sqrt(2.0)

    pole_mags = np.abs(np.linalg.eigvals(A))
    lo = math.log10(pole_mags.min() / (2 * math.pi)) - 3
    hi = math.log10(pole_mags.max() / (2 * math.pi)) + 3
    grid = np.logspace(lo, hi, int(math.ceil((hi - lo) * points_per_decade)) + 1)

    magnitude = np.abs(transfer_function(A, b, c, grid))
    below = np.nonzero(magnitude <= target)[0]
    if below.size == 0:
        return math.inf
    i = int(below[0])
    if i == 0:
        return float(grid[0])

    log_lo, log_hi = math.log(grid[i - 1]), math.log(grid[i])
    while log_hi - log_lo > rtol:
        mid = 0.5 * (log_lo + log_hi)
        if abs(transfer_function(A, b, c, [math.exp(mid)])[0]) <= target:
            log_hi = mid
        else:
            log_lo = mid

    return math.exp(0.5 * (log_lo + log_hi))


def frequency_response(params: PixelBandwidthParams, radiance: float,
                       freqs_hz) -> np.ndarray:
    """Linearized response (output logL_diff) at u = log(L + L_dark)."""
    u = effective_log_radiance(radiance, params.black_level)
    A, B, C = continuous_matrices(params, u)
    return transfer_function(A, B, C[1], freqs_hz)


def bandwidth_hz(params: PixelBandwidthParams, radiance: float,
                 points_per_decade: int = 64, rtol: float = 1e-6) -> float:
    """
    -3 dB bandwidth of the pixel at incident radiance L (signal, without L_dark).

    Example:
        >>> p = PixelBandwidthParams.default()
        >>> bandwidth_hz(p, 0.0)       # black level only, ~5 Hz
        >>> bandwidth_hz(p, 38000.0)   # full intensity at 1 000 lux, ~3 kHz
    """
    if radiance < 0:
        raise InvalidArgumentError(f"radiance must be >= 0, got {radiance}")
    u = effective_log_radiance(radiance, params.black_level)
    A, B, C = continuous_matrices(params, u)
    return cutoff_frequency_hz(A, B, C[1], points_per_decade, rtol)


def dominant_bandwidth_hz(params: PixelBandwidthParams, radiance: float) -> float:
    """Bandwidth predicted by the dominant-pole approximation alone."""
    u = effective_log_radiance(radiance, params.black_level)
    return dominant_cutoff(params, u) / (2 * math.pi)


def pole_summary(params: PixelBandwidthParams, u: float) -> Dict[str, float]:
    """Coefficient values at one operating point, handy for reports."""
    return {
        'u': u,
        'tau_in': tau_in(params, u),
        'tau_mil': tau_mil(params, u),
        'zeta': damping_ratio(params, u),
        'omega_n': natural_frequency(params, u),
        'omega_dom': dominant_cutoff(params, u),
    }


def format_params(params: PixelBandwidthParams, radiance: Optional[float] = None) -> str:
    """Pretty-print a parameter set, optionally with the bandwidth at one radiance."""
    lines = []
    lines.append("Pixel Bandwidth Parameters:")
    lines.append(f"  A_amp:         {params.amp_gain:g}")
    lines.append(f"  A_loop:        {params.loop_gain:g}")
    lines.append(f"  tau_out:       {params.tau_out:.4e} s")
    lines.append(f"  c_in:          {params.c_in:g}")
    lines.append(f"  c_mil:         {params.c_mil:g}")
    lines.append(f"  omega_c_sf:    {params.omega_c_sf:.1f} rad/s")
    lines.append(f"  omega_c_diff:  {params.omega_c_diff:.1f} rad/s")
    lines.append(f"  L_dark:        {params.black_level:g}")
    lines.append(f"  omega_dom_min: {omega_c_dom_min(params):.2f} rad/s")
    if radiance is not None:
        poles = pole_summary(params, effective_log_radiance(radiance, params.black_level))
        lines.append(f"  @ L={radiance:g}:")
        lines.append(f"    zeta:        {poles['zeta']:.3f}")
        lines.append(f"    omega_n:     {poles['omega_n']:.1f} rad/s")
        lines.append(f"    omega_dom:   {poles['omega_dom']:.1f} rad/s")
        lines.append(f"    bandwidth:   {bandwidth_hz(params, radiance):.1f} Hz")
    return "\n".join(lines)
