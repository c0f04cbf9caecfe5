"""
Reconstruction-side formulas.

Losses compare predicted blurred log-radiance changes against what an event
implies, normalized by the mean contrast threshold C̄ = ½(C₋₁ + C₊₁):

    difference:  ρ = (ΔlogL_blur - p·C_p) / C̄      (squared or Huber)
    gradient:    |ĝ - g| / |g|,  g = p·C_p / (t_curr - t_ref)
    tv:          |logL_blur(t_end) - logL_blur(t_start)| / C̄

Corrections map predicted radiance onto reference images:

    gamma:             log L_corr = a·log L + b_ch              (OLS)
    translated gamma:  L_corr = g·(b_ch·L^a - c_ch)             (Levenberg-Marquardt)

where g is the gain-exposure product of the reference image.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidArgumentError, SingularFitError
from src.numerics import LMResult, TrustRegionConfig, linear_least_squares, lm_fit

logger = logging.getLogger(__name__)

TV_MIN_RELATIVE_LENGTH = 1e-9
LM_MAX_ITERATIONS = 20


@dataclass(frozen=True)
class LossConfig:
    lambda_diff: float = 1.0
    lambda_tv: float = 0.1
    lambda_grad: float = 0.0
    huber_delta: float = 1.0

    def __post_init__(self):
        for name in ('lambda_diff', 'lambda_tv', 'lambda_grad'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {value}")
        if not self.huber_delta > 0:
            raise InvalidArgumentError("huber_delta must be > 0")


@dataclass(frozen=True)
class MeanThreshold:
    c_bar: float

    def __post_init__(self):
        if not self.c_bar > 0:
            raise InvalidArgumentError(f"mean threshold must be > 0, got {self.c_bar}")


@dataclass(frozen=True)
class LossTerms:
    """Per-event loss values before weighting."""
    diff: float = 0.0
    tv: float = 0.0
    grad: float = 0.0


@dataclass(frozen=True)
class CorrectionParams:
    """Translated-gamma parameters: shared exponent a, per-channel b and c."""
    a: float
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if b.shape != c.shape:
            raise InvalidArgumentError(f"b has shape {b.shape}, c has {c.shape}")
        if np.any(b <= 0):
            raise InvalidArgumentError("scale factors b must be > 0")
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'c', c)

    @classmethod
    def identity(cls, channels: int = 3) -> "CorrectionParams":
        return cls(a=1.0, b=np.ones(channels), c=np.zeros(channels))

    def to_dict(self) -> Dict:
        return {'a': float(self.a), 'b': self.b.tolist(), 'c': self.c.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> "CorrectionParams":
        try:
            return cls(a=float(data['a']), b=data['b'], c=data['c'])
        except KeyError as e:
            raise InvalidArgumentError(f"correction parameters missing {e}")


@dataclass
class CorrectionFit:
    params: CorrectionParams
    initial_ssr: float
    ssr: float
    iterations: int
    converged: bool


def mean_threshold(c_neg: float, c_pos: float) -> MeanThreshold:
    return MeanThreshold(0.5 * (c_neg + c_pos))


def _check_c_bar(c_bar: float) -> None:
    if not c_bar > 0:
        raise InvalidArgumentError(f"mean threshold must be > 0, got {c_bar}")


# ==================== Losses ====================

def loss_diff_squared(delta_pred: float, p: int, c_p: float, c_bar: float) -> float:
    """ρ² with ρ = (ΔlogL_blur - p·C_p)/C̄."""
    _check_c_bar(c_bar)
    rho = (delta_pred - p * c_p) / c_bar
    return rho * rho


def loss_diff_huber(delta_pred: float, p: int, c_p: float, c_bar: float,
                    delta: float = 1.0) -> float:
    """
    Huber norm of ρ = (ΔlogL_blur - p·C_p)/C̄.

    ½ρ² for |ρ| <= delta, delta·(|ρ| - ½delta) beyond; both branches meet
    with equal value and slope at |ρ| = delta.
    """
    _check_c_bar(c_bar)
    rho = abs((delta_pred - p * c_p) / c_bar)
    if rho <= delta:
        return 0.5 * rho * rho
    return delta * (rho - 0.5 * delta)


def loss_grad(pred_grad: float, p: int, c_p: float, t_curr: float, t_ref: float) -> float:
    """Absolute percentage error against the event's mean slope p·C_p/(t_curr - t_ref)."""
    if not t_curr > t_ref:
        raise InvalidArgumentError(f"t_curr ({t_curr}) must exceed t_ref ({t_ref})")
    if not c_p > 0:
        raise InvalidArgumentError(f"threshold must be > 0, got {c_p}")
    target = p * c_p / (t_curr - t_ref)
    return abs((pred_grad - target) / target)


def loss_tv(start: float, end: float, c_bar: float) -> float:
    _check_c_bar(c_bar)
    return abs(end - start) / c_bar


def sample_tv_subinterval(t_ref: float, t_curr: float,
                          rng: np.random.Generator) -> Tuple[float, float]:
    """
    Random sub-interval (t_start, t_end] of (t_ref, t_curr].

    The length is triangular on [0, t_curr - t_ref) with mode 0; the start is
    then uniform over the remaining slack.
    """
    span = t_curr - t_ref
    if not span > 0:
        raise InvalidArgumentError(f"t_curr ({t_curr}) must exceed t_ref ({t_ref})")

    length = rng.triangular(0.0, 0.0, span)
    length = min(max(length, TV_MIN_RELATIVE_LENGTH * span), span)

    t_start = t_ref + rng.uniform(0.0, span - length)
    t_end = min(t_start + length, t_curr)
    return float(t_start), float(t_end)


def total_loss(terms: Sequence[LossTerms], cfg: Optional[LossConfig] = None) -> float:
    """Batch mean of λ_diff·ℓ_diff + λ_tv·ℓ_tv + λ_grad·ℓ_grad."""
    cfg = cfg or LossConfig()
    if len(terms) == 0:
        raise InvalidArgumentError("loss batch is empty")
    weighted = [cfg.lambda_diff * t.diff + cfg.lambda_tv * t.tv + cfg.lambda_grad * t.grad
                for t in terms]
    return float(np.mean(weighted))


# ==================== Corrections ====================

def _as_channels(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be (samples,) or (samples, channels)")
    return arr


def fit_gamma_correction(pred_log, ref_log) -> Tuple[float, np.ndarray]:
    """
    Fit ref_log ≈ a·pred_log + b_ch with a shared a and per-channel b.

    Args:
        pred_log, ref_log: arrays of shape (samples, channels)

    Returns:
        (a, b)

    Raises:
        SingularFitError: predictions carry no variance within the channels
    """
    x = _as_channels(pred_log, "pred_log")
    y = _as_channels(ref_log, "ref_log")
    if x.shape != y.shape:
        raise InvalidArgumentError(f"shapes differ: {x.shape} vs {y.shape}")
    n, channels = x.shape
    if n < 2:
        raise InvalidArgumentError("need at least 2 samples per channel")

    # Columns: shared slope, then one intercept per channel
    design = np.zeros((n * channels, 1 + channels))
    design[:, 0] = x.T.ravel()
    for ch in range(channels):
        design[ch * n:(ch + 1) * n, 1 + ch] = 1.0

    beta = linear_least_squares(design, y.T.ravel())
    return float(beta[0]), beta[1:]


def apply_translated_gamma(pred_L, params: CorrectionParams, gain_exposure=1.0) -> np.ndarray:
    """g·(b·L^a - c), elementwise per channel."""
    L = np.asarray(pred_L, dtype=float)
    g = np.asarray(gain_exposure, dtype=float)
    if g.ndim == 1 and L.ndim == 2:
        g = g[:, None]
    return g * (params.b * np.power(L, params.a) - params.c)


def _initial_correction(L: np.ndarray, ref: np.ndarray, g: np.ndarray) -> CorrectionParams:
    """
    Gamma fit on log values with c = 0, using only the samples whose
    reference is positive in every channel. Identity when fewer than two
    such samples remain or the fit is singular.
    """
    channels = L.shape[1]
    target = ref / g[:, None]
    rows = np.all(target > 0, axis=1)
    if rows.sum() < L.shape[0]:
        logger.debug("Gamma initialization uses %d of %d samples", rows.sum(), L.shape[0])
    if rows.sum() >= 2:
        try:
            a, b_log = fit_gamma_correction(np.log(L[rows]), np.log(target[rows]))
            return CorrectionParams(a=a, b=np.exp(b_log), c=np.zeros(channels))
        except (SingularFitError, InvalidArgumentError) as e:
            logger.debug("Gamma initialization failed (%s); starting from identity", e)
    return CorrectionParams.identity(channels)


def fit_translated_gamma(pred_L, ref_L_sig, gain_exposure=1.0,
                         fixed_a: Optional[float] = None,
                         fit_offset: bool = True,
                         cfg: Optional[TrustRegionConfig] = None) -> CorrectionFit:
    """
    Fit g·(b·L^a - c) to reference radiance with Levenberg-Marquardt.

    Starts from the gamma fit (c = 0). fixed_a pins the exponent and
    fit_offset=False pins c at 0; with both the problem is a per-channel
    linear fit.

    Args:
        pred_L: predicted radiance, (samples, channels), all > 0
        ref_L_sig: reference radiance, same shape
        gain_exposure: scalar or one factor per sample, all > 0

    Raises:
        InvalidArgumentError: non-positive predictions or gains
    """
    L = _as_channels(pred_L, "pred_L")
    ref = _as_channels(ref_L_sig, "ref_L_sig")
    if L.shape != ref.shape:
        raise InvalidArgumentError(f"shapes differ: {L.shape} vs {ref.shape}")
    if np.any(L <= 0) or not np.all(np.isfinite(L)):
        raise InvalidArgumentError("predicted radiance must be finite and > 0")

    n, channels = L.shape
    g = np.broadcast_to(np.asarray(gain_exposure, dtype=float), (n,)).copy()
    if np.any(g <= 0):
        raise InvalidArgumentError("gain-exposure factors must be > 0")

    init = _initial_correction(L, ref, g)
    logL = np.log(L)

    fit_a = fixed_a is None
    a_fixed = init.a if fit_a else float(fixed_a)

    def unpack(theta):
        i = 0
        a = a_fixed
        if fit_a:
            a = theta[0]
            i = 1
        b = theta[i:i + channels]
        c = theta[i + channels:i + 2 * channels] if fit_offset else np.zeros(channels)
        return a, b, c

    def residuals(theta):
        a, b, c = unpack(theta)
        return (g[:, None] * (b * np.power(L, a) - c) - ref).T.ravel()

    def jacobian(theta):
        a, b, _ = unpack(theta)
        powered = np.power(L, a)
        cols = []
        if fit_a:
            cols.append((g[:, None] * b * powered * logL).T.ravel())
        for ch in range(channels):
            col = np.zeros((channels, n))
            col[ch] = g * powered[:, ch]
            cols.append(col.ravel())
        if fit_offset:
            for ch in range(channels):
                col = np.zeros((channels, n))
                col[ch] = -g
                cols.append(col.ravel())
        return np.column_stack(cols)

    start = []
    if fit_a:
        start.append(init.a)
    start.extend(init.b)
    if fit_offset:
        start.extend(init.c)

    cfg = cfg or TrustRegionConfig(max_iterations=LM_MAX_ITERATIONS)
    result: LMResult = lm_fit(residuals, np.array(start), jacobian, cfg)

    a, b, c = unpack(result.params)
    logger.info("Translated-gamma fit: ssr %.3e -> %.3e in %d iterations",
                result.initial_ssr, result.ssr, result.iterations)

    return CorrectionFit(
        params=CorrectionParams(a=float(a), b=np.array(b), c=np.array(c)),
        initial_ssr=result.initial_ssr,
        ssr=result.ssr,
        iterations=result.iterations,
        converged=result.converged,
    )
