"""
Small dense linear algebra and least-squares solvers.

Everything here works on plain numpy arrays of at most a few dozen entries:
the 6x6 block matrix of the first-order-hold discretization, the 4x4 discrete
system matrices, and the handful of correction parameters fitted after
reconstruction.

Solvers:
- ols_affine: slope/intercept by ordinary least squares
- linear_least_squares: general full-rank linear fit
- lm_fit: Levenberg-Marquardt with a gain-ratio trust region

Damping scheme used by lm_fit (fixed here, documented in DESIGN.md):
    (JᵀJ + λ·diag(JᵀJ)) δ = -Jᵀr
    gain ratio ρ = actual SSR reduction / reduction predicted by the linear model
    accept when SSR decreases and ρ > min_gain_ratio, then λ ← λ / 10
    reject otherwise, λ ← λ · 10 and retry (bounded number of retries)
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from src.errors import InvalidArgumentError, InvalidStartError, SingularFitError

logger = logging.getLogger(__name__)

MAX_MATRIX_SIZE = 16

ResidualFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TrustRegionConfig:
    """Levenberg-Marquardt settings."""
    max_iterations: int = 20
    tolerance: float = 1e-10  # relative SSR reduction below which we stop
    initial_damping: float = 1e-3
    damping_factor: float = 10.0
    min_damping: float = 1e-15
    min_gain_ratio: float = 1e-4
    max_damping_increases: int = 12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise InvalidArgumentError("tolerance must be > 0")
        if not self.initial_damping > 0:
            raise InvalidArgumentError("initial_damping must be > 0")
        if not self.damping_factor > 1:
            raise InvalidArgumentError("damping_factor must be > 1")


@dataclass
class LMResult:
    """Outcome of a Levenberg-Marquardt run."""
    params: np.ndarray
    ssr: float
    initial_ssr: float
    iterations: int
    converged: bool
    ssr_history: List[float] = field(default_factory=list)  # one entry per accepted step


def _as_square(m) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {arr.shape}")
    if arr.shape[0] > MAX_MATRIX_SIZE:
        raise InvalidArgumentError(
            f"matrix is {arr.shape[0]}x{arr.shape[0]}, limit is {MAX_MATRIX_SIZE}")
    return arr


def mat_exp(m) -> np.ndarray:
    """
    Matrix exponential of a small square matrix.

    Delegates to scipy's scaling-and-squaring Padé(13) implementation, which
    is accurate to roundoff for the well-conditioned block matrices built by
    the discretization.

    Raises:
        InvalidArgumentError: non-square or non-finite input
    """
    arr = _as_square(m)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return expm(arr)


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude."""
    arr = _as_square(m)
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


def is_schur_stable(m, margin: float = 0.0) -> bool:
    """
    True iff every eigenvalue lies strictly inside the circle of radius 1 - margin.

    Example:
        >>> is_schur_stable(0.5 * np.eye(4))    # True
        >>> is_schur_stable(np.diag([1.1, 0.2]))  # False
    """
    return spectral_radius(m) < 1.0 - margin


def linear_least_squares(design, target) -> np.ndarray:
    """
    Solve min ||design @ beta - target||² for a full-column-rank design.

    Raises:
        SingularFitError: design is rank deficient
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidArgumentError(f"incompatible shapes {X.shape} and {y.shape}")
    if X.shape[0] < X.shape[1]:
        raise InvalidArgumentError("fewer observations than unknowns")

    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise SingularFitError(f"design matrix has rank {rank} < {X.shape[1]}")
    return beta


def ols_affine(xs, ys) -> Tuple[float, float]:
    """
    Fit ys ≈ slope * xs + intercept by ordinary least squares.

    Returns:
        (slope, intercept)

    Raises:
        InvalidArgumentError: length mismatch or fewer than 2 points
        SingularFitError: xs has zero variance
    """
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.size != y.size:
        raise InvalidArgumentError(f"xs has {x.size} entries, ys has {y.size}")
    if x.size < 2:
        raise InvalidArgumentError("need at least 2 points")
    if np.ptp(x) == 0:
        raise SingularFitError("xs are all identical")

    design = np.column_stack([x, np.ones_like(x)])
    slope, intercept = linear_least_squares(design, y)
    return float(slope), float(intercept)


def finite_difference_jacobian(residual_fn: ResidualFn, params,
                               rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian, step = rel_step * max(|p_j|, 1)."""
    p = np.asarray(params, dtype=float)
    r0 = np.asarray(residual_fn(p), dtype=float)
    jac = np.empty((r0.size, p.size))

    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1.0)
        forward = p.copy()
        backward = p.copy()
        forward[j] += h
        backward[j] -= h
        jac[:, j] = (np.asarray(residual_fn(forward)) - np.asarray(residual_fn(backward))) / (2 * h)

    return jac


def _ssr(r: np.ndarray) -> float:
    return float(r @ r) if np.all(np.isfinite(r)) else np.inf


def lm_fit(residual_fn: ResidualFn, init,
           jacobian_fn: Optional[JacobianFn] = None,
           cfg: Optional[TrustRegionConfig] = None) -> LMResult:
    """
    Minimize the sum of squared residuals with Levenberg-Marquardt.

    Args:
        residual_fn: params -> residual vector
        init: starting parameters
        jacobian_fn: params -> Jacobian (len(r) x len(params));
            central finite differences when omitted
        cfg: trust-region settings

    Returns:
        LMResult; result.ssr <= result.initial_ssr always holds

    Raises:
        InvalidStartError: residuals are not finite at init
        InvalidArgumentError: fewer residuals than parameters

    Example:
        >>> lm_fit(lambda p: p - 5.0, [0.0]).params  # array([5.])
    """
    cfg = cfg or TrustRegionConfig()
    p = np.array(init, dtype=float).ravel()
    r = np.asarray(residual_fn(p), dtype=float).ravel()

    if not np.all(np.isfinite(r)):
        raise InvalidStartError("residuals are not finite at the initial parameters")
    if r.size < p.size:
        raise InvalidArgumentError(f"{r.size} residuals for {p.size} parameters")

    if jacobian_fn is None:
        def jacobian_fn(q):
            return finite_difference_jacobian(residual_fn, q)

    ssr = _ssr(r)
    initial_ssr = ssr
    damping = cfg.initial_damping
    history = [ssr]
    iterations = 0
    converged = False

    while iterations < cfg.max_iterations:
        iterations += 1

        J = np.asarray(jacobian_fn(p), dtype=float).reshape(r.size, p.size)
        gradient = J.T @ r
        if ssr == 0.0 or not np.any(gradient):
            converged = True
            break

        normal = J.T @ J
        diag = np.diag(normal)
        scale = np.maximum(diag, 1e-12 * max(float(diag.max()), 1.0))

        accepted = False
        for _ in range(cfg.max_damping_increases):
            try:
                step = np.linalg.solve(normal + damping * np.diag(scale), -gradient)
            except np.linalg.LinAlgError:
                damping *= cfg.damping_factor
                continue

            candidate = p + step
            r_new = np.asarray(residual_fn(candidate), dtype=float).ravel()
            ssr_new = _ssr(r_new)

            linear = r + J @ step
            predicted = ssr - float(linear @ linear)
            gain = (ssr - ssr_new) / predicted if predicted > 0 else -1.0

            if ssr_new < ssr and gain > cfg.min_gain_ratio:
                accepted = True
                break
            damping *= cfg.damping_factor

        if not accepted:
            logger.debug("LM: no acceptable step at iteration %d (ssr=%.3e)", iterations, ssr)
            break

        reduction = ssr - ssr_new
        previous = ssr
        p, r, ssr = candidate, r_new, ssr_new
        history.append(ssr)
        damping = max(damping / cfg.damping_factor, cfg.min_damping)

        if reduction <= cfg.tolerance * previous:
            converged = True
            break

    logger.debug("LM finished after %d iterations: ssr %.3e -> %.3e (converged=%s)",
                 iterations, initial_ssr, ssr, converged)

    return LMResult(
        params=p,
        ssr=ssr,
        initial_ssr=initial_ssr,
        iterations=iterations,
        converged=converged,
        ssr_history=history,
    )
