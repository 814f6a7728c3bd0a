"""Closed-form predictions and spectral measurement.

Sample correlation statistics feed the optimal (unconstrained) and
sub-optimal (output-power-constrained) control-filter solutions, the
step-size stability bounds, and the adaptation time constant. Welch PSD
estimation backs the spectral comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from . import linalg
from .acoustics import FirPath
from .errors import ConfigError, DataError, SingularMatrixError


@dataclass
class CorrelationModel:
    """Sample second-order statistics of the reference, filtered
    reference, and disturbance used by the closed-form solutions."""

    r_x: np.ndarray          # autocorrelation matrix of x
    r_xprime: np.ndarray     # autocorrelation matrix of x' = x * s_hat
    p_dx: np.ndarray         # cross-correlation of d with x lags
    p_dxprime: np.ndarray    # cross-correlation of d with x' lags


@dataclass
class StabilityReport:
    lambda_max: float
    lambda_min: float
    mu1_bound: float          # (1 + kappa) / lambda_max
    mu2_bound: float          # 1 / lambda_max, limits varsigma * mu1
    time_constants: np.ndarray
    varsigma_mu1_ok: bool | None = None


def _autocorrelation_lags(x: np.ndarray, n_lags: int) -> np.ndarray:
    n = x.size
    return np.array([np.dot(x[k:], x[: n - k]) / n for k in range(n_lags)])


def _cross_lags(d: np.ndarray, x: np.ndarray, n_lags: int) -> np.ndarray:
    # E[d(n) x(n-k)], biased (divide by N)
    n = x.size
    return np.array([np.dot(d[k:], x[: n - k]) / n for k in range(n_lags)])


def _toeplitz(lags: np.ndarray) -> np.ndarray:
    idx = np.abs(np.subtract.outer(np.arange(lags.size), np.arange(lags.size)))
    return lags[idx]


def build_correlation_model(x, d, s_hat: FirPath, n_taps: int) -> CorrelationModel:
    """Estimate the correlation statistics from signal realizations.

    Autocorrelation matrices are Toeplitz built from biased lag
    estimates, which keeps them positive semi-definite.
    """
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if n_taps < 1:
        raise ConfigError("n_taps must be >= 1")
    if x.size < 10 * n_taps or d.size != x.size:
        raise DataError(
            f"need matching signals of length >= 10*n_taps={10 * n_taps}")
    xprime = s_hat.filter(x)
    return CorrelationModel(
        r_x=_toeplitz(_autocorrelation_lags(x, n_taps)),
        r_xprime=_toeplitz(_autocorrelation_lags(xprime, n_taps)),
        p_dx=_cross_lags(d, x, n_taps),
        p_dxprime=_cross_lags(d, xprime, n_taps),
    )


_COND_LIMIT = 1e12


def wiener_optimal(model: CorrelationModel) -> np.ndarray:
    """Unconstrained optimum: solves R_x' w = P_dx'."""
    w, _ = _checked_solve(model.r_xprime, model.p_dxprime)
    return w


def wiener_suboptimal(model: CorrelationModel, varsigma: float,
                      use_filtered_cross: bool = False) -> np.ndarray:
    """Constrained optimum: solves (varsigma R_x + R_x') w = P.

    P is the d/x cross-correlation as printed; use_filtered_cross
    selects the d/x' variant instead (see README on this ambiguity).
    """
    if varsigma < 0:
        raise ConfigError("varsigma must be >= 0")
    a = varsigma * model.r_x + model.r_xprime
    p = model.p_dxprime if use_filtered_cross else model.p_dx
    w, _ = _checked_solve(a, p)
    return w


def _checked_solve(a: np.ndarray, b: np.ndarray):
    try:
        x, jitter = linalg.solve_spd(a, b)
    except SingularMatrixError:
        cond = linalg.condition_estimate(a)
        raise SingularMatrixError(
            f"correlation matrix is singular (cond ~ {cond:.2e})", cond)
    if jitter > 0.0:
        cond = linalg.condition_estimate(a)
        if not (cond < _COND_LIMIT):
            raise SingularMatrixError(
                f"correlation matrix too ill-conditioned (cond ~ {cond:.2e})",
                cond)
    residual = np.linalg.norm(a @ x - b)
    scale = np.linalg.norm(b)
    if scale > 0 and residual > 1e-8 * scale:
        cond = linalg.condition_estimate(a)
        raise SingularMatrixError(
            f"solve residual {residual:.2e} exceeds 1e-8 * |b| (cond ~ {cond:.2e})",
            cond)
    return x, jitter


def stability_bounds(model: CorrelationModel, kappa: float,
                     varsigma: float | None = None,
                     mu1: float | None = None) -> StabilityReport:
    """Step-size bounds from the filtered-reference eigenvalues.

    mu1_bound = (1 + kappa) / lambda_max for the error-descent branch;
    the power-descent branch requires varsigma * mu1 < 1 / lambda_max.
    When mu1 is given, per-mode time constants are evaluated at it.
    """
    vals, _ = linalg.symmetric_eig(model.r_xprime)
    lam_max = float(vals[-1])
    lam_min = float(vals[0])
    if lam_max <= 0:
        raise DataError("filtered-reference correlation has no positive mode")
    mu1_bound = (1.0 + kappa) / lam_max
    mu2_bound = 1.0 / lam_max
    if mu1 is not None:
        taus = np.array([time_constant(mu1, kappa, lam) if lam > 0 else np.inf
                         for lam in vals])
    else:
        taus = np.full(vals.size, np.nan)
    ok = None
    if varsigma is not None and mu1 is not None:
        ok = bool(0.0 < varsigma * mu1 < mu2_bound) if varsigma > 0 else True
    return StabilityReport(lambda_max=lam_max, lambda_min=lam_min,
                           mu1_bound=mu1_bound, mu2_bound=mu2_bound,
                           time_constants=taus, varsigma_mu1_ok=ok)


def time_constant(mu1: float, kappa: float, lambda_min: float) -> float:
    """Samples for a weight-error mode to decay by 1/e:
    ((1 + kappa) / (1 + 2 kappa)) / (2 mu1 lambda_min)."""
    if not (mu1 > 0 and lambda_min > 0 and 0 <= kappa < 1):
        raise ConfigError("time_constant needs mu1, lambda_min > 0, 0 <= kappa < 1")
    return ((1.0 + kappa) / (1.0 + 2.0 * kappa)) / (2.0 * mu1 * lambda_min)


def welch_psd(x, sample_rate: float, segment_length: int = 4096,
              overlap: float = 0.5):
    """Averaged modified periodograms (Hann window).

    Returns (frequencies, power densities); integrating the density over
    frequency recovers the signal variance to within ~10%.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2 * segment_length:
        raise DataError(
            f"signal of {x.size} samples too short for segments of {segment_length}")
    if not (0 <= overlap < 1):
        raise ConfigError("overlap must be in [0, 1)")
    freqs, psd = sps.welch(x, fs=sample_rate, window="hann",
                           nperseg=segment_length,
                           noverlap=int(segment_length * overlap),
                           detrend=False, return_onesided=True,
                           scaling="density")
    return freqs, psd


def band_power(freqs: np.ndarray, psd: np.ndarray, low: float, high: float) -> float:
    """Integrated PSD over [low, high] Hz (trapezoidal)."""
    mask = (freqs >= low) & (freqs <= high)
    if not np.any(mask):
        raise DataError(f"no PSD bins inside [{low}, {high}] Hz")
    return float(np.trapezoid(psd[mask], freqs[mask]))
