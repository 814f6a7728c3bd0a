"""Adaptive control algorithms for output-constrained ANC.

All four controllers share the same per-sample interface. With the
error e(n), drive signal y(n) = w(n)^T x(n), reference vector x(n) and
filtered reference x'(n) (reference filtered by the secondary-path
model), the updates are:

  fxlms:          w <- w + mu1 * e * x'
  rescaling:      fxlms update, then scale w by sqrt(rho^2 / P) if the
                  drive-power estimate P exceeds rho^2
  2gd:            within the constraint (P <= rho^2) same as fxlms;
                  otherwise descend the drive power instead,
                  w <- w - varsigma * mu1 * y * x, and geometrically
                  decay mu1 toward mu_min (variable step size)
  2gd-momentum:   within the constraint the gradient is accumulated,
                  zeta <- kappa * zeta + mu1 * e * x', w <- w + zeta;
                  outside it behaves like 2gd and the accumulator is
                  reset (configurable)

Note the constrained branch deliberately uses the *unfiltered*
reference x: the drive power y^2 depends on w only through w^T x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergedError

ALGORITHMS = ("fxlms", "rescaling", "2gd", "2gd-momentum-vss")

BRANCH_WITHIN = "within"
BRANCH_EXCEEDED = "exceeded"

MOMENTUM_MODES = ("reset", "freeze", "decay")


@dataclass
class AlgorithmConfig:
    """Parameters shared by the controller family.

    varsigma may be a fixed value or the string "derived", in which case
    the harness computes it from the secondary-path power gain and the
    measured disturbance power before the run starts.
    """

    algorithm: str = "2gd-momentum-vss"
    mu1_initial: float = 1e-5
    mu_min: float = 1e-6
    gamma: float = 0.9
    kappa: float = 0.99
    rho_sq: float = 1.0
    varsigma: float | str = 0.85
    power_smoothing: float = 0.99
    momentum_mode: str = "reset"
    # audit option: apply Eq-style min() literally instead of the floor
    vss_literal_min: bool = False
    sigma_d_sq_override: float | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.mu1_initial < 0:
            raise ConfigError("mu1_initial must be >= 0")
        if not (self.mu_min > 0):
            raise ConfigError("mu_min must be > 0")
        # mu1_initial == 0 freezes adaptation (signal-flow checks)
        if self.mu1_initial > 0 and self.mu_min > self.mu1_initial:
            raise ConfigError("mu_min must satisfy mu_min <= mu1_initial")
        if not (0 < self.gamma < 1):
            raise ConfigError("gamma must be in (0, 1)")
        if not (abs(self.kappa) < 1):
            raise ConfigError("|kappa| < 1 is required for stability")
        if not (self.rho_sq > 0):
            raise ConfigError("rho_sq must be > 0")
        if isinstance(self.varsigma, str):
            if self.varsigma != "derived":
                raise ConfigError("varsigma must be a number or 'derived'")
        elif not (self.varsigma >= 0):
            raise ConfigError("varsigma must be >= 0")
        if not (0 < self.power_smoothing < 1):
            raise ConfigError("power_smoothing must be in (0, 1)")
        if self.momentum_mode not in MOMENTUM_MODES:
            raise ConfigError(f"momentum_mode must be one of {MOMENTUM_MODES}")


class FilteredReferenceState:
    """Rolling reference and filtered-reference windows (newest first).

    The filtered window is the reference passed through the secondary
    path model s_hat; `check()` re-derives it from the raw history to
    verify consistency on demand. Window length covers the control
    filter, so its vectors feed the weight updates directly.
    """

    def __init__(self, secondary_model, n_taps: int):
        if n_taps < 1:
            raise ConfigError("window needs at least one tap")
        self.secondary_model = secondary_model
        self._raw = np.zeros(n_taps + len(secondary_model) - 1)
        self.reference = self._raw[:n_taps]
        self.filtered = np.zeros(n_taps)

    def push(self, x: float) -> float:
        """Insert a reference sample; returns the new filtered sample."""
        self._raw[1:] = self._raw[:-1]
        self._raw[0] = x
        coef = self.secondary_model.coefficients
        new_filtered = float(np.dot(coef, self._raw[:coef.size]))
        self.filtered[1:] = self.filtered[:-1]
        self.filtered[0] = new_filtered
        return new_filtered

    def check(self, atol: float = 1e-12) -> bool:
        """Filtered window equals the raw window convolved with s_hat."""
        coef = self.secondary_model.coefficients
        expected = np.array([
            float(np.dot(coef, self._raw[k:k + coef.size]))
            for k in range(self.filtered.size)])
        return bool(np.allclose(self.filtered, expected, atol=atol))


def estimate_output_power(previous: float, y: float, alpha: float) -> float:
    """Exponentially smoothed drive-power estimate.

    Returns alpha * previous + (1 - alpha) * y^2; with constant |y| the
    estimate converges geometrically to y^2.
    """
    if not (0 < alpha < 1):
        raise ConfigError("smoothing factor alpha must be in (0, 1)")
    return alpha * previous + (1.0 - alpha) * y * y


def lagrangian_factor(secondary_power_gain: float, sigma_d_sq: float,
                      rho_sq: float) -> float:
    """Penalty factor coupling the two gradient directions.

    varsigma = G_s * (eta - 1) with eta^2 = max(sigma_d^2 / (G_s rho^2), 1),
    where G_s is the secondary path's power gain. Returns exactly 0 when
    the disturbance power already fits the constraint.
    """
    if not (secondary_power_gain > 0 and sigma_d_sq > 0 and rho_sq > 0):
        raise ConfigError("lagrangian_factor needs strictly positive inputs")
    eta = np.sqrt(max(sigma_d_sq / (secondary_power_gain * rho_sq), 1.0))
    return float(secondary_power_gain * (eta - 1.0))


class Controller:
    """Base class holding the adaptive state advanced one sample at a time."""

    def __init__(self, config: AlgorithmConfig, n_taps: int,
                 varsigma: float | None = None):
        if n_taps < 1:
            raise ConfigError("controller needs at least one tap")
        if varsigma is None:
            if isinstance(config.varsigma, str):
                raise ConfigError(
                    "varsigma='derived' requires a resolved value; "
                    "pass varsigma= explicitly")
            varsigma = float(config.varsigma)
        self.config = config
        self.n_taps = int(n_taps)
        self.varsigma = float(varsigma)
        self.weights = np.zeros(n_taps)
        self.momentum = np.zeros(n_taps)
        self.mu1 = float(config.mu1_initial)
        self.power_estimate = 0.0
        self.last_branch = BRANCH_WITHIN
        self.diverged = False
        # scratch buffer so steps do not allocate
        self._tmp = np.empty(n_taps)

    # -- shared machinery -------------------------------------------------

    def update_power(self, y: float) -> float:
        self.power_estimate = estimate_output_power(
            self.power_estimate, y, self.config.power_smoothing)
        return self.power_estimate

    def _check_finite(self, e: float) -> None:
        if not np.isfinite(e):
            self.diverged = True
            raise DivergedError("non-finite error sample")

    def _check_weights(self) -> None:
        if not np.all(np.isfinite(self.weights)):
            self.diverged = True
            raise DivergedError("controller weights became non-finite")

    def _fxlms_update(self, xprime_vec: np.ndarray, e: float) -> None:
        np.multiply(xprime_vec, self.mu1 * e, out=self._tmp)
        self.weights += self._tmp

    def _power_descent(self, x_vec: np.ndarray, y: float) -> None:
        np.multiply(x_vec, self.varsigma * self.mu1 * y, out=self._tmp)
        self.weights -= self._tmp

    def _decay_step_size(self) -> None:
        c = self.config
        if c.vss_literal_min:
            self.mu1 = min(c.gamma * self.mu1, c.mu_min)
        else:
            self.mu1 = max(c.gamma * self.mu1, c.mu_min)

    # -- per-sample interface ----------------------------------------------

    def step(self, x_vec: np.ndarray, xprime_vec: np.ndarray,
             e: float, y: float) -> None:
        """Advance one sample. Updates the power estimate, picks the
        branch, and applies this algorithm's weight update."""
        self._check_finite(e)
        self.update_power(y)
        self.last_branch = (BRANCH_WITHIN
                            if self.power_estimate <= self.config.rho_sq
                            else BRANCH_EXCEEDED)
        self._update(x_vec, xprime_vec, e, y)
        self._check_weights()

    def _update(self, x_vec, xprime_vec, e, y):
        raise NotImplementedError


class FxlmsController(Controller):
    """Plain filtered-x LMS; ignores the output constraint."""

    def _update(self, x_vec, xprime_vec, e, y):
        self._fxlms_update(xprime_vec, e)


class RescalingController(Controller):
    """FXLMS with a power projection back onto the constraint."""

    def _update(self, x_vec, xprime_vec, e, y):
        self._fxlms_update(xprime_vec, e)
        if self.power_estimate > self.config.rho_sq:
            self.weights *= np.sqrt(self.config.rho_sq / self.power_estimate)


class TwoGradientController(Controller):
    """Two-gradient-direction algorithm with variable step size."""

    def _update(self, x_vec, xprime_vec, e, y):
        if self.last_branch == BRANCH_WITHIN:
            self._fxlms_update(xprime_vec, e)
        else:
            self._power_descent(x_vec, y)
            self._decay_step_size()


class MomentumTwoGradientController(Controller):
    """Two-gradient-direction algorithm with a momentum accumulator."""

    def _update(self, x_vec, xprime_vec, e, y):
        c = self.config
        if self.last_branch == BRANCH_WITHIN:
            self.momentum *= c.kappa
            np.multiply(xprime_vec, self.mu1 * e, out=self._tmp)
            self.momentum += self._tmp
            self.weights += self.momentum
        else:
            self._power_descent(x_vec, y)
            self._decay_step_size()
            if c.momentum_mode == "reset":
                self.momentum[:] = 0.0
            elif c.momentum_mode == "decay":
                self.momentum *= c.kappa
            # "freeze" keeps the accumulator untouched


CONTROLLERS = {
    "fxlms": FxlmsController,
    "rescaling": RescalingController,
    "2gd": TwoGradientController,
    "2gd-momentum-vss": MomentumTwoGradientController,
}


def make_controller(config: AlgorithmConfig, n_taps: int,
                    varsigma: float | None = None) -> Controller:
    """Instantiate the controller named by config.algorithm."""
    cls = CONTROLLERS[config.algorithm]
    return cls(config, n_taps, varsigma)
