"""Signal generation, FIR path propagation, and loudspeaker saturation.

Acoustic paths (primary, secondary, and the secondary-path model used for
reference filtering) are plain FIR filters. The loudspeaker's limited
drive capability is modeled by amplitude clipping of the control signal.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError

WHITE = "white-gaussian"
BAND_LIMITED = "band-limited"

#: FIR length used to synthesize band-limited noise (order 255).
BANDPASS_TAPS = 256


class FirPath:
    """A finite impulse response acoustic path.

    Attributes:
        coefficients: tap values, index k is the gain at a delay of k samples.
    """

    def __init__(self, coefficients):
        coef = np.asarray(coefficients, dtype=np.float64)
        if coef.ndim != 1 or coef.size < 1:
            raise ConfigError("FirPath needs a non-empty 1-D coefficient list")
        if not np.all(np.isfinite(coef)):
            raise ConfigError("FirPath coefficients must be finite")
        coef = coef.copy()
        coef.flags.writeable = False
        self.coefficients = coef

    def __len__(self) -> int:
        return self.coefficients.size

    def __repr__(self) -> str:
        return f"FirPath({self.coefficients.tolist()})"

    def power_gain(self) -> float:
        """White-noise power gain of the path: sum of squared taps."""
        return float(np.dot(self.coefficients, self.coefficients))

    def filter(self, x: np.ndarray) -> np.ndarray:
        """Causal batch convolution, truncated to the input length."""
        x = np.asarray(x, dtype=np.float64)
        return np.convolve(x, self.coefficients)[: x.size]


def convolve_stream(path: FirPath, input_history) -> float:
    """One output sample of `path` given recent inputs, newest first.

    input_history[k] is the input k samples ago; it must cover at least
    the path length (streams are zero-padded before their start, so the
    caller pads with zeros early on).
    """
    hist = np.asarray(input_history, dtype=np.float64)
    n = len(path)
    if hist.size < n:
        raise DataError(f"history of {hist.size} samples < path length {n}")
    window = hist[:n]
    if not np.all(np.isfinite(window)):
        raise DataError("non-finite sample in convolution history")
    return float(np.dot(path.coefficients, window))


class StreamingFir:
    """Sample-at-a-time FIR with swappable coefficients.

    Equivalent to batch convolution over the whole input seen so far;
    swapping coefficients keeps the input history, so the new response
    applies to in-flight samples as well.
    """

    def __init__(self, path: FirPath):
        self._coef = path.coefficients
        self._hist = np.zeros(len(path))

    def push(self, x: float) -> float:
        if not np.isfinite(x):
            raise DataError("non-finite input sample")
        self._hist[1:] = self._hist[:-1]
        self._hist[0] = x
        return float(np.dot(self._coef, self._hist))

    def swap(self, path: FirPath) -> None:
        old = self._hist
        self._coef = path.coefficients
        self._hist = np.zeros(len(path))
        keep = min(old.size, self._hist.size)
        self._hist[:keep] = old[:keep]


class SaturationModel:
    """Amplitude clipping of the loudspeaker drive signal.

    The default clips both polarities at ±clip_threshold; "upper-only"
    clips only positive excursions (the as-printed textbook form).
    """

    MODES = ("symmetric", "upper-only")

    def __init__(self, clip_threshold: float, mode: str = "symmetric"):
        if not (clip_threshold > 0):
            raise ConfigError("clip_threshold must be > 0")
        if mode not in self.MODES:
            raise ConfigError(f"saturation mode must be one of {self.MODES}")
        self.clip_threshold = float(clip_threshold)
        self.mode = mode


def saturate(y: float, model: SaturationModel) -> float:
    """Clip a drive sample to the loudspeaker's capability."""
    t = model.clip_threshold
    if model.mode == "upper-only":
        return y if y < t else t
    if y > t:
        return t
    if y < -t:
        return -t
    return y


class NoiseSource:
    """Seeded primary-noise generator (white Gaussian or band-limited).

    Band-limited noise is white Gaussian filtered by a linear-phase
    bandpass FIR (windowed design, 256 taps) and rescaled so the output
    variance matches the requested one. Identical seeds produce
    bit-identical sequences.
    """

    def __init__(self, kind: str, variance: float, band=None,
                 sample_rate: float = 16000.0, seed: int = 0):
        if kind not in (WHITE, BAND_LIMITED):
            raise ConfigError(f"unknown noise kind {kind!r}")
        # variance 0 is the degenerate silent source used by edge-case runs
        if not (variance >= 0):
            raise ConfigError("noise variance must be >= 0")
        if kind == BAND_LIMITED:
            if band is None:
                raise ConfigError("band-limited noise needs a (low, high) band")
            low, high = float(band[0]), float(band[1])
            if not (0 < low < high < sample_rate / 2):
                raise ConfigError(
                    "band must satisfy 0 < low < high < sample_rate/2")
            band = (low, high)
        self.kind = kind
        self.variance = float(variance)
        self.band = band
        self.sample_rate = float(sample_rate)
        self.seed = int(seed)

    def generate(self, n: int) -> np.ndarray:
        """Produce n samples; deterministic for a fixed seed."""
        if n < 1:
            raise ConfigError("sample count must be >= 1")
        rng = np.random.default_rng(self.seed)
        sigma = np.sqrt(self.variance)
        if self.kind == WHITE:
            return sigma * rng.standard_normal(n)
        taps = bandpass_taps(self.band[0], self.band[1], self.sample_rate)
        white = rng.standard_normal(n + taps.size)
        shaped = sps.lfilter(taps, 1.0, white)[taps.size:]
        # dividing by the filter L2 gain restores the requested variance
        return sigma * shaped / np.sqrt(np.dot(taps, taps))


def bandpass_taps(low: float, high: float, sample_rate: float) -> np.ndarray:
    """Linear-phase bandpass FIR used for noise synthesis."""
    return sps.firwin(BANDPASS_TAPS, [low, high], pass_zero=False,
                      window="hamming", fs=sample_rate)
