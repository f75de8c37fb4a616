"""Time-varying mean from the dominant periodicity and its surrounding harmonics."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .timeseries import QueueSeries

logger = logging.getLogger(__name__)


class NoPeriodicityError(ValueError):
    pass


@dataclass(frozen=True)
class SeasonalTrend:
    """Sum of cosines ``A cos(omega t + phase)``, rescaled as ``scale * raw + shift``.

    ``t`` is seconds from the start of the fitting window; ``omega`` is in rad/s.
    """

    harmonics: tuple[tuple[float, float, float], ...] = ()
    baseline: float = 0.0
    normalization: tuple[float, float] = (1.0, 0.0)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        h = tuple((float(a), float(w), float(p)) for a, w, p in self.harmonics)
        omegas = [w for _, w, _ in h]
        if any(w <= 0 for w in omegas) or len(set(omegas)) != len(omegas):
            raise ValueError("harmonic frequencies must be distinct and positive")
        object.__setattr__(self, "harmonics", h)
        object.__setattr__(self, "normalization", tuple(map(float, self.normalization)))

    @classmethod
    def from_harmonics(cls, harmonics, grid, baseline: float = 0.0) -> SeasonalTrend:
        """Build a trend normalized to zero mean and unit variance on ``grid`` (seconds)."""
        raw = cls(harmonics=harmonics).raw(np.asarray(grid, dtype=float))
        sd = raw.std()
        if len(harmonics) == 0 or sd == 0:
            return cls(harmonics=(), baseline=baseline)
        scale = 1.0 / sd
        return cls(harmonics=harmonics, baseline=baseline, normalization=(scale, -raw.mean() * scale))

    def raw(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for a, w, p in self.harmonics:
            out += a * np.cos(w * t + p)
        return out

    def normalized(self, t) -> np.ndarray:
        scale, shift = self.normalization
        if not self.harmonics:
            return np.zeros(np.shape(t))
        return scale * self.raw(t) + shift

    def fundamental_period(self) -> float:
        """Common period of all retained harmonics (seconds), or ``inf`` if none."""
        if not self.harmonics:
            return math.inf
        w0 = min(w for _, w, _ in self.harmonics)
        ratios = [Fraction(w / w0).limit_denominator(10000) for _, w, _ in self.harmonics]
        den = math.lcm(*(r.denominator for r in ratios))
        g = math.gcd(*(r.numerator * (den // r.denominator) for r in ratios))
        return 2 * math.pi * den / (w0 * g)

    def to_dict(self) -> dict:
        return {
            "harmonics": [{"A": a, "omega": w, "phase": p} for a, w, p in self.harmonics],
            "baseline": self.baseline,
            "normalization": {"scale": self.normalization[0], "shift": self.normalization[1]},
        }

    @classmethod
    def from_dict(cls, d: dict) -> SeasonalTrend:
        return cls(harmonics=tuple((h["A"], h["omega"], h["phase"]) for h in d["harmonics"]),
                   baseline=d["baseline"],
                   normalization=(d["normalization"]["scale"], d["normalization"]["shift"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> SeasonalTrend:
        return cls.from_dict(json.loads(Path(path).read_text()))


def acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation at lags ``0..max_lag`` via FFT."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = len(x)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    r = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    if r[0] == 0:
        return np.zeros(max_lag + 1)
    return r / r[0]


def dominant_period(series: QueueSeries, max_lag: int | None = None, alpha: float = 0.05) -> float:
    """Lag (in seconds) of the highest significant local maximum of the ACF.

    Maxima inside the initial decay of the ACF are ignored. A maximum counts only if it clears the white-noise band at family-wise
    level ``alpha`` over all ``max_lag`` lags (Bonferroni).
    """
    n = len(series)
    if max_lag is None:
        max_lag = n // 2
    if max_lag < 2 or n < 2 * max_lag:
        raise ValueError(f"series of length {n} too short for max_lag={max_lag}")
    r = acf(series.values, max_lag)
    mid = r[1:-1]
    is_max = (mid > r[:-2]) & (mid >= r[2:])
    lags = np.flatnonzero(is_max) + 1
    # Noise ripples on the initial decay are not periods: only look past the
    # first zero crossing, or past the first local minimum if there is none.
    below = np.flatnonzero(r <= 0)
    if len(below):
        start = below[0]
    else:
        minima = np.flatnonzero((mid < r[:-2]) & (mid <= r[2:])) + 1
        start = minima[0] if len(minima) else max_lag
    lags = lags[lags > start]
    band = norm.ppf(1 - alpha / (2 * max_lag)) / math.sqrt(n)
    lags = lags[r[lags] > band]
    if len(lags) == 0:
        raise NoPeriodicityError("no significant ACF local maximum; a longer series may be needed")
    return float(lags[np.argmax(r[lags])]) * series.dt


def smoothing_gain(k, n: int, window: int) -> np.ndarray:
    """Frequency response of a centered circular moving mean at DFT bin ``k``."""
    k = np.asarray(k, dtype=float)
    x = np.pi * k / n
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.sin(window * x) / (window * np.sin(x))
    return np.where(k % n == 0, 1.0, g)


def extract_trend(series: QueueSeries, n_harmonics: int = 12, max_lag: int | None = None,
                  smooth_window: int = 5, period: float | None = None) -> SeasonalTrend:
    """Keep the strongest FFT bins around the dominant frequency.

    Bins within ``[f_dom / 4, 4 f_dom]`` of the zero-mean series are ranked by
    magnitude and the top ``n_harmonics`` retained. Smoothing is a centered
    moving mean of ``smooth_window`` samples, applied as a gain on each
    harmonic so the trend stays a pure sum of cosines.
    """
    x = np.asarray(series.values, dtype=float)
    n = len(x)
    if n < 2 * n_harmonics:
        raise ValueError(f"need at least {2 * n_harmonics} samples, got {n}")
    baseline = float(x.mean())
    z = x - baseline
    if not np.any(z):
        return SeasonalTrend(baseline=baseline)
    if period is None:
        period = dominant_period(series, max_lag)
    f_dom = 1.0 / period
    df = 1.0 / (n * series.dt)
    X = np.fft.rfft(z)
    k = np.arange(len(X))
    f = k * df
    cand = k[(k > 0) & (f >= f_dom / 4) & (f <= 4 * f_dom)]
    warnings = ()
    if len(cand) < n_harmonics:
        msg = f"only {len(cand)} candidate bins in band, fewer than {n_harmonics}"
        logger.warning(msg)
        warnings = (msg,)
    mag = np.abs(X[cand])
    keep = np.sort(cand[np.argsort(-mag, kind="stable")[:n_harmonics]])
    amp = 2.0 * np.abs(X[keep]) / n
    amp[keep * 2 == n] /= 2.0
    amp *= smoothing_gain(keep, n, smooth_window)
    phase = np.angle(X[keep])
    neg = amp < 0
    amp[neg] = -amp[neg]
    phase[neg] += np.pi
    omega = 2.0 * np.pi * keep * df
    harmonics = tuple(zip(amp.tolist(), omega.tolist(), phase.tolist()))
    trend = SeasonalTrend.from_harmonics(harmonics, series.dt * np.arange(n), baseline=baseline)
    return SeasonalTrend(harmonics=trend.harmonics, baseline=baseline,
                         normalization=trend.normalization, warnings=warnings)


def evaluate_phi(trend: SeasonalTrend | None, params, t):
    """Time-varying mean ``mu_base + mu_amp * normalized_trend(t)`` in vehicles."""
    if trend is None:
        return np.full(np.shape(t), float(params.mu_base))
    return params.mu_base + params.mu_amp * trend.normalized(t)


DAY = 86400.0


def diurnal_trend(weights=(1.0, 0.8, 0.4, 0.2), phases=None, dt: float = 120.0) -> SeasonalTrend:
    """Synthetic demand profile: 24 h fundamental plus harmonics at 12, 8, 6 h, ...

    ``weights[i]`` is the amplitude of the ``(i+1)``-th harmonic of one day.
    """
    if phases is None:
        phases = [-0.6 * (i + 1) for i in range(len(weights))]
    harmonics = tuple((float(a), 2 * math.pi * (i + 1) / DAY, float(p))
                      for i, (a, p) in enumerate(zip(weights, phases)) if a != 0)
    return SeasonalTrend.from_harmonics(harmonics, np.arange(0.0, DAY, dt))
