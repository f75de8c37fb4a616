"""Power spectra of queue series: periodogram, log-binning, slope fit, periodic peaks."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import signal

from .timeseries import QueueSeries

DAY = 86400.0
DEFAULT_BAND = (1.0 / (14 * DAY), 1.0 / 1800.0)


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralEstimate:
    frequencies: np.ndarray
    power: np.ndarray
    binned_frequencies: np.ndarray | None = None
    binned_power: np.ndarray | None = None
    bin_edges: np.ndarray | None = None
    slope: float | None = None
    slope_band: tuple[float, float] | None = None
    peaks: tuple = field(default=())

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if f.shape != p.shape:
            raise ValueError("frequencies and power differ in length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if np.any(p < 0):
            raise ValueError("power must be non-negative")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "power", p)

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0]) if len(self.frequencies) > 1 else math.nan

    def _binned(self):
        if self.binned_frequencies is None:
            return self.frequencies, self.power
        return self.binned_frequencies, self.binned_power


def _require_uniform(series) -> QueueSeries:
    if not isinstance(series, QueueSeries):
        raise SpectrumError("spectral estimation needs a uniformly sampled QueueSeries; "
                            "resample irregular data with the timeseries module first")
    return series


def periodogram(series: QueueSeries, detrend: bool = False, segments: int = 1) -> SpectralEstimate:
    """One-sided PSD of the mean-removed series, zero frequency excluded.

    With ``segments == 1`` this is the raw FFT periodogram and satisfies
    ``sum(power) * df == var(x)`` exactly. ``segments > 1`` averages Hann-windowed
    segments with 50% overlap (Welch).
    """
    series = _require_uniform(series)
    x = np.asarray(series.values, dtype=float)
    n = len(x)
    if n < 16:
        raise SpectrumError(f"need at least 16 samples, got {n}")
    fs = 1.0 / series.dt
    kind = "linear" if detrend else "constant"
    if segments <= 1:
        x = signal.detrend(x, type=kind)
        X = np.fft.rfft(x)
        p = np.abs(X) ** 2 * (series.dt / n)
        p[1:] *= 2.0
        if n % 2 == 0:
            p[-1] /= 2.0
        f = np.fft.rfftfreq(n, series.dt)
    else:
        nperseg = int(2 * n // (segments + 1))
        f, p = signal.welch(x, fs=fs, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
                            detrend=kind, scaling="density", return_onesided=True)
    return SpectralEstimate(frequencies=f[1:], power=p[1:])


def log_bin(spectrum: SpectralEstimate, bins_per_decade: int = 10) -> SpectralEstimate:
    """Average the spectrum over geometrically spaced frequency bins.

    Edges are ``f_min * 10**(i / bins_per_decade)``; bin centres are the
    geometric mean of member frequencies; empty bins are dropped.
    """
    f, p = spectrum.frequencies, spectrum.power
    if len(f) == 0:
        raise SpectrumError("empty spectrum")
    lf = np.log10(f)
    idx = np.floor((lf - lf[0]) * bins_per_decade + 1e-9).astype(int)
    counts = np.bincount(idx)
    used = counts > 0
    pw = np.bincount(idx, weights=p)[used] / counts[used]
    fc = 10 ** (np.bincount(idx, weights=lf)[used] / counts[used])
    edges = f[0] * 10.0 ** (np.arange(len(counts) + 1) / bins_per_decade)
    return replace(spectrum, binned_frequencies=fc, binned_power=pw, bin_edges=edges)


def fit_slope(spectrum: SpectralEstimate, f_lo: float = DEFAULT_BAND[0], f_hi: float = DEFAULT_BAND[1],
              min_points: int = 5) -> float:
    """OLS slope of ``log10 P`` on ``log10 f`` over ``[f_lo, f_hi]``.

    Uses the binned spectrum when present, otherwise the raw one.
    """
    f, p = spectrum._binned()
    sel = (f >= f_lo) & (f <= f_hi) & (p > 0)
    if sel.sum() < min_points:
        raise SpectrumError(f"only {int(sel.sum())} points in band [{f_lo:.3g}, {f_hi:.3g}] Hz; "
                            f"need {min_points}")
    x, y = np.log10(f[sel]), np.log10(p[sel])
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def with_slope(spectrum: SpectralEstimate, band=DEFAULT_BAND) -> SpectralEstimate:
    return replace(spectrum, slope=fit_slope(spectrum, *band), slope_band=tuple(band))


@dataclass(frozen=True)
class Peak:
    period: float
    frequency: float
    power: float
    prominence: float


def local_background(spectrum: SpectralEstimate, half_width_bins: float = 5.0,
                     bins_per_decade: int = 10, resolution: int = 200) -> np.ndarray:
    """Median power within +-``half_width_bins`` log-bins around every frequency.

    The median is evaluated exactly at one frequency per ``1/resolution``
    decade (every frequency where the grid is sparser than that) and linearly
    interpolated in between.
    """
    f, p = spectrum.frequencies, spectrum.power
    lf = np.log10(f)
    w = half_width_bins / bins_per_decade
    cell = np.floor((lf - lf[0]) * resolution).astype(np.int64)
    at = np.unique(np.r_[np.unique(cell, return_index=True)[1], len(f) - 1])
    lo = np.searchsorted(lf, lf[at] - w, side="left")
    hi = np.searchsorted(lf, lf[at] + w, side="right")
    med = np.array([np.median(p[a:b]) for a, b in zip(lo, hi)])
    return np.interp(lf, lf[at], med)


def detect_peaks(spectrum: SpectralEstimate, band: tuple[float, float] = (1800.0, 14 * DAY),
                 threshold: float = 5.0, bins_per_decade: int = 10) -> list[Peak]:
    """Local maxima at least ``threshold`` times the local background.

    ``band`` is ``(period_lo, period_hi)`` in seconds. Peaks closer than half a
    log-bin to a stronger one are merged into it. Sorted by prominence.
    """
    f, p = spectrum.frequencies, spectrum.power
    if len(f) < 3:
        return []
    bg = local_background(spectrum, bins_per_decade=bins_per_decade)
    floor = 1e-12 * p.max()
    bg = np.maximum(bg, floor)
    period = 1.0 / f
    is_max = np.zeros(len(f), dtype=bool)
    is_max[1:-1] = (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])
    prom = p / bg
    cand = np.flatnonzero(is_max & (prom >= threshold) & (period >= band[0]) & (period <= band[1]))
    cand = cand[np.argsort(-prom[cand], kind="stable")]
    half_bin = 0.5 / bins_per_decade
    kept: list[int] = []
    for i in cand:
        if all(abs(math.log10(f[i] / f[j])) > half_bin for j in kept):
            kept.append(i)
    return [Peak(period=float(period[i]), frequency=float(f[i]), power=float(p[i]), prominence=float(prom[i]))
            for i in kept]


def to_period_domain(spectrum: SpectralEstimate, binned: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """``(period, power)`` with periods ascending."""
    f, p = spectrum._binned() if binned else (spectrum.frequencies, spectrum.power)
    if np.any(f <= 0):
        raise SpectrumError("period transform needs strictly positive frequencies")
    return (1.0 / f)[::-1], p[::-1]


def to_frequency_domain(period: np.ndarray, power: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return (1.0 / np.asarray(period))[::-1], np.asarray(power)[::-1]


def analyze(series: QueueSeries, band=DEFAULT_BAND, bins_per_decade: int = 10, segments: int = 1,
            detrend: bool = False, peak_band=(1800.0, 14 * DAY), threshold: float = 5.0) -> SpectralEstimate:
    """Periodogram, log-binning, slope over ``band`` and peak detection in one pass."""
    spec = log_bin(periodogram(series, detrend=detrend, segments=segments), bins_per_decade)
    spec = with_slope(spec, band)
    peaks = detect_peaks(spec, peak_band, threshold, bins_per_decade)
    return replace(spec, peaks=tuple(peaks))


def write_spectrum_csv(spectrum: SpectralEstimate, path, binned: bool = False) -> None:
    if binned:
        f, p = spectrum.binned_frequencies, spectrum.binned_power
        lines = ["bin_center_hz,bin_period_s,bin_power"]
    else:
        f, p = spectrum.frequencies, spectrum.power
        lines = ["frequency_hz,period_s,power"]
    lines += [f"{a!r},{1.0 / a!r},{b!r}" for a, b in zip(f.tolist(), p.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def report_dict(spectrum: SpectralEstimate) -> dict:
    return {
        "slope": spectrum.slope,
        "slope_band_hz": list(spectrum.slope_band) if spectrum.slope_band else None,
        "peaks": [{"period_s": pk.period, "frequency_hz": pk.frequency, "power": pk.power,
                   "prominence": pk.prominence} for pk in spectrum.peaks],
    }


def write_report(spectrum: SpectralEstimate, path) -> None:
    Path(path).write_text(json.dumps(report_dict(spectrum), indent=2, sort_keys=True) + "\n")
