"""Simulated-versus-observed comparison: smoothed correlation, distributions, spectra."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .timeseries import QueueSeries, centered_mean


class ValidationError(ValueError):
    pass


@dataclass
class ValidationReport:
    pearson_r: float
    ks_distance: float
    slope_sim: float | None
    slope_obs: float | None
    scatter: list = field(default_factory=list, repr=False)
    n: int = 0
    ks_critical_99: float = math.nan

    def __post_init__(self):
        if not -1.0 - 1e-12 <= self.pearson_r <= 1.0 + 1e-12:
            raise ValueError("pearson_r outside [-1, 1]")
        if not 0.0 <= self.ks_distance <= 1.0:
            raise ValueError("ks_distance outside [0, 1]")

    def to_dict(self) -> dict:
        return {"pearson_r": self.pearson_r, "ks_distance": self.ks_distance, "ks_critical_99": self.ks_critical_99,
                "slope_sim": self.slope_sim, "slope_obs": self.slope_obs, "n": self.n}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_scatter_csv(self, path) -> None:
        lines = ["t,observed,simulated"] + [f"{t!r},{o!r},{s!r}" for t, o, s in self.scatter]
        Path(path).write_text("\n".join(lines) + "\n")


def _values(x) -> np.ndarray:
    return np.asarray(x.values if isinstance(x, QueueSeries) else x, dtype=float)


def pearson(observed, simulated, smooth_window: int = 10) -> float:
    """Pearson correlation after a centered moving average of ``smooth_window`` samples."""
    a, b = _values(observed), _values(simulated)
    if len(a) != len(b):
        raise ValidationError(f"length mismatch: {len(a)} observed vs {len(b)} simulated")
    a = centered_mean(a, smooth_window)
    b = centered_mean(b, smooth_window)
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if den == 0:
        raise ValidationError("correlation undefined for a zero-variance series")
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic from the empirical CDFs."""
    a = np.sort(_values(a))
    b = np.sort(_values(b))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / len(a)
    cdf_b = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample critical value ``c(alpha) sqrt((n + m) / (n m))``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    return c * math.sqrt((n + m) / (n * m))


def sturges_bins(n: int) -> int:
    return int(math.ceil(math.log2(n))) + 1 if n > 0 else 1


def pdf_compare(observed, simulated, bins: int | None = None):
    """Density histograms on a shared grid plus the KS distance.

    Returns ``(edges, density_observed, density_simulated, ks)``.
    """
    a, b = _values(observed), _values(simulated)
    if len(a) == 0 or len(b) == 0:
        raise ValidationError("pdf comparison needs non-empty series")
    if bins is None:
        bins = sturges_bins(max(len(a), len(b)))
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    da, _ = np.histogram(a, edges, density=True)
    db, _ = np.histogram(b, edges, density=True)
    return edges, da, db, ks_distance(a, b)


def _slope(series: QueueSeries, band, segments: int) -> float | None:
    try:
        return spectral.analyze(series, band=band, segments=segments).slope
    except spectral.SpectrumError:
        return None


def build_report(observed: QueueSeries, simulated: QueueSeries, smooth_window: int = 10,
                 band=spectral.DEFAULT_BAND, segments: int = 1) -> ValidationReport:
    """All comparison metrics for two time-aligned series."""
    if len(observed) != len(simulated):
        raise ValidationError(f"length mismatch: {len(observed)} observed vs {len(simulated)} simulated")
    if observed.dt != simulated.dt:
        raise ValidationError("series are sampled at different intervals")
    r = pearson(observed, simulated, smooth_window)
    ks = ks_distance(observed, simulated)
    n = len(observed)
    t = observed.times.tolist()
    scatter = list(zip(t, observed.values.tolist(), simulated.values.tolist()))
    return ValidationReport(pearson_r=r, ks_distance=ks, slope_sim=_slope(simulated, band, segments),
                            slope_obs=_slope(observed, band, segments), scatter=scatter, n=n,
                            ks_critical_99=ks_critical(n, n))
