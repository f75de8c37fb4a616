"""Stochastic queue-length modelling for signalized intersections.

Fractional-noise driven mean-reverting queue dynamics, seasonal trend
extraction, spectral analysis, simplex calibration and validation metrics.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .kernels import BACKEND
from .timeseries import QueueSeries, CleaningConfig, load_csv, write_csv, clean
from .fbm import generate_fbm, fgn
from .queue_sde import SdeParams, VolParams, SimConfig, simulate, simulate_queue
from .seasonal import SeasonalTrend, extract_trend, diurnal_trend
from .spectral import analyze
from .calibration import CalibrationConfig, CalibrationResult, calibrate
from .validation import ValidationReport, build_report

__all__ = [
    "__version__", "BACKEND", "QueueSeries", "CleaningConfig", "load_csv", "write_csv", "clean",
    "generate_fbm", "fgn", "SdeParams", "VolParams", "SimConfig", "simulate", "simulate_queue",
    "SeasonalTrend", "extract_trend", "diurnal_trend", "analyze", "CalibrationConfig",
    "CalibrationResult", "calibrate", "ValidationReport", "build_report",
]
