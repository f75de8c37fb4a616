"""Queue-length series: CSV ingestion, outlier cleaning, cycle aggregation, smoothing."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CSV_HEADER = ("timestamp", "queue_len")


class ParseError(ValueError):
    """A CSV row could not be parsed."""


class FormatError(ValueError):
    """The file parsed but violates the time-series layout (ordering, uniformity)."""


@dataclass(frozen=True, eq=False)
class QueueSeries:
    """Uniformly sampled queue lengths.

    ``values`` and ``cleaned_mask`` are stored as read-only arrays.
    """

    values: np.ndarray
    dt: float = 120.0
    start_time: float = 0.0
    cleaned_mask: np.ndarray | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if np.any(vals < 0):
            raise ValueError("queue lengths must be non-negative")
        if self.cleaned_mask is None:
            mask = np.zeros(vals.shape, dtype=bool)
        else:
            mask = np.array(self.cleaned_mask, dtype=bool)
            if mask.shape != vals.shape:
                raise ValueError("cleaned_mask must match values in length")
        vals.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "cleaned_mask", mask)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self):
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.dt * np.arange(len(self.values))

    @property
    def span(self) -> float:
        return self.dt * len(self.values)

    def replace(self, **kw) -> QueueSeries:
        args = dict(values=self.values, dt=self.dt, start_time=self.start_time,
                    cleaned_mask=self.cleaned_mask, warnings=self.warnings)
        args.update(kw)
        return QueueSeries(**args)


@dataclass(frozen=True)
class CleaningConfig:
    max_queue: float = 40.0
    window: int = 5

    def __post_init__(self):
        if not self.max_queue > 0:
            raise ValueError("max_queue must be positive")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window must be odd and >= 3")


def load_csv(path, column_spec=CSV_HEADER, jitter=0.01) -> QueueSeries:
    """Read a ``timestamp,queue_len`` CSV into a uniform series.

    The sampling interval is the median timestamp gap. Gaps spanning whole
    multiples of it are filled by linear interpolation and flagged in
    ``cleaned_mask``.
    """
    tcol, vcol = column_spec
    times, vals, lines = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        try:
            ti, vi = header.index(tcol), header.index(vcol)
        except ValueError:
            raise ParseError(f"{path}: line 1: header must contain {tcol!r} and {vcol!r}") from None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                t = float(row[ti])
                v = float(row[vi])
            except (IndexError, ValueError):
                raise ParseError(f"{path}: line {lineno}: malformed row {row!r}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ParseError(f"{path}: line {lineno}: non-finite value")
            times.append(t)
            vals.append(v)
            lines.append(lineno)
    if not times:
        raise ParseError(f"{path}: no data rows")
    t = np.asarray(times)
    v = np.asarray(vals)
    if len(t) == 1:
        return QueueSeries(values=v, start_time=t[0])
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        bad = lines[int(np.argmax(gaps <= 0)) + 1]
        raise FormatError(f"{path}: line {bad}: timestamps not strictly increasing")
    dt = float(np.median(gaps))
    steps = np.rint(gaps / dt)
    if np.any(np.abs(gaps - steps * dt) > jitter * dt):
        raise FormatError(f"{path}: timestamps deviate from uniform dt={dt:g} by more than {jitter:.0%}")
    idx = np.concatenate([[0], np.cumsum(steps)]).astype(int)
    grid = np.arange(idx[-1] + 1)
    out = np.interp(grid, idx, v)
    mask = np.ones(len(grid), dtype=bool)
    mask[idx] = False
    return QueueSeries(values=out, dt=dt, start_time=t[0], cleaned_mask=mask)


def _fmt_value(x: float) -> str:
    return repr(float(x))


def _fmt_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def write_csv(series: QueueSeries, path) -> None:
    """Write ``series`` in the ``timestamp,queue_len`` format (byte-stable)."""
    lines = [",".join(CSV_HEADER)]
    for t, v in zip(series.times.tolist(), series.values.tolist()):
        lines.append(f"{_fmt_time(t)},{_fmt_value(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def clean(series: QueueSeries, cfg: CleaningConfig = CleaningConfig()) -> QueueSeries:
    """Replace values above ``cfg.max_queue`` by the mean of valid in-window neighbours.

    Valid means at most ``max_queue`` and not itself flagged as replaced. If a
    window holds no valid sample the series-wide mean of valid samples is used;
    if there are none at all, ``max_queue`` is used.
    """
    x = series.values
    if len(x) == 0:
        raise ValueError("cannot clean an empty series")
    prior = series.cleaned_mask
    bad = x > cfg.max_queue
    if not bad.any():
        return series
    valid = ~bad & ~prior
    half = cfg.window // 2
    out = x.copy()
    warnings = list(series.warnings)
    fallback = None
    for i in np.flatnonzero(bad):
        lo, hi = max(0, i - half), min(len(x), i + half + 1)
        w = valid[lo:hi]
        if w.any():
            out[i] = x[lo:hi][w].mean()
            continue
        if fallback is None:
            pool = x[~bad]
            fallback = float(pool.mean()) if len(pool) else float(cfg.max_queue)
            msg = "window without valid samples; used series-wide mean of valid samples"
            logger.warning(msg)
            warnings.append(msg)
        out[i] = fallback
    return series.replace(values=out, cleaned_mask=prior | bad, warnings=tuple(warnings))


def _check_factor(series: QueueSeries, target_dt: float) -> int:
    ratio = target_dt / series.dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"target_dt={target_dt:g} is not an integer multiple of dt={series.dt:g}")
    return k


def _windows(series: QueueSeries, k: int, fill: float):
    n = len(series)
    m = -(-n // k) * k
    v = np.full(m, fill)
    v[:n] = series.values
    mask = np.zeros(m, dtype=bool)
    mask[:n] = series.cleaned_mask
    return v.reshape(-1, k), mask.reshape(-1, k)


def aggregate(series: QueueSeries, target_dt: float) -> QueueSeries:
    """Maximum of each ``target_dt`` window (per-cycle maximum queue).

    A trailing partial window is kept and aggregated over its samples.
    """
    k = _check_factor(series, target_dt)
    if k == 1:
        return series
    v, m = _windows(series, k, -np.inf)
    return QueueSeries(values=v.max(axis=1), dt=series.dt * k, start_time=series.start_time,
                       cleaned_mask=m.any(axis=1), warnings=series.warnings)


def aggregate_sum(series: QueueSeries, target_dt: float) -> QueueSeries:
    """Window totals, for flow-count series."""
    k = _check_factor(series, target_dt)
    if k == 1:
        return series
    v, m = _windows(series, k, 0.0)
    return QueueSeries(values=v.sum(axis=1), dt=series.dt * k, start_time=series.start_time,
                       cleaned_mask=m.any(axis=1), warnings=series.warnings)


def centered_mean(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving mean, edge windows truncated to the available samples.

    The window reaches ``window // 2`` samples to each side, so an even
    ``window`` stays symmetric and spans ``window + 1`` samples.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window == 1 or n == 0:
        return x.copy()
    half = window // 2
    kern = np.ones(2 * half + 1)
    sums = np.convolve(x, kern, mode="full")[half:half + n]
    counts = np.convolve(np.ones(n), kern, mode="full")[half:half + n]
    return sums / counts


def moving_average(series: QueueSeries, window: int) -> QueueSeries:
    return series.replace(values=centered_mean(series.values, window))
