"""Fractional Brownian motion by circulant embedding (Davies-Harte).

Whole paths are synthesized up front. When the embedding eigenvalues are not
all non-negative the exact Durbin-Levinson (Hosking) recursion is used instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

_EIG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FbmPath:
    hurst: float
    dt: float
    increments: np.ndarray
    cumulative: np.ndarray
    method: str = "circulant"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie in (0, 1)")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.cumulative))

    def write_csv(self, path) -> None:
        lines = ["t,increment,value"]
        inc = np.concatenate([[0.0], self.increments])
        for t, d, v in zip(self.times.tolist(), inc.tolist(), self.cumulative.tolist()):
            lines.append(f"{t!r},{d!r},{v!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def fbm_covariance(hurst: float, t, s):
    """Covariance of standard fBm, ``(|t|^2H + |s|^2H - |t-s|^2H) / 2``."""
    h2 = 2.0 * hurst
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    return 0.5 * (np.abs(t) ** h2 + np.abs(s) ** h2 - np.abs(t - s) ** h2)


def fgn_autocovariance(hurst: float, k) -> np.ndarray:
    """Autocovariance of unit-variance fractional Gaussian noise at integer lags."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k ** h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=32)
def _embedding_eigenvalues(hurst: float, n: int) -> np.ndarray:
    row = fgn_autocovariance(hurst, np.arange(n + 1))
    circ = np.concatenate([row, row[-2:0:-1]])
    lam = np.fft.fft(circ).real
    lam.flags.writeable = False
    return lam


def _circulant_fgn(lam: np.ndarray, n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    m = len(lam)
    z = rng.standard_normal((count, m)) + 1j * rng.standard_normal((count, m))
    y = np.fft.fft(np.sqrt(np.clip(lam, 0.0, None) / m) * z, axis=-1)
    return y.real[:, :n]


def fgn(hurst: float, n: int, seed=None, count: int | None = None, method: str = "auto"):
    """Unit-step fractional Gaussian noise.

    Returns ``(noise, method_used)``; ``noise`` has shape ``(n,)`` or
    ``(count, n)``. ``method`` is ``"auto"``, ``"circulant"`` or ``"hosking"``.
    """
    if not 0 < hurst < 1:
        raise ValueError("hurst must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    rows = 1 if count is None else count
    used = method
    if method in ("auto", "circulant"):
        lam = _embedding_eigenvalues(float(hurst), int(n))
        if lam.min() < -_EIG_TOL * lam.max():
            if method == "circulant":
                raise ValueError(f"circulant embedding not positive semi-definite for H={hurst}, n={n}")
            logger.info("circulant embedding failed for H=%s n=%d; using Hosking recursion", hurst, n)
            used = "hosking"
        else:
            used = "circulant"
            out = _circulant_fgn(lam, n, rng, rows)
    elif method != "hosking":
        raise ValueError(f"unknown method {method!r}")
    if used == "hosking":
        z = rng.standard_normal((rows, n))
        out = np.stack([kernels.hosking_fgn(float(hurst), np.ascontiguousarray(zi)) for zi in z])
    return (out[0] if count is None else out), used


def generate_fbm(hurst: float, n: int, dt: float = 1.0, seed=None, method: str = "auto") -> FbmPath:
    """Sample an fBm path on ``n`` steps of size ``dt``.

    Increments have variance ``dt ** (2 * hurst)``; ``cumulative`` has
    ``n + 1`` entries starting at 0.
    """
    noise, used = fgn(hurst, n, seed=seed, method=method)
    inc = noise * dt ** hurst
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    return FbmPath(hurst=hurst, dt=dt, increments=inc, cumulative=cum, method=used,
                   metadata={"fallback": used != "circulant" and method == "auto"})


def generate_fbm_paths(hurst: float, n: int, count: int, dt: float = 1.0, seed=None,
                       method: str = "auto") -> np.ndarray:
    """``count`` independent fBm paths as an array of shape ``(count, n + 1)``."""
    noise, _ = fgn(hurst, n, seed=seed, count=count, method=method)
    paths = np.zeros((count, n + 1))
    np.cumsum(noise * dt ** hurst, axis=1, out=paths[:, 1:])
    return paths
