"""Cycle-scale queue dynamics: mean-reverting SDE with fBm-driven multiplicative noise.

    dY = mu (phi_t - Y) dt + gamma_t Y dW^H
    dgamma = kappa (gamma_bar - gamma) dt + sigma_gamma dW

Rates are per model time unit; ``SimConfig.time_unit`` gives its length in
seconds (900 s by default). Both states are truncated at
zero after every Euler step.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import kernels
from .fbm import fgn
from .seasonal import SeasonalTrend, evaluate_phi
from .timeseries import QueueSeries


class SimulationError(FloatingPointError):
    """Integration produced a non-finite state."""


class SchemaError(ValueError):
    """A parameter document is missing fields or has invalid values."""


@dataclass(frozen=True)
class SdeParams:
    mu: float = 0.3
    hurst: float = 0.7
    mu_amp: float = 5.0
    mu_base: float = 15.0
    y0: float = 15.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if not 0 < self.hurst < 1:
            raise ValueError("hurst must lie in (0, 1)")
        if self.y0 < 0:
            raise ValueError("y0 must be >= 0")


@dataclass(frozen=True)
class VolParams:
    kappa: float = 0.1
    gamma_bar: float = 0.2
    sigma_gamma: float = 0.05
    gamma0: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 120.0
    horizon: float = 7 * 86400.0
    seed: int = 0
    replicates: int = 1
    substeps: int = 1
    time_unit: float = 900.0
    vol_diffusion: str = "additive"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError(f"horizon ({self.horizon:g} s) must be at least dt ({self.dt:g} s)")
        if self.replicates < 1 or self.substeps < 1:
            raise ValueError("replicates and substeps must be >= 1")
        if self.vol_diffusion not in ("additive", "sqrt"):
            raise ValueError("vol_diffusion must be 'additive' or 'sqrt'")

    @property
    def n_samples(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_steps(self) -> int:
        """Fine integration steps covering the output grid."""
        return (self.n_samples - 1) * self.substeps

    @property
    def h(self) -> float:
        """Integration step in model time units."""
        return self.dt / self.substeps / self.time_unit


@dataclass(frozen=True, eq=False)
class Noise:
    """Common random numbers for one replicate: unit-step fGn and N(0,1) draws."""

    fgn: np.ndarray
    xi: np.ndarray
    hurst: float


def replicate_seed(seed: int, replicate: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate),))


def draw_noise(n_steps: int, hurst: float, seed: int, replicate: int = 0) -> Noise:
    """Independent driving noises for the queue and the volatility equations."""
    ss_fbm, _ = replicate_seed(seed, replicate).spawn(2)
    w = fgn(hurst, n_steps, seed=ss_fbm)[0] if n_steps else np.zeros(0)
    return Noise(fgn=np.ascontiguousarray(w), xi=vol_noise(n_steps, seed, replicate), hurst=hurst)


def vol_noise(n_steps: int, seed: int, replicate: int = 0) -> np.ndarray:
    _, ss_vol = replicate_seed(seed, replicate).spawn(2)
    return np.random.default_rng(ss_vol).standard_normal(n_steps)


def drift(y, phi, mu):
    """Mean-reverting drift ``mu (phi - y)``."""
    return mu * (phi - y)


def _vol_path(vol: VolParams, cfg: SimConfig, xi: np.ndarray):
    return kernels.euler_vol(vol.gamma0, vol.kappa, vol.gamma_bar, vol.sigma_gamma, cfg.h,
                             np.ascontiguousarray(xi, dtype=float), cfg.vol_diffusion == "sqrt")


def simulate_volatility(params: VolParams, cfg: SimConfig, noise: Noise | None = None,
                        return_truncations: bool = False):
    """Volatility sampled on the output grid (``cfg.n_samples`` values)."""
    xi = vol_noise(cfg.n_steps, cfg.seed) if noise is None else noise.xi[: cfg.n_steps]
    g, hits = _vol_path(params, cfg, xi)
    g = g[:: cfg.substeps]
    return (g, hits) if return_truncations else g


@dataclass(frozen=True, eq=False)
class SimResult:
    queue: QueueSeries
    gamma: np.ndarray
    phi: np.ndarray
    vol_truncations: int


def simulate(params: SdeParams, vol: VolParams, trend: SeasonalTrend | None, cfg: SimConfig,
             noise: Noise | None = None, phi_fine: np.ndarray | None = None) -> SimResult:
    """Integrate one replicate; ``noise`` defaults to the draw for ``cfg.seed``.

    ``phi_fine`` may carry a precomputed trend on the fine grid (length
    ``cfg.n_steps``) so repeated calls skip re-evaluating the harmonics.
    """
    n = cfg.n_steps
    if noise is None:
        noise = draw_noise(n, params.hurst, cfg.seed)
    if noise.hurst != params.hurst:
        raise ValueError("noise was drawn for a different Hurst exponent")
    h = cfg.h
    if phi_fine is None:
        t = np.arange(n) * (cfg.dt / cfg.substeps)
        phi_fine = evaluate_phi(trend, params, t)
    gamma, hits = _vol_path(vol, cfg, noise.xi[:n])
    dwh = noise.fgn[:n] * h ** params.hurst
    y, bad = kernels.euler_queue(float(params.y0), float(params.mu), np.ascontiguousarray(phi_fine, dtype=float),
                                 gamma, dwh, h)
    if bad >= 0:
        raise SimulationError(f"non-finite queue length at step {bad} with {params} and {vol}")
    s = cfg.substeps
    series = QueueSeries(values=y[::s], dt=cfg.dt)
    phi_out = evaluate_phi(trend, params, series.times - series.start_time)
    return SimResult(queue=series, gamma=gamma[::s], phi=phi_out, vol_truncations=hits)


def simulate_queue(params: SdeParams, vol: VolParams, trend: SeasonalTrend | None,
                   cfg: SimConfig, replicate: int = 0) -> QueueSeries:
    noise = draw_noise(cfg.n_steps, params.hurst, cfg.seed, replicate)
    return simulate(params, vol, trend, cfg, noise=noise).queue


def simulate_replicates(params: SdeParams, vol: VolParams, trend: SeasonalTrend | None,
                        cfg: SimConfig) -> np.ndarray:
    """All ``cfg.replicates`` paths as an array of shape ``(replicates, n_samples)``."""
    t = np.arange(cfg.n_steps) * (cfg.dt / cfg.substeps)
    phi = evaluate_phi(trend, params, t)
    out = np.empty((cfg.replicates, cfg.n_samples))
    for r in range(cfg.replicates):
        noise = draw_noise(cfg.n_steps, params.hurst, cfg.seed, r)
        out[r] = simulate(params, vol, trend, cfg, noise=noise, phi_fine=phi).queue.values
    return out


PARAM_FIELDS = tuple(f.name for f in fields(SdeParams)) + tuple(f.name for f in fields(VolParams))


def params_to_dict(params: SdeParams, vol: VolParams) -> dict:
    return {**asdict(params), **asdict(vol)}


def params_from_dict(d: dict) -> tuple[SdeParams, VolParams]:
    missing = [k for k in PARAM_FIELDS if k not in d]
    if missing:
        raise SchemaError(f"parameter document missing fields: {', '.join(missing)}")
    try:
        vals = {k: float(d[k]) for k in PARAM_FIELDS}
        sde = SdeParams(**{f.name: vals[f.name] for f in fields(SdeParams)})
        vol = VolParams(**{f.name: vals[f.name] for f in fields(VolParams)})
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"invalid parameter document: {exc}") from exc
    return sde, vol


def save_params(params: SdeParams, vol: VolParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params, vol), indent=2, sort_keys=True) + "\n")


def load_params(path) -> tuple[SdeParams, VolParams]:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return params_from_dict(d)


def ou_stationary(vol: VolParams) -> tuple[float, float]:
    """Mean and variance of the untruncated continuous-time OU law."""
    if vol.kappa == 0:
        return vol.gamma_bar, math.inf
    return vol.gamma_bar, vol.sigma_gamma ** 2 / (2 * vol.kappa)
