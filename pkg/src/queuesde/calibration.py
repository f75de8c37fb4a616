"""RMSE calibration of the queue model with a Nelder-Mead simplex.

The parameter vector follows the order
``(mu, gamma0, mu_amp, mu_base, kappa, sigma_gamma, gamma_bar)``. The Hurst
exponent is held fixed. Noise is drawn once per seed (common random numbers),
so the objective is a deterministic function of the parameters.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .queue_sde import SdeParams, SimConfig, SimulationError, VolParams, draw_noise, simulate
from .seasonal import SeasonalTrend, extract_trend
from .timeseries import QueueSeries

logger = logging.getLogger(__name__)

THETA_NAMES = ("mu", "gamma0", "mu_amp", "mu_base", "kappa", "sigma_gamma", "gamma_bar")
FIXED_INITIALS = {"mu": 0.3, "gamma0": 0.1, "kappa": 0.1, "sigma_gamma": 0.05, "gamma_bar": 0.2}
PENALTY = 1e6
DEFAULT_TIME_UNIT = 900.0


@dataclass(frozen=True)
class CalibrationConfig:
    initial: tuple[float, ...] | None = None
    tol_fun: float = 1e-4
    tol_x: float = 1e-4
    max_iter: int = 3000
    seed: int = 0
    replicates: int = 1
    hurst: float = 0.7
    hurst_grid: tuple[float, ...] | None = None
    time_unit: float = DEFAULT_TIME_UNIT
    substeps: int = 1
    vol_diffusion: str = "additive"
    n_harmonics: int = 12
    restarts: int = 10

    def __post_init__(self):
        if not (self.tol_fun > 0 and self.tol_x > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if self.initial is not None and len(self.initial) != len(THETA_NAMES):
            raise ValueError(f"initial must have {len(THETA_NAMES)} entries")


@dataclass
class CalibrationResult:
    params: dict
    rmse: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    initial_rmse: float = math.nan
    hurst: float = math.nan
    evaluations: int = 0

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.params[k] for k in THETA_NAMES])

    def to_dict(self) -> dict:
        return {"params": dict(self.params), "rmse": self.rmse, "iterations": self.iterations,
                "converged": self.converged, "trace": list(self.trace), "initial_rmse": self.initial_rmse,
                "hurst": self.hurst, "evaluations": self.evaluations}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_trace_csv(self, path) -> None:
        lines = ["iter,best_rmse"] + [f"{i},{v!r}" for i, v in enumerate(self.trace)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> CalibrationResult:
        return cls(**json.loads(Path(path).read_text()))


def default_initials(series: QueueSeries) -> np.ndarray:
    x = np.asarray(series.values, dtype=float)
    if len(x) == 0:
        raise ValueError("empty series")
    # population std
    return np.array([FIXED_INITIALS["mu"], FIXED_INITIALS["gamma0"], float(x.std()), float(x.mean()),
                     FIXED_INITIALS["kappa"], FIXED_INITIALS["sigma_gamma"], FIXED_INITIALS["gamma_bar"]])


def theta_to_params(theta: Sequence[float], hurst: float, y0: float) -> tuple[SdeParams, VolParams]:
    mu, gamma0, mu_amp, mu_base, kappa, sigma_gamma, gamma_bar = map(float, theta)
    return (SdeParams(mu=mu, hurst=hurst, mu_amp=mu_amp, mu_base=mu_base, y0=y0),
            VolParams(kappa=kappa, gamma_bar=gamma_bar, sigma_gamma=sigma_gamma, gamma0=gamma0))


def params_to_theta(params: SdeParams, vol: VolParams) -> np.ndarray:
    d = {**params.__dict__, **vol.__dict__}
    return np.array([d[k] for k in THETA_NAMES], dtype=float)


def _infeasibility(theta: np.ndarray) -> float:
    """Total amount by which non-negative entries go negative."""
    t = np.asarray(theta, dtype=float)
    nonneg = np.r_[t[0:3], t[4:7]]
    return float(np.sum(np.clip(-nonneg, 0.0, None)))


@lru_cache(maxsize=16)
def _cached_noise(n_steps: int, hurst: float, seed: int, replicate: int):
    return draw_noise(n_steps, hurst, seed, replicate)


def sim_config_for(data: QueueSeries, cfg: CalibrationConfig, replicate_seed: int | None = None) -> SimConfig:
    return SimConfig(dt=data.dt, horizon=data.span, seed=cfg.seed if replicate_seed is None else replicate_seed,
                     substeps=cfg.substeps, time_unit=cfg.time_unit, vol_diffusion=cfg.vol_diffusion)


class RmseObjective:
    """Deterministic RMSE between simulated and observed series for a parameter vector.

    The simulation starts from the first observation and spans the data.
    """

    def __init__(self, data: QueueSeries, trend: SeasonalTrend | None, cfg: CalibrationConfig,
                 hurst: float | None = None):
        self.data = data
        self.trend = trend
        self.cfg = cfg
        self.hurst = cfg.hurst if hurst is None else hurst
        self.sim_cfg = sim_config_for(data, cfg)
        n = self.sim_cfg.n_steps
        self.noises = [_cached_noise(n, self.hurst, cfg.seed, r) for r in range(cfg.replicates)]
        t = np.arange(n) * (data.dt / cfg.substeps)
        self._shape = trend.normalized(t) if trend is not None else np.zeros(n)
        self._obs = np.asarray(data.values, dtype=float)
        self.evaluations = 0

    def simulate(self, theta, replicate: int = 0):
        params, vol = theta_to_params(theta, self.hurst, float(self._obs[0]))
        phi = params.mu_base + params.mu_amp * self._shape
        return simulate(params, vol, self.trend, self.sim_cfg, noise=self.noises[replicate], phi_fine=phi)

    def __call__(self, theta) -> float:
        self.evaluations += 1
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return PENALTY
        bad = _infeasibility(theta)
        if bad > 0:
            return PENALTY * (1.0 + bad)
        total = 0.0
        for r in range(self.cfg.replicates):
            try:
                sim = self.simulate(theta, r).queue.values
            except SimulationError as exc:
                logger.info("penalized blow-up: %s", exc)
                return PENALTY
            err = math.sqrt(float(np.mean((sim - self._obs) ** 2)))
            if not math.isfinite(err):
                return PENALTY
            total += err
        return total / self.cfg.replicates


def rmse_objective(theta, data: QueueSeries, trend: SeasonalTrend | None, cfg: CalibrationConfig) -> float:
    return RmseObjective(data, trend, cfg)(theta)


def rmse(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return math.sqrt(float(np.mean((a - b) ** 2)))


def initial_simplex(x0: np.ndarray, rel: float = 0.05, zero_step: float = 0.00025) -> np.ndarray:
    n = len(x0)
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        simplex[i + 1, i] = x0[i] * (1 + rel) if x0[i] != 0 else zero_step
    return simplex


def nelder_mead(objective: Callable[[np.ndarray], float], initial, cfg: CalibrationConfig = CalibrationConfig(),
                alpha: float = 1.0, gamma: float = 2.0, rho: float = 0.5, sigma: float = 0.5) -> CalibrationResult:
    """Minimize ``objective`` from ``initial``.

    Stops when the spread of simplex values is below ``cfg.tol_fun`` and its
    diameter (max-norm from the best vertex) is below ``cfg.tol_x``, or after
    ``cfg.max_iter`` iterations. ``params`` in the result holds the best vertex
    under key ``"x"``.
    """
    x0 = np.asarray(initial, dtype=float)
    n = len(x0)
    f0 = objective(x0)
    if not math.isfinite(f0):
        raise ValueError("objective is not finite at the initial point")
    sim = initial_simplex(x0)
    fv = np.empty(n + 1)
    fv[0] = f0
    for i in range(1, n + 1):
        fv[i] = objective(sim[i])
    evals = n + 1
    order = np.argsort(fv, kind="stable")
    sim, fv = sim[order], fv[order]
    trace = [float(fv[0])]
    it = 0
    converged = False
    while True:
        if np.max(np.abs(fv[1:] - fv[0])) <= cfg.tol_fun and np.max(np.abs(sim[1:] - sim[0])) <= cfg.tol_x:
            converged = True
            break
        if it >= cfg.max_iter:
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - sim[-1])
        fr = objective(xr)
        evals += 1
        shrink = False
        if fr < fv[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = objective(xe)
            evals += 1
            if fe < fr:
                sim[-1], fv[-1] = xe, fe
            else:
                sim[-1], fv[-1] = xr, fr
        elif fr < fv[-2]:
            sim[-1], fv[-1] = xr, fr
        elif fr < fv[-1]:
            xc = centroid + rho * (xr - centroid)
            fc = objective(xc)
            evals += 1
            if fc <= fr:
                sim[-1], fv[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = centroid + rho * (sim[-1] - centroid)
            fcc = objective(xcc)
            evals += 1
            if fcc < fv[-1]:
                sim[-1], fv[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for i in range(1, n + 1):
                sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                fv[i] = objective(sim[i])
            evals += n
        order = np.argsort(fv, kind="stable")
        sim, fv = sim[order], fv[order]
        trace.append(float(fv[0]))
    return CalibrationResult(params={"x": sim[0].tolist()}, rmse=float(fv[0]), iterations=it,
                             converged=converged, trace=trace, initial_rmse=float(f0), evaluations=evals)


def _calibrate_at(data, trend, theta0, cfg, hurst) -> CalibrationResult:
    """Nelder-Mead, restarted from the best vertex while restarts still gain more than ``tol_fun``.

    ``cfg.max_iter`` bounds the iterations summed over all restarts.
    """
    obj = RmseObjective(data, trend, cfg, hurst=hurst)
    res = nelder_mead(obj, theta0, cfg)
    for _ in range(cfg.restarts):
        budget = cfg.max_iter - res.iterations
        if not res.converged or budget < 1:
            break
        again = nelder_mead(obj, res.params["x"], replace(cfg, max_iter=budget))
        gain = res.rmse - again.rmse
        res = CalibrationResult(params=again.params if gain > 0 else res.params, rmse=min(res.rmse, again.rmse),
                                iterations=res.iterations + again.iterations, converged=again.converged,
                                trace=res.trace + again.trace[1:], initial_rmse=res.initial_rmse)
        if gain <= cfg.tol_fun:
            break
    res.params = dict(zip(THETA_NAMES, res.params["x"]))
    res.hurst = hurst
    res.evaluations = obj.evaluations
    return res


def calibrate(data: QueueSeries, cfg: CalibrationConfig = CalibrationConfig(),
              trend: SeasonalTrend | None = None) -> CalibrationResult:
    """Extract the seasonal trend, then fit the seven model parameters by RMSE.

    The simplex search is restarted from its best vertex (up to
    ``cfg.restarts`` times) to escape premature simplex collapse.

    With ``cfg.hurst_grid`` set, the fit is repeated for each Hurst value and
    the lowest final RMSE wins.
    """
    if len(data) < 2:
        raise ValueError("calibration needs at least two samples")
    if trend is None:
        try:
            trend = extract_trend(data, n_harmonics=cfg.n_harmonics)
        except ValueError as exc:
            raise ValueError(f"seasonality extraction failed: {exc}") from exc
    theta0 = np.asarray(cfg.initial if cfg.initial is not None else default_initials(data), dtype=float)
    grid = cfg.hurst_grid or (cfg.hurst,)
    best = None
    for h in grid:
        res = _calibrate_at(data, trend, theta0, cfg, h)
        logger.info("H=%.2f rmse=%.6g iterations=%d converged=%s", h, res.rmse, res.iterations, res.converged)
        if best is None or res.rmse < best.rmse:
            best = res
    return best
