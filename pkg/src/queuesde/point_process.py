"""Vehicle arrivals as a point process with lognormal (GBM) interarrival times.

The interarrival time follows ``d tau = mu tau dk + sigma tau dW_k`` in the
event index ``k``; instantaneous flow is ``q = 1 / tau``. Summing flow over
fixed-length cycles gives the cycle-level volume that motivates the queue model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ArrivalProcess:
    event_times: np.ndarray
    amplitudes: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.asarray(self.event_times, dtype=float)
        a = np.ones_like(t) if self.amplitudes is None else np.asarray(self.amplitudes, dtype=float)
        if a.shape != t.shape:
            raise ValueError("amplitudes must match event_times")
        if np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if np.any(a < 1):
            raise ValueError("amplitudes must be >= 1")
        object.__setattr__(self, "event_times", t)
        object.__setattr__(self, "amplitudes", a)

    def count(self, t0: float, t1: float) -> float:
        """Integral of the pulse train over ``[t0, t1)``."""
        sel = (self.event_times >= t0) & (self.event_times < t1)
        return float(self.amplitudes[sel].sum())


@dataclass(frozen=True)
class InterarrivalParams:
    mu_tau: float = 0.0
    sigma_tau: float = 0.1
    tau0: float = 2.0

    def __post_init__(self):
        if self.sigma_tau < 0:
            raise ValueError("sigma_tau must be >= 0")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be > 0")


@dataclass(frozen=True)
class FlowParams:
    drift_q: float
    diffusion_q: float


def simulate_interarrivals(params: InterarrivalParams, n: int, seed=None, paths: int | None = None) -> np.ndarray:
    """Interarrival times ``tau_0 .. tau_{n-1}`` from the exact GBM solution.

    ``tau_k = tau0 * exp((mu - sigma^2/2) k + sigma W_k)`` with ``W_0 = 0``.
    With ``paths`` given, returns an array of shape ``(paths, n)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    shape = (n - 1,) if paths is None else (paths, n - 1)
    dw = rng.standard_normal(shape)
    w = np.zeros(shape[:-1] + (n,))
    np.cumsum(dw, axis=-1, out=w[..., 1:])
    k = np.arange(n)
    mu, sig = params.mu_tau, params.sigma_tau
    return params.tau0 * np.exp((mu - 0.5 * sig * sig) * k + sig * w)


def ito_flow_transform(params: InterarrivalParams) -> FlowParams:
    """Drift and diffusion of ``q = 1/tau`` implied by Ito's lemma."""
    s = params.sigma_tau
    return FlowParams(drift_q=s * s - params.mu_tau, diffusion_q=-s)


def gbm_moments(x0: float, drift: float, diffusion: float, k) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of ``dX = drift X dk + diffusion X dW`` at index ``k``."""
    k = np.asarray(k, dtype=float)
    mean = x0 * np.exp(drift * k)
    var = x0 * x0 * np.exp(2.0 * drift * k) * np.expm1(diffusion * diffusion * k)
    return mean, var


def arrivals_from_interarrivals(tau: np.ndarray, t0: float = 0.0) -> np.ndarray:
    """Event times with ``t_{k+1} = t_k + tau_k``; the first event is at ``t0``."""
    tau = np.asarray(tau, dtype=float)
    t = np.empty(len(tau))
    t[0] = t0
    np.cumsum(tau[:-1], out=t[1:])
    t[1:] += t0
    return t


def accumulate_cycles(times, q, T: float) -> np.ndarray:
    """Per-cycle totals ``X_n`` of ``q_k`` over ``[(n-1)T, nT)``, ``n = 1, 2, ...``.

    Cycles run from time zero up to the cycle containing the last event.
    """
    times = np.asarray(times, dtype=float)
    q = np.asarray(q, dtype=float)
    if not T > 0:
        raise ValueError("cycle length T must be positive")
    if len(times) == 0:
        return np.zeros(0)
    if np.any(np.diff(times) < 0):
        raise ValueError("event times must be sorted")
    if times[0] < 0:
        raise ValueError("event times must be >= 0")
    idx = np.floor(times / T).astype(np.int64)
    return np.bincount(idx, weights=q, minlength=int(idx[-1]) + 1)


def write_events_csv(times, tau, q, path) -> None:
    lines = ["t,tau,q"]
    lines += [f"{a!r},{b!r},{c!r}" for a, b, c in zip(map(float, times), map(float, tau), map(float, q))]
    Path(path).write_text("\n".join(lines) + "\n")
