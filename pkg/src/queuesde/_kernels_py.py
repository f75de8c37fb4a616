"""Pure-Python versions of the sequential kernels.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce bitwise-identical floats.
"""
import math

import numpy as np


def euler_vol(gamma0, kappa, gamma_bar, sigma_gamma, h, xi, sqrt_diffusion=False):
    """Truncated Euler scheme for the volatility process.

    Returns ``(gamma, n_truncated)`` where ``gamma`` has ``len(xi) + 1`` entries.
    """
    n = len(xi)
    out = np.empty(n + 1)
    sq = math.sqrt(h)
    g = float(gamma0)
    out[0] = g
    hits = 0
    xs = xi.tolist()
    for i in range(n):
        if sqrt_diffusion:
            diff = sigma_gamma * math.sqrt(g) * sq * xs[i]
        else:
            diff = sigma_gamma * sq * xs[i]
        g = g + kappa * (gamma_bar - g) * h + diff
        if g < 0.0:
            g = 0.0
            hits += 1
        out[i + 1] = g
    return out, hits


def euler_queue(y0, mu, phi, gamma, dwh, h):
    """Truncated Euler scheme for the mean-reverting queue equation.

    ``phi`` and ``gamma`` are sampled at the left point of each step.
    Returns ``(y, bad)``; ``bad`` is the first step index producing a
    non-finite value, or -1.
    """
    n = len(dwh)
    out = np.empty(n + 1)
    y = float(y0)
    out[0] = y
    ph = phi.tolist()
    gm = gamma.tolist()
    dw = dwh.tolist()
    for i in range(n):
        y = y + mu * (ph[i] - y) * h + gm[i] * y * dw[i]
        if not math.isfinite(y):
            out[i + 1:] = np.nan
            return out, i
        if y < 0.0:
            y = 0.0
        out[i + 1] = y
    return out, -1


def hosking_fgn(hurst, z):
    """Exact unit-variance fractional Gaussian noise by Durbin-Levinson recursion."""
    n = len(z)
    out = np.empty(n)
    if n == 0:
        return out
    zs = z.tolist()
    h2 = 2.0 * hurst
    acov = [1.0] + [0.5 * ((k + 1) ** h2 - 2.0 * k ** h2 + (k - 1) ** h2) for k in range(1, n)]
    x = [0.0] * n
    phi = [0.0] * n
    prev = [0.0] * n
    v = 1.0
    x[0] = zs[0]
    for t in range(1, n):
        num = acov[t]
        for j in range(t - 1):
            num -= prev[j] * acov[t - 1 - j]
        k = num / v
        for j in range(t - 1):
            phi[j] = prev[j] - k * prev[t - 2 - j]
        phi[t - 1] = k
        v = v * (1.0 - k * k)
        m = 0.0
        for j in range(t):
            m += phi[j] * x[t - 1 - j]
        x[t] = m + math.sqrt(v) * zs[t]
        for j in range(t):
            prev[j] = phi[j]
    for i in range(n):
        out[i] = x[i]
    return out
