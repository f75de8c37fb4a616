# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sequential kernels. Keep in lockstep with ``_kernels_py.py``."""
import numpy as np

from libc.math cimport sqrt, pow, isfinite, NAN


def euler_vol(double gamma0, double kappa, double gamma_bar, double sigma_gamma,
              double h, const double[::1] xi, bint sqrt_diffusion=False):
    cdef Py_ssize_t n = xi.shape[0], i
    out = np.empty(n + 1)
    cdef double[::1] o = out
    cdef double sq = sqrt(h)
    cdef double g = gamma0, diff
    cdef long hits = 0
    o[0] = g
    for i in range(n):
        if sqrt_diffusion:
            diff = sigma_gamma * sqrt(g) * sq * xi[i]
        else:
            diff = sigma_gamma * sq * xi[i]
        g = g + kappa * (gamma_bar - g) * h + diff
        if g < 0.0:
            g = 0.0
            hits += 1
        o[i + 1] = g
    return out, hits


def euler_queue(double y0, double mu, const double[::1] phi, const double[::1] gamma,
                const double[::1] dwh, double h):
    cdef Py_ssize_t n = dwh.shape[0], i, j
    out = np.empty(n + 1)
    cdef double[::1] o = out
    cdef double y = y0
    o[0] = y
    for i in range(n):
        y = y + mu * (phi[i] - y) * h + gamma[i] * y * dwh[i]
        if not isfinite(y):
            for j in range(i + 1, n + 1):
                o[j] = NAN
            return out, i
        if y < 0.0:
            y = 0.0
        o[i + 1] = y
    return out, -1


def hosking_fgn(double hurst, const double[::1] z):
    cdef Py_ssize_t n = z.shape[0], t, j, k
    out = np.empty(n)
    if n == 0:
        return out
    cdef double[::1] x = out
    cdef double[::1] acov = np.empty(n)
    cdef double[::1] phi = np.zeros(n)
    cdef double[::1] prev = np.zeros(n)
    cdef double h2 = 2.0 * hurst, v = 1.0, num, kk, m
    acov[0] = 1.0
    for k in range(1, n):
        acov[k] = 0.5 * (pow(k + 1.0, h2) - 2.0 * pow(<double>k, h2) + pow(k - 1.0, h2))
    x[0] = z[0]
    for t in range(1, n):
        num = acov[t]
        for j in range(t - 1):
            num -= prev[j] * acov[t - 1 - j]
        kk = num / v
        for j in range(t - 1):
            phi[j] = prev[j] - kk * prev[t - 2 - j]
        phi[t - 1] = kk
        v = v * (1.0 - kk * kk)
        m = 0.0
        for j in range(t):
            m += phi[j] * x[t - 1 - j]
        x[t] = m + sqrt(v) * z[t]
        for j in range(t):
            prev[j] = phi[j]
    return out
