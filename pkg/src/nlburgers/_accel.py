"""Hot O(N^2) kernels: direct periodic convolution and pairwise double sums.

Each kernel has a numba version and a pure-numpy version with identical
signatures. The numba path is used when numba imports and the environment
variable ``NLBURGERS_NUMBA`` is not set to ``0``.
"""

import os

import numpy as np

_BLOCK = 256

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("NLBURGERS_NUMBA", "1") != "0"


# ---------------------------------------------------------------- numpy path


def _offsets(rows, n):
    return (rows[:, None] - np.arange(n)[None, :]) % n


def direct_convolve_np(w, f, h):
    n = f.shape[0]
    out = np.empty(n)
    for start in range(0, n, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n))
        out[rows] = h * (w[_offsets(rows, n)] @ f)
    return out


def pair_form_np(k, a, b, h):
    """h^2 * sum_ij k[i-j] (a_i - a_j)(b_i - b_j)."""
    n = a.shape[0]
    total = 0.0
    for start in range(0, n, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n))
        da = a[rows, None] - a[None, :]
        db = b[rows, None] - b[None, :]
        total += float(np.sum(k[_offsets(rows, n)] * da * db))
    return h * h * total


def i2_sum_np(g, u, p, h):
    """h^2 * sum_ij g[i-j] (u_j^2 u_i^(p-1) / 4 + u_j u_i^p / 2)."""
    n = u.shape[0]
    total = 0.0
    for start in range(0, n, _BLOCK):
        rows = np.arange(start, min(start + _BLOCK, n))
        ui = u[rows, None]
        uj = u[None, :]
        term = uj * uj * ui ** (p - 1) / 4.0 + uj * ui**p / 2.0
        total += float(np.sum(g[_offsets(rows, n)] * term))
    return h * h * total


def bernoulli_rk4_np(f0, A, B, xi_max, n, direction):
    """Classical RK4 for A f' = -xi f / 2 + B f^2 / 2 from xi = 0 outward.

    Returns (f, dfdxi, mass) sampled on the n + 1 equispaced points of
    [0, direction * xi_max]; mass is the integral over that half-line piece
    (nonnegative orientation). Blow-up returns mass = inf.
    """
    hstep = direction * xi_max / n
    f = np.empty(n + 1)
    df = np.empty(n + 1)
    f[0] = f0
    df[0] = (B * f0 * f0 / 2.0) / A
    y, M, xi = f0, 0.0, 0.0
    for i in range(n):
        k1 = (-xi * y / 2.0 + B * y * y / 2.0) / A
        y2 = y + 0.5 * hstep * k1
        k2 = (-(xi + 0.5 * hstep) * y2 / 2.0 + B * y2 * y2 / 2.0) / A
        y3 = y + 0.5 * hstep * k2
        k3 = (-(xi + 0.5 * hstep) * y3 / 2.0 + B * y3 * y3 / 2.0) / A
        y4 = y + hstep * k3
        k4 = (-(xi + hstep) * y4 / 2.0 + B * y4 * y4 / 2.0) / A
        M += hstep * (y + 2.0 * y2 + 2.0 * y3 + y4) / 6.0
        y = y + hstep * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        xi = (i + 1) * hstep
        if not abs(y) < 1e8:
            f[i + 1:] = np.nan
            df[i + 1:] = np.nan
            return f, df, np.inf
        f[i + 1] = y
        df[i + 1] = (-xi * y / 2.0 + B * y * y / 2.0) / A
    return f, df, direction * M


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def direct_convolve_nb(w, f, h):
        n = f.shape[0]
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for j in range(n):
                d = i - j
                if d < 0:
                    d += n
                acc += w[d] * f[j]
            out[i] = h * acc
        return out

    @njit(cache=True)
    def pair_form_nb(k, a, b, h):
        n = a.shape[0]
        total = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                d = i - j
                if d < 0:
                    d += n
                acc += k[d] * (a[i] - a[j]) * (b[i] - b[j])
            total += acc
        return h * h * total

    @njit(cache=True)
    def i2_sum_nb(g, u, p, h):
        n = u.shape[0]
        total = 0.0
        for i in range(n):
            ui_pm1 = u[i] ** (p - 1)
            ui_p = ui_pm1 * u[i]
            acc = 0.0
            for j in range(n):
                d = i - j
                if d < 0:
                    d += n
                acc += g[d] * (u[j] * u[j] * ui_pm1 / 4.0 + u[j] * ui_p / 2.0)
            total += acc
        return h * h * total

    bernoulli_rk4_nb = njit(cache=True)(bernoulli_rk4_np)

else:  # pragma: no cover
    bernoulli_rk4_nb = bernoulli_rk4_np
    direct_convolve_nb = direct_convolve_np
    pair_form_nb = pair_form_np
    i2_sum_nb = i2_sum_np


def _pick(nb, npy):
    return nb if USE_NUMBA else npy


direct_convolve = _pick(direct_convolve_nb, direct_convolve_np)
pair_form = _pick(pair_form_nb, pair_form_np)
bernoulli_rk4 = _pick(bernoulli_rk4_nb, bernoulli_rk4_np)


def i2_sum(g, u, p, h):
    fn = i2_sum_nb if USE_NUMBA else i2_sum_np
    return fn(g, u, int(p), float(h))


def backend():
    return "numba" if USE_NUMBA else "numpy"
