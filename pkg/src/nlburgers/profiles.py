"""Self-similar source solution of U_t = A U_xx - (B/2)(U^2)_x with U(0) = m delta.

U(t, x) = t^{-1/2} f(x / sqrt(t)) where the profile f solves

    -A f'' - xi f' / 2 = f / 2 - (B/2) (f^2)'.

The left side minus f/2 is -(A f' + xi f / 2)', so one integration (the
constant vanishes by decay at infinity) leaves the Bernoulli equation

    A f' + xi f / 2 = (B/2) f^2.

With g = 1/f this is linear: g' = xi g / (2A) - B / (2A), giving

    f(xi) = exp(-xi^2 / 4A) / (C - beta erf(xi / (2 sqrt A))),  beta = (B/2) sqrt(pi/A).

The denominator runs between C - beta and C + beta, so the mass is
(2A/B) log((C + beta)/(C - beta)) and C = beta coth(m B / 4A).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import erfc

from . import _accel
from .errors import BisectionFailure, NoAdmissibleConstant, NonPositiveTime

MASS_TOL = 1e-10
SHOOT_STEPS = 40_000
SHOOT_WIDTH = 20.0  # in units of sqrt(A)


@dataclass(frozen=True)
class Profile:
    m: float
    A: float
    B: float
    C_norm: float
    f0: float
    method: str
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = self.fn(xi)
        return float(out) if out.ndim == 0 else out

    def mass(self) -> float:
        if self.m == 0:
            return 0.0
        w = SHOOT_WIDTH * math.sqrt(self.A)
        pts = np.linspace(-w, w, 9)
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            total += integrate.quad(
                lambda s: float(self.fn(np.array(s))), a, b, epsabs=1e-17, epsrel=1e-13, limit=200
            )[0]
        return total


def _zero_profile(A, B, method):
    return Profile(0.0, A, B, math.inf, 0.0, method, lambda xi: np.zeros_like(np.asarray(xi, float)))


def build_profile_closed_form(m: float, A: float, B: float) -> Profile:
    if not A > 0:
        raise ValueError("A must be positive")
    if m == 0:
        return _zero_profile(A, B, "closed")
    sa = math.sqrt(A)
    if B == 0:
        C = math.sqrt(4 * math.pi * A) / m
        lo = hi = C
        beta = 0.0
    else:
        beta = 0.5 * B * math.sqrt(math.pi / A)
        x = m * B / (4 * A)
        # C -+ beta = beta (coth x -+ 1), written with expm1 to keep digits
        try:
            lo = 2 * beta / math.expm1(2 * x)  # C - beta
            hi = -2 * beta / math.expm1(-2 * x)  # C + beta
        except OverflowError:
            raise NoAdmissibleConstant(f"|m B / 4A| = {abs(x):.4g}: the constant is not representable") from None
        C = beta / math.tanh(x)
    if not (lo * hi > 0 and np.isfinite(lo) and np.isfinite(hi)):
        raise NoAdmissibleConstant(f"denominator changes sign for m={m}, A={A}, B={B}")

    def fn(xi):
        xi = np.asarray(xi, dtype=float)
        s = xi / (2 * sa)
        den = np.where(xi >= 0, lo + beta * erfc(s), hi - beta * erfc(-s))
        return np.exp(-xi * xi / (4 * A)) / den

    prof = Profile(m, A, B, C, 1.0 / C, "closed", fn)
    err = abs(prof.mass() - m)
    if err > MASS_TOL * max(1.0, abs(m)):
        raise NoAdmissibleConstant(f"profile mass misses m by {err:.3e}")
    return prof


# ------------------------------------------------------------------ shooting oracle


def _half_lines(f0, A, B, width, n):
    right = _accel.bernoulli_rk4(float(f0), float(A), float(B), float(width), int(n), 1)
    left = _accel.bernoulli_rk4(float(f0), float(A), float(B), float(width), int(n), -1)
    return right, left


def _shoot_mass(f0, A, B, width, n):
    (_, _, mr), (_, _, ml) = _half_lines(f0, A, B, width, n)
    return mr + ml


def _hermite(xs, f, df, width, n):
    """Cubic Hermite evaluation of the sampled half-line solution at |xi| = xs."""
    hstep = width / n
    s = np.clip(xs / hstep, 0.0, float(n))
    i = np.minimum(np.floor(s).astype(np.int64), n - 1)
    t = s - i
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    out = h00 * f[i] + h10 * hstep * df[i] + h01 * f[i + 1] + h11 * hstep * df[i + 1]
    return np.where(xs <= width, out, 0.0)


def build_profile_shooting(m: float, A: float, B: float, steps: int = SHOOT_STEPS) -> Profile:
    """Integrate A f' + xi f/2 = (B/2) f^2 outward from 0; bisect on f(0) for the mass."""
    if not A > 0:
        raise ValueError("A must be positive")
    if m == 0:
        return _zero_profile(A, B, "shooting")
    if m < 0:
        pos = build_profile_shooting(-m, A, -B, steps)
        return Profile(m, A, B, -pos.C_norm, -pos.f0, "shooting", lambda xi: -pos.fn(xi))

    width = SHOOT_WIDTH * math.sqrt(A)
    mass_of = lambda f0: _shoot_mass(f0, A, B, width, steps)

    lo, hi = 0.0, m / math.sqrt(4 * math.pi * A)
    for _ in range(200):
        if mass_of(hi) > m:
            break
        lo, hi = hi, 2 * hi
    else:
        raise BisectionFailure("could not bracket the mass from above")
    probe = [mass_of(lo + (hi - lo) * k / 8) for k in range(9)]
    if any(b <= a for a, b in zip(probe[:-1], probe[1:]) if np.isfinite(b)):
        raise BisectionFailure(f"mass is not monotone in f(0) on [{lo}, {hi}]")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if mass_of(mid) > m:
            hi = mid
        else:
            lo = mid
    f0 = lo if abs(mass_of(lo) - m) <= abs(mass_of(hi) - m) else hi
    (fr, dfr, _), (fl, dfl, _) = _half_lines(f0, A, B, width, steps)
    if not (np.all(np.isfinite(fr)) and np.all(np.isfinite(fl))):
        raise BisectionFailure("final shooting trajectory blew up")

    def fn(xi):
        xi = np.asarray(xi, dtype=float)
        a = np.abs(xi)
        # the left half-line was sampled at xi = -k h, i.e. |xi| = k h
        return np.where(xi >= 0, _hermite(a, fr, dfr, width, steps), _hermite(a, fl, -dfl, width, steps))

    return Profile(m, A, B, 1.0 / f0, f0, "shooting", fn)


# ------------------------------------------------------------------ evaluation


def evaluate_U(profile: Profile, t, x):
    """U(t, x) = t^{-1/2} f(x / sqrt t)."""
    t = float(t)
    if not t > 0:
        raise NonPositiveTime(f"U is defined for t > 0, got {t}")
    st = math.sqrt(t)
    return profile(np.asarray(x, dtype=float) / st) / st


def profile_residual(profile: Profile, grid) -> float:
    """Sup over interior nodes of |-A f'' - xi f'/2 - f/2 + (B/2)(f^2)'| by centered differences.

    ``grid`` is either a Grid or a 1-D array of equispaced points.
    """
    xs = np.asarray(getattr(grid, "x", grid), dtype=float)
    h = xs[1] - xs[0]
    f = profile(xs)
    f2 = f * f
    d1 = (f[2:] - f[:-2]) / (2 * h)
    d2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / (h * h)
    df2 = (f2[2:] - f2[:-2]) / (2 * h)
    xi = xs[1:-1]
    res = -profile.A * d2 - 0.5 * xi * d1 - 0.5 * f[1:-1] + 0.5 * profile.B * df2
    return float(np.max(np.abs(res))) if res.size else 0.0
