"""Kernel pairs (K, G), structural checks and moment constants.

K is the even, nonnegative, mass-one diffusion kernel; G is the odd convection
kernel. The asymptotic diffusivity is A = 1/2 * int K(z) z^2 dz and the
convection strength is B = int G(z) z dz.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import DominationFailure, KernelError, NonIntegrable

log = logging.getLogger(__name__)

FAMILIES = ("exponential", "gaussian", "tophat", "tabulated", "custom")

MASS_TOL = 1e-8
DEFAULT_SAMPLES = 100_000

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KernelPair:
    """Analytic or tabulated (K, G).

    ``support`` is the half-width beyond which both kernels are negligible;
    it sizes the validation sample set and the quadrature ladder.
    """

    family: str
    K: ArrayFn
    G: ArrayFn
    params: dict = field(default_factory=dict)
    support: float = 1.0
    kinks: tuple = ()
    closed_A: Optional[float] = None
    closed_B: Optional[float] = None
    closed_C_GK: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")

    def k(self, x):
        return self.K(np.asarray(x, dtype=float))

    def g(self, x):
        return self.G(np.asarray(x, dtype=float))

    def rescaled(self, lam: float) -> "KernelPair":
        """K_lam(x) = lam K(lam x), G_lam(x) = lam G(lam x)."""
        if lam <= 0:
            raise ValueError("lambda must be positive")
        K, G = self.K, self.G
        params = dict(self.params)
        params["lambda"] = params.get("lambda", 1.0) * lam
        return KernelPair(
            family=self.family,
            K=lambda x: lam * K(lam * x),
            G=lambda x: lam * G(lam * x),
            params=params,
            support=self.support / lam,
            kinks=tuple(p / lam for p in self.kinks),
            closed_A=None if self.closed_A is None else self.closed_A / lam**2,
            closed_B=None if self.closed_B is None else self.closed_B / lam,
            closed_C_GK=self.closed_C_GK,
        )

    def negated_G(self) -> "KernelPair":
        G = self.G
        return KernelPair(
            family=self.family,
            K=self.K,
            G=lambda x: -G(x),
            params={**self.params, "conv": -self.params.get("conv", 1.0)},
            support=self.support,
            kinks=self.kinks,
            closed_A=self.closed_A,
            closed_B=None if self.closed_B is None else -self.closed_B,
            closed_C_GK=self.closed_C_GK,
        )


# ------------------------------------------------------------------ families


def exponential_pair(sigma: float = 1.0, conv: float = 1.0) -> KernelPair:
    """K = exp(-|x|/sigma)/(2 sigma), G = conv * K'."""
    if sigma <= 0:
        raise KernelError("sigma must be positive")

    def K(x):
        return np.exp(-np.abs(x) / sigma) / (2.0 * sigma)

    def G(x):
        return -conv * np.sign(x) * np.exp(-np.abs(x) / sigma) / (2.0 * sigma**2)

    return KernelPair(
        "exponential", K, G, {"sigma": sigma, "conv": conv},
        support=40.0 * sigma, kinks=(0.0,),
        closed_A=sigma**2, closed_B=-conv, closed_C_GK=abs(conv) / sigma,
    )


def gaussian_pair(sigma: float = 1.0, conv: float = 1.0) -> KernelPair:
    """Gaussian K with variance sigma^2 and G = -conv tanh(x/sigma) K / sigma.

    G = K' would not be dominated by K (the ratio grows like |x|), so the
    odd factor is bounded by tanh.
    """
    if sigma <= 0:
        raise KernelError("sigma must be positive")
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def K(x):
        return norm * np.exp(-0.5 * (x / sigma) ** 2)

    def G(x):
        return -conv * np.tanh(x / sigma) * K(x) / sigma

    return KernelPair(
        "gaussian", K, G, {"sigma": sigma, "conv": conv},
        support=12.0 * sigma, closed_A=0.5 * sigma**2,
    )


def tophat_pair(a: float = 1.0, conv: float = 1.0) -> KernelPair:
    """K = 1_{|x|<=a}/(2a), G = -conv x/(2a^2) 1_{|x|<=a}."""
    if a <= 0:
        raise KernelError("half-width must be positive")

    def K(x):
        return np.where(np.abs(x) <= a, 0.5 / a, 0.0)

    def G(x):
        return np.where(np.abs(x) <= a, -conv * x / (2.0 * a * a), 0.0)

    return KernelPair(
        "tophat", K, G, {"a": a, "conv": conv},
        support=a, kinks=(-a, 0.0, a),
        closed_A=a * a / 6.0, closed_B=-conv * a / 3.0, closed_C_GK=abs(conv),
    )


def _load_table(table) -> np.ndarray:
    if isinstance(table, (str, Path)):
        arr = np.loadtxt(table, dtype=float, ndmin=2)
    else:
        arr = np.asarray(table, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise KernelError("kernel table must have two columns (x, value) and >= 2 rows")
    order = np.argsort(arr[:, 0])
    return arr[order]


def tabulated_pair(K_table, G_table=None, symmetrize: bool = False) -> KernelPair:
    """Piecewise-linear K, G from (x, value) tables, zero outside the table range.

    Tables are taken as given so that validation can reject a non-even K or a
    non-odd G. ``symmetrize=True`` projects K onto its even part and G onto its
    odd part first.
    """
    kt = _load_table(K_table)
    gt = _load_table(G_table) if G_table is not None else np.array([[-1.0, 0.0], [1.0, 0.0]])

    def lin(t):
        return lambda x: np.interp(x, t[:, 0], t[:, 1], left=0.0, right=0.0)

    k_raw, g_raw = lin(kt), lin(gt)

    if symmetrize:

        def K(x):
            x = np.asarray(x, dtype=float)
            return 0.5 * (k_raw(x) + k_raw(-x))

        def G(x):
            x = np.asarray(x, dtype=float)
            return 0.5 * (g_raw(x) - g_raw(-x))

    else:
        K = lambda x: k_raw(np.asarray(x, dtype=float))
        G = lambda x: g_raw(np.asarray(x, dtype=float))

    nodes = np.concatenate([kt[:, 0], -kt[:, 0], gt[:, 0], -gt[:, 0]])
    support = float(np.max(np.abs(nodes)))
    kinks = tuple(np.unique(np.round(nodes, 14))[:200])
    return KernelPair("tabulated", K, G, {"nodes": int(kt.shape[0]), "symmetrize": bool(symmetrize)}, support=support, kinks=kinks)


def pair_from_config(block: dict) -> KernelPair:
    """Build a kernel pair from the ``kernel`` block of a run config."""
    block = dict(block)
    fam = block.pop("family", "exponential")
    if fam == "exponential":
        return exponential_pair(float(block.get("sigma", 1.0)), float(block.get("conv", 1.0)))
    if fam == "gaussian":
        return gaussian_pair(float(block.get("sigma", 1.0)), float(block.get("conv", 1.0)))
    if fam == "tophat":
        return tophat_pair(float(block.get("a", 1.0)), float(block.get("conv", 1.0)))
    if fam == "tabulated":
        if "K_table" not in block:
            raise KernelError("tabulated kernel needs K_table")
        return tabulated_pair(block["K_table"], block.get("G_table"), bool(block.get("symmetrize", False)))
    raise KernelError(f"unknown kernel family {fam!r}")


# ------------------------------------------------------------------ moments


def _ladder_integral(fn, pair: KernelPair, rtol: float = 1e-12, levels: int = 14) -> float:
    """int_R fn over [-R, R] with R doubling from 10*support until it settles."""
    r0 = 10.0 * pair.support
    pts = [p for p in pair.kinks if -r0 < p < r0] or None
    quad = lambda a, b, points=None: integrate.quad(
        fn, a, b, points=points, limit=500, epsabs=1e-15, epsrel=1e-13
    )[0]
    total = quad(-r0, r0, pts)
    prev_inc = None
    r = r0
    for _ in range(levels):
        inc = quad(-2 * r, -r) + quad(r, 2 * r)
        total += inc
        r *= 2
        scale = max(1.0, abs(total))
        if abs(inc) <= rtol * scale:
            return total
        if prev_inc is not None and prev_inc != 0.0:
            rho = inc / prev_inc
            # geometric tail: extrapolate, accept when the correction is tiny
            if 0.0 < rho < 0.75 and abs(inc * rho / (1 - rho)) <= rtol * scale:
                return total + inc * rho / (1 - rho)
        prev_inc = inc
    raise NonIntegrable(f"integral did not converge up to R = {r:g}")


def moment_A(pair: KernelPair, quadrature: str = "adaptive") -> float:
    """A = 1/2 int K(z) z^2 dz; closed form preferred, always cross-checked."""
    quad_val = 0.5 * _ladder_integral(lambda z: float(pair.K(np.array(z))) * z * z, pair)
    return _prefer_closed(pair.closed_A, quad_val, "A", quadrature)


def moment_B(pair: KernelPair, quadrature: str = "adaptive") -> float:
    """B = int G(z) z dz."""
    quad_val = _ladder_integral(lambda z: float(pair.G(np.array(z))) * z, pair)
    return _prefer_closed(pair.closed_B, quad_val, "B", quadrature)


def _prefer_closed(closed, quad_val, name, quadrature):
    if quadrature not in ("adaptive", "quadrature"):
        raise ValueError(f"unknown quadrature scheme {quadrature!r}")
    if closed is None or quadrature == "quadrature":
        return quad_val
    if abs(closed - quad_val) > 1e-9 * max(1.0, abs(closed)):
        raise KernelError(f"closed-form {name}={closed!r} disagrees with quadrature {quad_val!r}")
    return closed


def kernel_mass(pair: KernelPair) -> float:
    return _ladder_integral(lambda z: float(pair.K(np.array(z))), pair)


# ------------------------------------------------------------------ validation


@dataclass
class MomentReport:
    A: float
    B: float
    C_GK: float
    mass_K: float
    flags: dict

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "C_GK": self.C_GK,
            "mass_K": self.mass_K,
            "flags": dict(self.flags),
            "valid": self.valid,
        }


def symmetric_samples(half_width: float, n: int = DEFAULT_SAMPLES) -> np.ndarray:
    """n points (n odd after adjustment) exactly symmetric about 0."""
    half = max(n // 2, 1)
    pos = np.linspace(0.0, half_width, half + 1)
    return np.concatenate([-pos[:0:-1], pos])


def domination_constant(Kv: np.ndarray, Gv: np.ndarray, tol: float = 0.0) -> float:
    """Smallest C with |G| <= C K on the samples."""
    Kv = np.asarray(Kv, dtype=float)
    Gv = np.abs(np.asarray(Gv, dtype=float))
    pos = Kv > 0
    if np.any(Gv[~pos] > tol):
        bad = int(np.flatnonzero(~pos & (Gv > tol))[0])
        raise DominationFailure(f"|G| = {Gv[bad]:.3e} where K = 0 (sample {bad})")
    if not np.any(pos):
        return 0.0
    return float(np.max(Gv[pos] / Kv[pos]))


def validate_kernel_pair(
    pair: KernelPair, sample_set: Optional[Sequence[float]] = None, tol: float = 1e-12
) -> MomentReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    xs = symmetric_samples(pair.support) if sample_set is None else np.asarray(sample_set, float)
    if not np.allclose(np.sort(xs), np.sort(-xs), rtol=0.0, atol=tol * max(1.0, np.max(np.abs(xs)))):
        raise ValueError("sample_set must be symmetric about 0")
    xs = np.sort(xs)
    Kv, Kr = pair.k(xs), pair.k(-xs)
    Gv, Gr = pair.g(xs), pair.g(-xs)
    kscale = max(1.0, float(np.max(np.abs(Kv))))
    gscale = max(1.0, float(np.max(np.abs(Gv))))

    flags = {
        "K_nonnegative": bool(np.min(Kv) >= -tol),
        "K_even": bool(np.max(np.abs(Kv - Kr)) <= tol * kscale),
        "G_odd": bool(np.max(np.abs(Gv + Gr)) <= tol * gscale),
    }
    C = domination_constant(Kv, Gv, tol=tol)
    flags["G_dominated"] = bool(np.isfinite(C))

    mass_K = kernel_mass(pair)
    flags["K_mass_one"] = abs(mass_K - 1.0) <= MASS_TOL
    A = moment_A(pair)
    B = moment_B(pair)
    _ladder_integral(lambda z: abs(float(pair.G(np.array(z)))) * (1.0 + z * z), pair)
    flags["finite_moments"] = True

    report = MomentReport(A=A, B=B, C_GK=C, mass_K=mass_K, flags=flags)
    if not report.valid:
        failed = [k for k, v in flags.items() if not v]
        log.info("kernel pair %s fails: %s", pair.family, ", ".join(failed))
    if pair.closed_C_GK is not None and C > pair.closed_C_GK * (1 + 1e-12) + tol:
        warnings.warn(f"sampled C_GK={C} exceeds the family value {pair.closed_C_GK}")
    return report
