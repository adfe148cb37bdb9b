"""Uniform periodic grid, discrete kernels and convolution.

Even kernels are symmetrized and normalized so that h * sum(w) == 1; odd
kernels are antisymmetrized so that h * sum(w) == 0. With these two
properties the discrete equation conserves mass and keeps constants as
equilibria, exactly as the continuous one does.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _accel
from .errors import DegenerateKernel, GridMismatch

TAIL_WARN = 1e-8


@dataclass(frozen=True)
class Grid:
    """Points x_j = -L + j h, j = 0..N-1, with h = 2L/N, on the circle [-L, L)."""

    N: int
    L: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"grid needs N >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"half-period L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Signed periodic offsets j*h for j < N/2 and (j - N)*h beyond."""
        j = np.arange(self.N)
        return np.where(j <= self.N // 2, j, j - self.N) * self.h


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.grid.N

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True, eq=False)
class DiscreteKernel:
    grid: Grid
    weights: np.ndarray
    parity: str
    raw_mass: float = float("nan")

    @property
    def discrete_mass(self) -> float:
        return self.grid.h * float(np.sum(self.weights))

    @cached_property
    def spectrum(self) -> np.ndarray:
        """h * rfft(w) with the parity made exact in Fourier space."""
        s = self.grid.h * np.fft.rfft(self.weights)
        if self.parity == "even":
            s = s.real.astype(complex)
            s[0] = 1.0
        else:
            s = 1j * s.imag
            s[0] = 0.0
            if self.grid.N % 2 == 0:
                s[-1] = 0.0
        return s

    def second_moment(self) -> float:
        """h * sum w_j z_j^2 over the signed periodic offsets."""
        z = self.grid.offsets
        return self.grid.h * float(np.sum(self.weights * z * z))

    def first_moment(self) -> float:
        z = self.grid.offsets
        return self.grid.h * float(np.sum(self.weights * z))


def _reflect(w: np.ndarray) -> np.ndarray:
    return w[(-np.arange(w.shape[0])) % w.shape[0]]


def sample_kernel(fn, grid: Grid, parity: str) -> DiscreteKernel:
    """Sample ``fn`` at the periodic offsets and enforce exact parity."""
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    raw = np.asarray(fn(grid.offsets), dtype=float)
    _check_tail(fn, grid)
    if parity == "even":
        w = 0.5 * (raw + _reflect(raw))
        raw_mass = grid.h * float(np.sum(w))
        if not raw_mass > 0:
            raise DegenerateKernel(f"even kernel has discrete mass {raw_mass!r}")
        w = w / raw_mass
        return DiscreteKernel(grid, w, "even", raw_mass)
    w = 0.5 * (raw - _reflect(raw))
    w[0] = 0.0
    if grid.N % 2 == 0:
        w[grid.N // 2] = 0.0
    return DiscreteKernel(grid, w, "odd", grid.h * float(np.sum(w)))


def _check_tail(fn, grid: Grid):
    inner = np.abs(np.asarray(fn(grid.offsets), dtype=float))
    outer_x = grid.L + grid.h * np.arange(1, 2 * grid.N + 1)
    outer = np.abs(np.asarray(fn(outer_x), dtype=float)) + np.abs(np.asarray(fn(-outer_x), dtype=float))
    total = float(np.sum(inner) + np.sum(outer))
    if total > 0 and float(np.sum(outer)) > TAIL_WARN * total:
        warnings.warn(
            f"kernel tail beyond L={grid.L:g} carries {np.sum(outer) / total:.2e} of its mass",
            stacklevel=3,
        )


def discretize_pair(pair, grid: Grid):
    """Discrete (K, G) for a KernelPair on ``grid``."""
    return sample_kernel(pair.K, grid, "even"), sample_kernel(pair.G, grid, "odd")


def discrete_domination(Kd: DiscreteKernel, Gd: DiscreteKernel) -> float:
    """Smallest C with |g_j| <= C k_j on the discrete weights."""
    from .kernels import domination_constant

    return domination_constant(Kd.weights, Gd.weights)


def kernel_hash(*kernels: DiscreteKernel) -> str:
    digest = hashlib.sha256()
    for k in kernels:
        digest.update(k.parity.encode())
        digest.update(np.ascontiguousarray(k.weights, dtype="<f8").tobytes())
    return digest.hexdigest()[:16]


# ------------------------------------------------------------------ operators


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatch(f"grid {a} does not match {b}")


def convolve_array(k: DiscreteKernel, f: np.ndarray, method: str = "fft") -> np.ndarray:
    if method == "fft":
        return np.fft.irfft(k.spectrum * np.fft.rfft(f), n=k.grid.N)
    if method == "direct":
        return _accel.direct_convolve(
            np.ascontiguousarray(k.weights), np.ascontiguousarray(f, dtype=float), k.grid.h
        )
    raise ValueError(f"unknown convolution method {method!r}")


def convolve(k: DiscreteKernel, f: GridFunction, method: str = "fft") -> GridFunction:
    """(k * f)_i = h sum_j w_{(i-j) mod N} f_j."""
    _same_grid(k.grid, f.grid)
    return GridFunction(f.grid, convolve_array(k, f.values, method))


def lp_norm(f, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    v = np.abs(np.asarray(f.values))
    if np.isinf(p):
        return float(np.max(v))
    h = f.grid.h
    if p == 1:
        return h * float(np.sum(v))
    if p == 2:
        return float(np.sqrt(h * np.dot(v, v)))
    return float((h * np.sum(v**p)) ** (1.0 / p))


def mass(f) -> float:
    return f.grid.h * float(np.sum(f.values))


def interpolate(f, x, kind: str = "cubic", periodic: bool = True):
    """Value of the periodic (or zero-extended) interpolant of ``f`` at ``x``.

    ``cubic`` is 4-point Lagrange (fourth order), ``linear`` is hat functions.
    With ``periodic=False`` the samples are extended by zero outside [-L, L).
    """
    grid = f.grid
    xa = np.asarray(x, dtype=float)
    s = (xa + grid.L) / grid.h
    base = np.floor(s)
    t = s - base
    base = base.astype(np.int64)
    vals = f.values
    n = grid.N

    def node(i):
        if periodic:
            return vals[i % n]
        inside = (i >= 0) & (i < n)
        return np.where(inside, vals[np.clip(i, 0, n - 1)], 0.0)

    if kind == "linear":
        out = (1 - t) * node(base) + t * node(base + 1)
    elif kind == "cubic":
        wm1 = -t * (t - 1) * (t - 2) / 6.0
        w0 = (t + 1) * (t - 1) * (t - 2) / 2.0
        w1 = -(t + 1) * t * (t - 2) / 2.0
        w2 = (t + 1) * t * (t - 1) / 6.0
        out = wm1 * node(base - 1) + w0 * node(base) + w1 * node(base + 1) + w2 * node(base + 2)
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ snapshot files


def write_snapshot(stem, f: GridFunction, t: float, khash: str = "") -> tuple:
    """``<stem>.bin`` holds N little-endian float64; ``<stem>.json`` the metadata."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    binpath = stem.with_suffix(".bin")
    meta = stem.with_suffix(".json")
    binpath.write_bytes(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    record = {"N": f.grid.N, "L": f.grid.L, "t": t, "mass": mass(f), "kernel_hash": khash}
    meta.write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
    return binpath, meta


def read_snapshot(stem):
    stem = Path(stem)
    meta = json.loads(stem.with_suffix(".json").read_text())
    values = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8").astype(float)
    grid = Grid(int(meta["N"]), float(meta["L"]))
    return GridFunction(grid, values), meta
