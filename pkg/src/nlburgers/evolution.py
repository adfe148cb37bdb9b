"""Time integration of u_t = K*u - u + G*(u^2)/4 + (G*u) u/2 on the periodic grid."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import config as cfgmod
from . import diagnostics as diag
from .discretization import (
    DiscreteKernel,
    Grid,
    GridFunction,
    convolve_array,
    discrete_domination,
    discretize_pair,
    interpolate,
    kernel_hash,
    lp_norm,
    mass,
    read_snapshot,
    write_snapshot,
)
from .errors import ConfigInvalid, GridMismatch, MassDrift, NonFinite, OutOfRange
from .kernels import moment_A, pair_from_config, validate_kernel_pair

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("t", "mass", "L1", "L2", "L4", "Linf", "I1", "I2", "tail")
MASS_RTOL = 1e-10


# ------------------------------------------------------------------ right-hand side


def rhs_array(u: np.ndarray, K: DiscreteKernel, G: DiscreteKernel) -> np.ndarray:
    n = u.shape[0]
    u_hat = np.fft.rfft(u)
    Ku = np.fft.irfft(K.spectrum * u_hat, n=n)
    Gu = np.fft.irfft(G.spectrum * u_hat, n=n)
    Gu2 = np.fft.irfft(G.spectrum * np.fft.rfft(u * u), n=n)
    return Ku - u + 0.25 * Gu2 + 0.5 * Gu * u


def rhs(u: GridFunction, K: DiscreteKernel, G: DiscreteKernel, method: str = "fft") -> GridFunction:
    if K.grid != u.grid or G.grid != u.grid:
        raise GridMismatch("kernels and u live on different grids")
    if method == "fft":
        return GridFunction(u.grid, rhs_array(u.values, K, G))
    v = u.values
    Ku = convolve_array(K, v, method)
    Gu = convolve_array(G, v, method)
    Gu2 = convolve_array(G, v * v, method)
    return GridFunction(u.grid, Ku - v + 0.25 * Gu2 + 0.5 * Gu * v)


def stable_dt(config: Optional[dict], C_GK: float, sup_u: float) -> float:
    """safety / (2 (1 + 1.5 C_GK sup_u)), safety from ``config["time"]`` (default 0.5).

    The right-hand side is Lipschitz in sup norm with constant at most
    2 + 3 C_GK sup_u on the ball it leaves invariant.
    """
    if sup_u < 0:
        raise ValueError("sup_u must be nonnegative")
    safety = 0.5
    if config:
        safety = float(config.get("time", config).get("safety", safety))
    return safety / (2.0 * (1.0 + 1.5 * C_GK * sup_u))


# ------------------------------------------------------------------ state and stepping


@dataclass
class SimulationState:
    t: float
    u: GridFunction
    mass0: float
    K: DiscreteKernel
    G: DiscreteKernel
    steps: int = 0

    @classmethod
    def initial(cls, u0: GridFunction, K: DiscreteKernel, G: DiscreteKernel, t: float = 0.0):
        return cls(t=t, u=u0, mass0=mass(u0), K=K, G=G)


def _advance(u: np.ndarray, dt: float, stepper: str, K, G) -> np.ndarray:
    if stepper == "euler":
        return u + dt * rhs_array(u, K, G)
    if stepper == "rk4":
        k1 = rhs_array(u, K, G)
        k2 = rhs_array(u + 0.5 * dt * k1, K, G)
        k3 = rhs_array(u + 0.5 * dt * k2, K, G)
        k4 = rhs_array(u + dt * k3, K, G)
        return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    raise ValueError(f"unknown stepper {stepper!r}")


BLOWUP = 1e6


def _check(values: np.ndarray, grid: Grid, mass0: float, t: float, sup0: float = 1.0):
    if not np.all(np.isfinite(values)):
        raise NonFinite(f"non-finite values at t={t:.6g}; the time step is too large")
    if np.max(np.abs(values)) > BLOWUP * (1.0 + sup0):
        raise NonFinite(f"solution exceeded {BLOWUP:g} x (1 + ||phi||_inf) at t={t:.6g}; unstable step")
    drift = abs(grid.h * float(np.sum(values)) - mass0)
    if drift > MASS_RTOL * (1.0 + abs(mass0)):
        raise MassDrift(f"mass drifted by {drift:.3e} at t={t:.6g}")


def step(state: SimulationState, dt: float, stepper: str = "rk4") -> SimulationState:
    """One explicit step; returns a new state, the input is left untouched."""
    new = _advance(state.u.values, dt, stepper, state.K, state.G)
    t = state.t + dt
    _check(new, state.u.grid, state.mass0, t, float(np.max(np.abs(state.u.values))))
    return SimulationState(t, GridFunction(state.u.grid, new), state.mass0, state.K, state.G, state.steps + 1)


# ------------------------------------------------------------------ initial data


def build_initial(block: dict, grid: Grid, seed: int = 0) -> np.ndarray:
    kind = block.get("kind", "gaussian")
    x = grid.x
    sign = float(block.get("sign", 1))
    if sign not in (-1.0, 1.0):
        raise ConfigInvalid("initial.sign must be +1 or -1")
    m = float(block.get("mass", 0.0))
    c = float(block.get("center", 0.0))
    if kind == "zero":
        return np.zeros(grid.N)
    if kind == "gaussian":
        if m < 0:
            raise ConfigInvalid("initial.mass must be >= 0; use sign for negative data")
        if m == 0:
            return np.zeros(grid.N)
        if block.get("width") is not None:
            sigma = float(block["width"])
        elif block.get("peak") is not None:
            sigma = m / (float(block["peak"]) * math.sqrt(2 * math.pi))
        else:
            raise ConfigInvalid("gaussian initial data needs peak or width")
        phi = np.exp(-0.5 * ((x - c) / sigma) ** 2)
    elif kind == "tophat":
        w = float(block.get("half_width", 1.0))
        phi = (np.abs(x - c) <= w).astype(float)
    elif kind == "tabulated":
        table = np.asarray(block["table"], dtype=float)
        phi = np.interp(x, table[:, 0], table[:, 1], left=0.0, right=0.0)
        if "mass" not in block:
            return sign * phi
    elif kind == "random":
        rng = np.random.default_rng(int(block.get("seed", seed)))
        nb = int(block.get("bumps", 4))
        spread = float(block.get("spread", 10.0))
        phi = np.zeros(grid.N)
        for _ in range(nb):
            a, ctr, w = rng.uniform(0.2, 1.0), rng.uniform(-spread, spread), rng.uniform(0.5, 3.0)
            phi += a * np.exp(-0.5 * ((x - c - ctr) / w) ** 2)
        peak = float(block.get("peak", 0.3))
        phi *= peak / np.max(phi)
        if "mass" not in block:
            return sign * phi
    else:
        raise ConfigInvalid(f"unknown initial kind {kind!r}")
    total = grid.h * float(np.sum(phi))
    if total <= 0:
        raise ConfigInvalid("initial data has no mass on this grid")
    return sign * phi * (m / total)


# ------------------------------------------------------------------ runs


def snapshot_times(T_final: float, t_min: float, ratio: float) -> np.ndarray:
    times = [0.0]
    k = 0
    while True:
        t = t_min * ratio**k
        if t >= T_final * (1 - 1e-12):
            break
        times.append(t)
        k += 1
    times.append(float(T_final))
    return np.array(times)


@dataclass
class RunRecord:
    config: dict
    grid: Grid
    K: DiscreteKernel
    G: DiscreteKernel
    times: np.ndarray
    snapshots: list
    series: "diag.TimeSeries"
    meta: dict = field(default_factory=dict)

    @property
    def T_final(self) -> float:
        return float(self.times[-1])

    @property
    def mass0(self) -> float:
        return mass(self.snapshot(0))

    def snapshot(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.snapshots[i])

    def index_of(self, t: float, rtol: float = 1e-9) -> Optional[int]:
        i = int(np.argmin(np.abs(self.times - t)))
        return i if abs(self.times[i] - t) <= rtol * max(1.0, abs(t)) else None

    def at_time(self, t: float) -> GridFunction:
        """Snapshot at ``t``, linear in time between bracketing snapshots."""
        if t < -1e-12 or t > self.T_final * (1 + 1e-12):
            raise OutOfRange(f"t={t} outside the run range [0, {self.T_final}]")
        i = self.index_of(t)
        if i is not None:
            return self.snapshot(i)
        j = int(np.searchsorted(self.times, t))
        t0, t1 = self.times[j - 1], self.times[j]
        w = (t - t0) / (t1 - t0)
        return GridFunction(self.grid, (1 - w) * self.snapshots[j - 1] + w * self.snapshots[j])

    # -------------------------------------------------------------- files

    def save(self, out) -> dict:
        out = Path(out)
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(self.config, sort_keys=True, indent=2) + "\n")
        (out / "series.csv").write_text(self.series.to_csv())
        khash = self.meta.get("kernel_hash", "")
        paths = []
        for i, t in enumerate(self.times):
            b, m = write_snapshot(out / "snapshots" / f"t_{i:04d}", self.snapshot(i), float(t), khash)
            paths.append(str(b.relative_to(out)))
        meta = dict(self.meta, times=[float(t) for t in self.times], snapshots=paths)
        (out / "run.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
        return meta

    @classmethod
    def load(cls, out) -> "RunRecord":
        out = Path(out)
        cfg = cfgmod.normalize(json.loads((out / "config.json").read_text()))
        meta = json.loads((out / "run.json").read_text())
        grid = Grid(int(meta["N"]), float(meta["L"]))
        pair = pair_from_config(cfg["kernel"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            K, G = discretize_pair(pair, grid)
        if meta.get("kernel_hash") and kernel_hash(K, G) != meta["kernel_hash"]:
            raise ConfigInvalid("stored kernel hash does not match the config's kernels")
        snaps = []
        for i in range(len(meta["times"])):
            gf, _ = read_snapshot(out / "snapshots" / f"t_{i:04d}")
            snaps.append(gf.values)
        series = diag.TimeSeries.from_csv((out / "series.csv").read_text())
        return cls(cfg, grid, K, G, np.array(meta["times"]), snaps, series, meta)


def resolve_grid(cfg: dict, pair) -> Grid:
    L = cfg["grid"]["L"]
    if L is None:
        A = moment_A(pair)
        L = 25.0 * math.sqrt(float(cfg["time"]["T_final"]) * A)
        L = max(L, 4.0 * pair.support)
    return Grid(int(cfg["grid"]["N"]), float(L))


def smallness_thresholds(C_GK: float) -> tuple:
    """(1/C_GK, 1/(2 C_GK)): stability threshold and decay/asymptotics threshold."""
    if C_GK <= 0:
        return math.inf, math.inf
    return 1.0 / C_GK, 0.5 / C_GK


def simulate(config: dict | None = None, phi: Optional[np.ndarray] = None) -> RunRecord:
    """Run a normalized config to T_final; ``phi`` overrides the initial block."""
    cfg = cfgmod.normalize(config)
    pair = pair_from_config(cfg["kernel"])
    report = validate_kernel_pair(pair)
    if not report.valid:
        failed = [k for k, v in report.flags.items() if not v]
        if cfg["policy"] == "enforce":
            raise ConfigInvalid(f"kernel hypotheses fail: {', '.join(failed)}")
        warnings.warn(f"kernel hypotheses fail ({', '.join(failed)}); running for exploration only")
    grid = resolve_grid(cfg, pair)
    K, G = discretize_pair(pair, grid)
    C = max(report.C_GK, discrete_domination(K, G))

    u0 = build_initial(cfg["initial"], grid, cfg["seed"]) if phi is None else np.asarray(phi, float)
    u0 = GridFunction(grid, u0)
    sup0 = lp_norm(u0, np.inf)
    stab, decay = smallness_thresholds(C)
    if cfg["policy"] == "enforce" and not sup0 < decay:
        raise ConfigInvalid(f"||phi||_inf = {sup0:.4g} violates the smallness bound 1/(2 C_GK) = {decay:.4g}")
    if sup0 >= stab:
        warnings.warn(f"||phi||_inf = {sup0:.4g} >= 1/C_GK = {stab:.4g}: outside the small-data regime")
    elif sup0 >= decay:
        warnings.warn(f"||phi||_inf = {sup0:.4g} in [1/(2C_GK), 1/C_GK): exploratory band")

    tc = cfg["time"]
    dt_stable = stable_dt(cfg, C, sup0)
    dt = dt_stable if tc["dt"] is None else float(tc["dt"])
    if dt > dt_stable * (1 + 1e-12):
        if cfg["policy"] == "enforce":
            raise ConfigInvalid(f"dt = {dt:.4g} exceeds stable_dt = {dt_stable:.4g}; use policy=warn to override")
        warnings.warn(f"dt = {dt:.4g} exceeds stable_dt = {dt_stable:.4g}")

    sc = cfg["snapshots"]
    times = snapshot_times(float(tc["T_final"]), float(sc["t_min"]), float(sc["ratio"]))
    dcfg = cfg["diagnostics"]
    tail_R = dcfg["tail_R"]
    if tail_R is None:
        tail_R = min(10.0 * math.sqrt(report.A * float(tc["T_final"])), 0.49 * grid.L)
    direct_max = int(dcfg["direct_max_N"])

    state = SimulationState.initial(u0, K, G)
    snaps = [u0.values.copy()]
    rows = [_diag_row(u0, 0.0, K, G, tail_R, direct_max)]
    for target in times[1:]:
        nsub = max(1, math.ceil((target - state.t) / dt - 1e-9))
        sub = (target - state.t) / nsub
        values = state.u.values
        for k in range(nsub):
            values = _advance(values, sub, tc["stepper"], K, G)
            state.steps += 1
            _check(values, grid, state.mass0, state.t + (k + 1) * sub, sup0)
        state = SimulationState(float(target), GridFunction(grid, values), state.mass0, K, G, state.steps)
        snaps.append(values.copy())
        rows.append(_diag_row(state.u, float(target), K, G, tail_R, direct_max))

    series = diag.TimeSeries.from_rows(SERIES_COLUMNS, rows)
    meta = {
        "N": grid.N,
        "L": grid.L,
        "h": grid.h,
        "dt": dt,
        "dt_stable": dt_stable,
        "steps": state.steps,
        "C_GK": report.C_GK,
        "C_GK_discrete": discrete_domination(K, G),
        "C_GK_used": C,
        "A": report.A,
        "B": report.B,
        "A_discrete": 0.5 * K.second_moment(),
        "B_discrete": G.first_moment(),
        "kernel_valid": report.valid,
        "kernel_hash": kernel_hash(K, G),
        "config_hash": cfgmod.config_hash(cfg),
        "tail_R": tail_R,
        "sup0": sup0,
        "mass0": state.mass0,
        "seed": cfg["seed"],
    }
    log.info("run finished: %d steps, dt=%.4g, final t=%g", state.steps, dt, state.t)
    return RunRecord(cfg, grid, K, G, times, snaps, series, meta)


def _diag_row(u: GridFunction, t, K, G, tail_R, direct_max):
    v = u.values
    method = "direct" if u.grid.N <= direct_max else "convolution"
    i1 = diag.energy_I1(u, K, method=method)
    if np.min(v) >= -diag.NEG_TOL:
        i2 = diag.energy_I2(u, G, 2, method=method)
    else:
        i2 = float("nan")
    return (
        t,
        mass(u),
        lp_norm(u, 1),
        lp_norm(u, 2),
        lp_norm(u, 4),
        lp_norm(u, np.inf),
        i1,
        i2,
        diag.tail_mass(u, tail_R, check_range=False),
    )


def rescale_snapshot(run: RunRecord, lam: float, t0: float, kind: str = "cubic") -> GridFunction:
    """x -> lam u(lam^2 t0, lam x) on the run grid, zero outside the run domain."""
    if lam <= 0:
        raise OutOfRange("lambda must be positive")
    T = lam * lam * t0
    if T > run.T_final * (1 + 1e-12) or T < 0:
        raise OutOfRange(f"lambda^2 t0 = {T:g} beyond the run's T_final = {run.T_final:g}")
    u = run.at_time(T)
    if lam == 1.0:
        return GridFunction(run.grid, u.values.copy())
    vals = lam * interpolate(u, lam * run.grid.x, kind=kind, periodic=False)
    return GridFunction(run.grid, vals)
