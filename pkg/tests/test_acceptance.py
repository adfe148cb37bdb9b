"""Acceptance gate: one test per criterion, run at the stated tolerances.

The reference configuration is configs/reference.json: exponential pair
(A = 1, B = -1, C_GK = 1), Gaussian data of mass 0.4 and peak 0.3, N = 4096,
L from the sqrt(T) rule, rk4, T = 800. A summary line per criterion is
printed at the end of the session.
"""

import json
import warnings
from pathlib import Path

import numpy as np
import pytest

from nlburgers import config as cfgmod
from nlburgers.cli import main
from nlburgers.diagnostics import (
    check_dissipation,
    check_lemma_i2i1,
    check_poly_inequality,
    comparison_check,
    fit_decay_exponent,
    renormalized_error_rows,
    run_profile,
)
from nlburgers.discretization import Grid, GridFunction, convolve_array, discrete_domination, discretize_pair
from nlburgers.errors import NonFinite
from nlburgers.evolution import rhs, simulate
from nlburgers.kernels import exponential_pair
from nlburgers.profiles import build_profile_closed_form, build_profile_shooting, profile_residual

ROOT = Path(__file__).resolve().parents[1]
REFERENCE = ROOT / "configs" / "reference.json"
SEED = 20240611


@pytest.fixture(scope="session")
def reference_cfg():
    return cfgmod.load(REFERENCE)


@pytest.fixture(scope="session")
def reference_run(reference_cfg):
    return simulate(reference_cfg)


@pytest.fixture(scope="session")
def random_suite():
    """The standing random suite: 50 inputs on an N = 64 grid."""
    grid = Grid(64, 20.0)
    K, G = discretize_pair(exponential_pair(), grid)
    rng = np.random.default_rng(SEED)
    return grid, K, G, [rng.uniform(-1.0, 1.0, 64) for _ in range(50)]


def _double_sum(u, K, G):
    n, h = len(u), K.grid.h
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            d = (i - j) % n
            acc += K.weights[d] * (u[j] - u[i]) + G.weights[d] * ((u[i] + u[j]) / 2.0) ** 2
        out[i] = h * acc
    return out


def test_c01_rhs_matches_double_sum(random_suite, criterion):
    grid, K, G, suite = random_suite
    worst = max(np.max(np.abs(rhs(GridFunction(grid, u), K, G).values - _double_sum(u, K, G))) for u in suite)
    assert criterion(1, worst <= 1e-12, f"rhs vs double sum, 50 inputs N=64: max err {worst:.2e} (tol 1e-12)")


def test_c02_mass_conservation(reference_run, criterion):
    m = reference_run.mass0
    drift = float(np.max(np.abs(reference_run.series["mass"] - m)))
    tol = 1e-10 * (1 + m)
    assert criterion(2, drift <= tol, f"max |mass - m| = {drift:.2e} (tol {tol:.2e})")


def test_c03_stability_and_sign(reference_run, criterion):
    s = reference_run.series
    rise1 = float(np.max(np.diff(s["L1"])))
    rise_inf = float(np.max(np.diff(s["Linf"])))
    low = min(float(np.min(u)) for u in reference_run.snapshots)
    ok = rise1 <= 1e-9 and rise_inf <= 1e-9 and low >= -1e-9
    assert criterion(3, ok, f"max L1 rise {rise1:.2e}, max Linf rise {rise_inf:.2e}, min u {low:.2e} (tol 1e-9)")


def test_c04_energy_dissipation(reference_run, criterion):
    rep = check_dissipation(reference_run)
    assert criterion(4, rep.passed, f"worst slack {rep.worst_slack:.3e}, failing pairs {rep.fitted['failing_pairs']}")


def _lemma_sample(rng, grid):
    x = grid.x
    kind = rng.integers(4)
    if kind == 0:
        u = rng.uniform(0, 1, grid.N)
    elif kind == 1:
        u = np.zeros(grid.N)
        for _ in range(rng.integers(1, 6)):
            u += rng.uniform(0.1, 1) * np.exp(-0.5 * ((x - rng.uniform(-20, 20)) / rng.uniform(0.3, 6)) ** 2)
    elif kind == 2:
        u = np.where(rng.uniform(size=grid.N) < 0.05, rng.uniform(0, 1, grid.N), 0.0)
    else:
        u = rng.uniform(0, 1, grid.N) * (np.abs(x - rng.uniform(-10, 10)) < rng.uniform(1, 15))
    if not np.any(u > 0):
        u[rng.integers(grid.N)] = 1.0
    return u * (rng.uniform(0.0, 0.5) / np.max(u))


def test_c05_lemma_property_suite(criterion):
    grid = Grid(256, 40.0)
    K, G = discretize_pair(exponential_pair(), grid)
    C = discrete_domination(K, G)
    rng = np.random.default_rng(SEED)
    worst, checks = np.inf, 0
    for _ in range(1000):
        u = GridFunction(grid, _lemma_sample(rng, grid))
        for p in range(2, 9):
            worst = min(worst, check_lemma_i2i1(u, K, G, p, C).worst_slack)
            checks += 1
    ok = worst >= -1e-12
    assert criterion(5, ok, f"{checks} lemma checks, worst slack {worst:.3e} (tol -1e-12)")


def test_c06_polynomial_inequality(criterion):
    z = np.logspace(-6, 3, 100_000)
    worst = max(check_poly_inequality(p, z).fitted["max_violation"] for p in range(2, 17))
    assert criterion(6, worst <= 1e-12, f"p = 2..16, 1e5 points: max relative violation {worst:.3e} (tol 1e-12)")


def test_c07_decay_exponents(reference_run, criterion):
    bands = {"L2": (-0.30, -0.20), "L4": (-0.43, -0.32), "L1": (-0.02, 0.005)}
    slopes = {c: fit_decay_exponent(reference_run.series, c, (50.0, 800.0)).slope for c in bands}
    ok = all(lo <= slopes[c] <= hi for c, (lo, hi) in bands.items())
    detail = ", ".join(f"{c} {slopes[c]:+.4f} in [{lo}, {hi}]" for c, (lo, hi) in bands.items())
    assert criterion(7, ok, detail)


def test_c08_profile_oracles(criterion):
    worst_gap = worst_mass = worst_center = 0.0
    for A in (0.5, 1.0, 2.0):
        for B in (-1.0, 0.0, 1.0):
            for m in (0.1, 0.5, 1.0):
                c = build_profile_closed_form(m, A, B)
                s = build_profile_shooting(m, A, B)
                xi = np.linspace(-15, 15, 3001) * np.sqrt(A)
                worst_gap = max(worst_gap, float(np.max(np.abs(c(xi) - s(xi)))))
                worst_mass = max(worst_mass, abs(c.mass() - m), abs(s.mass() - m))
                if B == 0.0:
                    worst_center = max(worst_center, abs(c(0.0) - m / np.sqrt(4 * np.pi * A)))
    f = build_profile_closed_form(1.0, 1.0, -1.0)
    res = [profile_residual(f, np.arange(-8.0, 8.0 + h / 2, h)) for h in (0.04, 0.02, 0.01)]
    orders = [np.log2(res[0] / res[1]), np.log2(res[1] / res[2])]
    ok = worst_gap <= 1e-8 and worst_mass <= 1e-10 and worst_center <= 1e-10 and min(orders) >= 1.9
    detail = (
        f"closed vs shooting {worst_gap:.2e}, mass err {worst_mass:.2e}, B=0 center {worst_center:.2e}, "
        f"residual orders {orders[0]:.3f} {orders[1]:.3f}"
    )
    assert criterion(8, ok, detail)


def test_c09_asymptotic_convergence(reference_run, criterion):
    rows = {r.check: r for r in renormalized_error_rows(reference_run, run_profile(reference_run))}
    e1, e2, mono = rows["renormalized_error_p1"], rows["renormalized_error_p2"], rows["renormalized_error_monotone"]
    t_lo, t_hi = e1.fitted["t_lo"], e1.fitted["t_hi"]
    at_stated_times = np.allclose([t_lo, t_hi], [10.0, 640.0], rtol=1e-12)
    ok = at_stated_times and e1.passed and e2.passed and mono.passed
    detail = (
        f"e1({t_hi:g})/e1({t_lo:g}) = {e1.fitted['ratio']:.4f}, e2 ratio {e2.fitted['ratio']:.4f} (tol 0.5); "
        f"e1 max rise {mono.fitted['max_rise']:.3f} (tol 0.05)"
    )
    assert criterion(9, ok, detail)


def _ordered_pair(seed, grid, cap):
    rng = np.random.default_rng(seed)
    x = grid.x
    u0 = np.zeros(grid.N)
    for _ in range(4):
        u0 += rng.uniform(-1, 1) * np.exp(-0.5 * ((x - rng.uniform(-15, 15)) / rng.uniform(0.5, 4)) ** 2)
    u0 *= rng.uniform(0.2, 0.45) * cap / np.max(np.abs(u0))
    bump = np.exp(-0.5 * ((x - rng.uniform(-10, 10)) / rng.uniform(0.5, 5)) ** 2)
    room = cap - np.max(np.abs(u0))
    v0 = u0 + rng.uniform(0.2, 0.9) * room * bump
    assert np.all(u0 <= v0) and max(np.max(np.abs(u0)), np.max(np.abs(v0))) < cap
    return u0, v0


def test_c10_comparison_principle(reference_cfg, reference_run, criterion):
    cfg = dict(reference_cfg, policy="warn")
    cap = 1.0 / reference_run.meta["C_GK_used"]
    worst = -np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(5):
            u0, v0 = _ordered_pair(SEED + k, reference_run.grid, cap)
            rep = comparison_check(simulate(cfg, phi=u0), simulate(cfg, phi=v0))
            worst = max(worst, rep.fitted["max_violation"])
    assert criterion(10, worst <= 1e-9, f"5 ordered pairs, sup norm < 1/C_GK: max(u - v) = {worst:.2e} (tol 1e-9)")


def test_c11_determinism(tmp_path, random_suite, criterion):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(REFERENCE), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(REFERENCE), "--out", str(b)]) == 0
    same = (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    grid, K, G, suite = random_suite
    gap = max(
        float(np.max(np.abs(convolve_array(k, u, "fft") - convolve_array(k, u, "direct")))) for u in suite for k in (K, G)
    )
    ok = same and gap <= 1e-12
    assert criterion(11, ok, f"series.csv byte-identical: {same}; fft vs direct max gap {gap:.2e} (tol 1e-12)")


def test_c12_negative_controls(reference_cfg, reference_run, criterion):
    dt = 4.0 * reference_run.meta["dt_stable"]
    cfg = json.loads(json.dumps(reference_cfg))
    cfg["time"]["dt"] = dt
    cfg["policy"] = "warn"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            rep = check_dissipation(simulate(cfg))
            flagged = not rep.passed
            how = f"dissipation {'failed' if flagged else 'passed'} (slack {rep.worst_slack:.2e})"
        except NonFinite:
            flagged, how = True, "NonFinite"
    code = main(["validate", "--config", str(ROOT / "configs" / "non_odd_G.json")])
    ok = flagged and code == 1
    detail = f"dt = 4 x stable_dt = {dt:.4f}: {how}; non-odd G validate exit {code}"
    assert criterion(12, ok, detail)
