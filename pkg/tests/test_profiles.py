import math

import numpy as np
import pytest

from nlburgers.discretization import Grid
from nlburgers.errors import NoAdmissibleConstant, NonPositiveTime
from nlburgers.profiles import (
    build_profile_closed_form,
    build_profile_shooting,
    evaluate_U,
    profile_residual,
)

XI = np.linspace(-12.0, 12.0, 241)


@pytest.mark.parametrize("m, A, B", [(1.0, 1.0, -1.0), (0.4, 0.99, -0.99), (2.0, 0.5, 1.0), (-0.7, 2.0, -0.5)])
def test_closed_form_agrees_with_shooting(m, A, B):
    c = build_profile_closed_form(m, A, B)
    s = build_profile_shooting(m, A, B)
    xi = XI * math.sqrt(A)
    assert np.max(np.abs(c(xi) - s(xi))) <= 1e-8
    assert c.f0 == pytest.approx(s.f0, rel=1e-9)


@pytest.mark.parametrize("m", [0.1, 1.0, 3.0])
def test_heat_kernel_when_B_zero(m):
    A = 1.7
    f = build_profile_closed_form(m, A, 0.0)
    gauss = m * np.exp(-XI**2 / (4 * A)) / math.sqrt(4 * math.pi * A)
    np.testing.assert_allclose(f(XI), gauss, rtol=1e-13, atol=1e-300)
    assert f(0.0) == pytest.approx(m / math.sqrt(4 * math.pi * A), abs=1e-14)


@pytest.mark.parametrize("m, B", [(0.4, -1.0), (1.0, 1.0), (-1.0, 0.5)])
def test_mass_and_bernoulli_identity(m, B):
    A = 1.0
    f = build_profile_closed_form(m, A, B)
    assert abs(f.mass() - m) <= 1e-10
    # first integral: A f' + xi f / 2 = (B/2) f^2, with f' by a 4th-order stencil
    xi, d = np.linspace(-6, 6, 25), 1e-3
    fp = (f(xi - 2 * d) - 8 * f(xi - d) + 8 * f(xi + d) - f(xi + 2 * d)) / (12 * d)
    lhs = A * fp + 0.5 * xi * f(xi)
    np.testing.assert_allclose(lhs, 0.5 * B * f(xi) ** 2, atol=1e-10)


def test_sign_of_B_sets_the_skew():
    # flux (B/2) U^2 moves mass with speed B U: to the left when B < 0
    f = build_profile_closed_form(1.0, 1.0, -1.0)
    assert f(-2.0) > f(2.0)
    g = build_profile_closed_form(1.0, 1.0, 1.0)
    assert g(2.0) == pytest.approx(f(-2.0), rel=1e-13)


def test_zero_mass_profile():
    for build in (build_profile_closed_form, build_profile_shooting):
        f = build(0.0, 1.0, -1.0)
        assert np.all(f(XI) == 0.0)
        assert f.mass() == 0.0


def test_residual_is_second_order():
    f = build_profile_closed_form(1.0, 1.0, -1.0)
    res = [profile_residual(f, np.arange(-8.0, 8.0 + h / 2, h)) for h in (0.04, 0.02, 0.01)]
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)
    assert res[1] / res[2] == pytest.approx(4.0, rel=0.05)
    assert profile_residual(f, Grid(400, 8.0)) < 1e-3


def test_overflowing_mass_has_no_constant():
    with pytest.raises(NoAdmissibleConstant):
        build_profile_closed_form(5000.0, 1.0, 1.0)


def test_bad_A():
    with pytest.raises(ValueError):
        build_profile_closed_form(1.0, 0.0, 1.0)


def test_source_solution_scaling():
    f = build_profile_closed_form(0.4, 1.0, -1.0)
    x = np.linspace(-50, 50, 20001)
    for t in (1.0, 4.0, 25.0):
        U = evaluate_U(f, t, x)
        assert np.sum(U) * (x[1] - x[0]) == pytest.approx(0.4, abs=1e-8)
    np.testing.assert_allclose(evaluate_U(f, 4.0, x), 0.5 * f(x / 2.0))
    with pytest.raises(NonPositiveTime):
        evaluate_U(f, 0.0, x)


@pytest.mark.parametrize("A", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("B", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("m", [0.1, 0.5, 1.0])
def test_gaussian_rate_tail(m, A, B):
    f = build_profile_closed_form(m, A, B)
    peak = float(np.max(f(np.linspace(-10, 10, 4001) * math.sqrt(A))))
    xi = np.concatenate([np.linspace(-40, -10, 301), np.linspace(10, 40, 301)]) * math.sqrt(A)
    assert np.all(np.abs(f(xi)) <= peak * np.exp(-xi**2 / (8 * A)))
