import math

import numpy as np
import pytest

from nlburgers.errors import DominationFailure, KernelError, NonIntegrable
from nlburgers.kernels import (
    KernelPair,
    domination_constant,
    exponential_pair,
    gaussian_pair,
    kernel_mass,
    moment_A,
    moment_B,
    pair_from_config,
    symmetric_samples,
    tabulated_pair,
    tophat_pair,
    validate_kernel_pair,
)


def test_exponential_reference_constants():
    # K = e^{-|x|}/2, G = K': A = 1/2 int z^2 e^{-|z|}/2 = 1, B = int z G = -1, |G|/K = 1
    rep = validate_kernel_pair(exponential_pair(1.0, 1.0))
    assert rep.valid
    assert rep.A == pytest.approx(1.0, abs=1e-12)
    assert rep.B == pytest.approx(-1.0, abs=1e-12)
    assert rep.C_GK == pytest.approx(1.0, abs=1e-12)
    assert rep.mass_K == pytest.approx(1.0, abs=1e-12)


def test_tophat_constants_by_hand():
    # K = 1/2 on [-1, 1]: A = 1/2 * int_{-1}^{1} z^2/2 = 1/6
    # G = -x/2 on [-1, 1]: B = -int z^2/2 = -1/3, sup|G|/K = 1
    pair = tophat_pair(1.0, 1.0)
    rep = validate_kernel_pair(pair)
    assert rep.valid
    assert rep.A == pytest.approx(1 / 6, abs=1e-12)
    assert rep.B == pytest.approx(-1 / 3, abs=1e-12)
    assert rep.C_GK == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_gaussian_moments(sigma):
    pair = gaussian_pair(sigma, 1.0)
    assert moment_A(pair) == pytest.approx(sigma**2 / 2, rel=1e-10)
    assert moment_A(pair, quadrature="quadrature") == pytest.approx(sigma**2 / 2, rel=1e-10)
    assert moment_B(pair, quadrature="quadrature") == pytest.approx(moment_B(pair), rel=1e-10)
    assert kernel_mass(pair) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("make", [exponential_pair, gaussian_pair, tophat_pair])
def test_closed_forms_match_quadrature(make):
    pair = make(1.3, 0.7)
    assert moment_A(pair, "quadrature") == pytest.approx(pair.closed_A, rel=1e-9)
    if pair.closed_B is not None:
        assert moment_B(pair, "quadrature") == pytest.approx(pair.closed_B, rel=1e-9, abs=1e-12)


def test_zero_G_gives_B_zero_and_C_zero():
    rep = validate_kernel_pair(exponential_pair(1.0, 0.0))
    assert rep.valid
    assert rep.B == 0.0
    assert rep.C_GK == 0.0


@pytest.mark.parametrize("make", [exponential_pair, gaussian_pair, tophat_pair])
@pytest.mark.parametrize("lam", [0.5, 2.0, 3.0])
def test_rescaling_is_scale_consistent(make, lam):
    # K_lam(x) = lam K(lam x): mass and C_GK unchanged, A ~ lam^-2, B ~ lam^-1
    base = make(1.0, 1.0)
    r0 = validate_kernel_pair(base)
    r1 = validate_kernel_pair(base.rescaled(lam))
    assert r1.mass_K == pytest.approx(r0.mass_K, abs=1e-10)
    assert r1.C_GK == pytest.approx(r0.C_GK, rel=1e-10)
    assert moment_A(base.rescaled(lam), "quadrature") == pytest.approx(r0.A / lam**2, rel=1e-10)
    assert moment_B(base.rescaled(lam), "quadrature") == pytest.approx(r0.B / lam, rel=1e-10)


def test_negated_G_flips_B_keeps_C():
    base = exponential_pair(1.0, 1.0)
    r0, r1 = validate_kernel_pair(base), validate_kernel_pair(base.negated_G())
    assert r1.B == pytest.approx(-r0.B, abs=1e-12)
    assert r1.C_GK == r0.C_GK


def test_heavy_tail_not_integrable():
    K = lambda x: 1.0 / (math.pi * (1.0 + np.asarray(x, float) ** 2))
    G = lambda x: np.zeros_like(np.asarray(x, float))
    pair = KernelPair("custom", K, G, {}, support=1.0)
    with pytest.raises(NonIntegrable):
        moment_A(pair)
    with pytest.raises(NonIntegrable):
        validate_kernel_pair(pair)


def test_domination_failure_when_K_vanishes_under_G():
    x = symmetric_samples(2.0, 1001)
    Kv = np.where(np.abs(x) < 1, 0.5, 0.0)
    Gv = -0.1 * x
    with pytest.raises(DominationFailure):
        domination_constant(Kv, Gv)


def test_domination_constant_value():
    x = symmetric_samples(5.0, 2001)
    Kv = np.exp(-np.abs(x)) / 2
    assert domination_constant(Kv, 0.3 * Kv * np.sign(x)) == pytest.approx(0.3, rel=1e-14)


def test_non_odd_table_fails_validation():
    pair = tabulated_pair([[-1, 0], [0, 1], [1, 0]], [[-1, 0], [0, 0.25], [1, 0]])
    rep = validate_kernel_pair(pair)
    assert not rep.flags["G_odd"]
    assert not rep.valid


def test_symmetrized_table_passes():
    pair = tabulated_pair([[-1, 0], [0, 1], [1, 0]], [[-1, 0], [0, 0.25], [1, 0]], symmetrize=True)
    assert validate_kernel_pair(pair).flags["G_odd"]


def test_hat_table_moments():
    # hat K = 1 - |x| on [-1, 1]: mass 1, A = 1/2 * 2 int_0^1 z^2 (1 - z) = 1/12
    pair = tabulated_pair([[-1, 0], [0, 1], [1, 0]])
    assert kernel_mass(pair) == pytest.approx(1.0, abs=1e-12)
    assert moment_A(pair) == pytest.approx(1 / 12, rel=1e-10)


def test_unnormalized_K_flagged():
    pair = tabulated_pair([[-1, 0], [0, 2], [1, 0]])
    rep = validate_kernel_pair(pair)
    assert not rep.flags["K_mass_one"]


def test_pair_from_config_rejects_unknown_family():
    with pytest.raises(KernelError):
        pair_from_config({"family": "lorentz"})


def test_report_is_json_friendly():
    import json

    json.dumps(validate_kernel_pair(exponential_pair()).as_dict())
