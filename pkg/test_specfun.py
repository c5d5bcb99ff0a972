import math

import numpy as np
import pytest

import specfun
from errors import DomainError

EULER_GAMMA = 0.5772156649015329


def test_log_gamma_integers():
    assert specfun.log_gamma(1.0) == pytest.approx(0.0, abs=1e-14)
    assert specfun.log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)


def test_log_gamma_rejects_non_positive():
    with pytest.raises(DomainError):
        specfun.log_gamma(0.0)


@pytest.mark.parametrize("z", [0.0, 0.3, 1.0, 2.5, 10.0])
def test_upper_gamma_k1_is_exponential(z):
    assert specfun.upper_gamma_regularized(1, z) == pytest.approx(math.exp(-z), rel=1e-12)


def test_upper_gamma_k2_poisson_cdf():
    assert specfun.upper_gamma_regularized(2, 1.0) == pytest.approx(2.0 / math.e, rel=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0, 7.5])
def test_upper_and_lower_gamma_sum_to_one(r):
    for z in np.linspace(0.0, 20.0, 41):
        total = specfun.upper_gamma_regularized(r, z) + specfun.lower_gamma_regularized(r, z)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_upper_gamma_rejects_negative_argument():
    with pytest.raises(DomainError):
        specfun.upper_gamma_regularized(1, -1.0)


def test_erf_inverse_round_trip():
    y = np.linspace(-0.999, 0.999, 201)
    np.testing.assert_allclose(specfun.erf(specfun.erf_inv(y)), y, atol=1e-12)


def test_erf_inverse_domain():
    with pytest.raises(DomainError):
        specfun.erf_inv(1.0)


def test_erfc_scaled_stays_finite():
    x = 30.0
    assert specfun.erfc_scaled(x) == pytest.approx(1.0 / (x * math.sqrt(math.pi)), rel=1e-3)


def test_lambert_w0_known_values():
    assert specfun.lambert_w0(0.0) == 0.0
    assert specfun.lambert_w0(math.e) == pytest.approx(1.0, rel=1e-12)
    assert specfun.lambert_w0(-math.exp(-1.0)) == pytest.approx(-1.0, abs=1e-8)


def test_lambert_branches_meet_at_branch_point():
    assert specfun.lambert_w_m1(-math.exp(-1.0)) == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("z", [-0.3, -0.1, 0.5, 1.0, 10.0, 1e3, 1e8])
def test_lambert_w0_residual(z):
    w = specfun.lambert_w0(z)
    assert w * math.exp(w) == pytest.approx(z, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("z", [-0.35, -0.2, -0.05, -1e-3, -1e-8])
def test_lambert_w_m1_residual(z):
    w = specfun.lambert_w_m1(z)
    assert w <= -1.0
    assert w * math.exp(w) == pytest.approx(z, rel=1e-10)


def test_lambert_w_m1_domain():
    with pytest.raises(DomainError):
        specfun.lambert_w_m1(0.1)
    with pytest.raises(DomainError):
        specfun.lambert_w0(-1.0)


def test_polygamma_values():
    assert specfun.digamma(1.0) == pytest.approx(-EULER_GAMMA, rel=1e-12)
    assert specfun.trigamma(1.0) == pytest.approx(math.pi ** 2 / 6.0, rel=1e-12)
    assert specfun.polygamma(0, 3.0) == pytest.approx(-EULER_GAMMA + 1.5, rel=1e-12)


def test_incomplete_beta():
    assert specfun.regularized_incomplete_beta(0.5, 1.0, 1.0) == pytest.approx(0.5)
    # I_x(N, 1) = x^N
    assert specfun.regularized_incomplete_beta(0.9, 2.0, 1.0) == pytest.approx(0.81, rel=1e-12)
