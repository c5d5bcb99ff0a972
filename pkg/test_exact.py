import math

import numpy as np
import pytest
from scipy import integrate, special, stats

import asymptotics
import exact
import searchers
from constants import LARGE_N
from errors import DomainError
from model.immigration_model import Monomial, tii, yule


@pytest.fixture
def diffusion():
    return searchers.diffusion_1d(1.0, 1.0)


@pytest.fixture
def instant():
    # searcher that hits the target (almost) immediately
    return searchers.tabulated([(0.0, 1.0), (1e-15, 0.0), (1e6, 0.0)], interpolation='linear', label='instant')


def _failure_integral(weight, t):
    value, _ = integrate.quad(lambda s: weight(s) * special.erfc(math.sqrt(0.25 / s)), 0.0, t,
                              epsabs=1e-13, epsrel=1e-11, limit=200)
    return value


def test_big_I_constant_rate(diffusion):
    assert exact.big_I(Monomial(), diffusion, 1.0) == pytest.approx(_failure_integral(lambda s: 1.0, 1.0), rel=1e-7)


def test_big_I_linear_rate(diffusion):
    t = 2.0
    expected = _failure_integral(lambda s: 3.0 * (t - s), t)
    assert exact.big_I(Monomial(3.0, 1), diffusion, t) == pytest.approx(expected, rel=1e-7)


def test_big_I_at_zero(diffusion):
    assert exact.big_I(Monomial(), diffusion, 0.0) == 0.0


def test_log_integral_handles_huge_exponents():
    # ln int_0^1 e^{1000 s} ds = 1000 - ln 1000 + ln(1 - e^{-1000})
    value = exact.log_integral(lambda s: 1000.0 * s, 0.0, 1.0)
    assert value == pytest.approx(1000.0 - math.log(1000.0), rel=1e-10)


def test_log_integral_of_vanishing_integrand():
    assert exact.log_integral(lambda s: -math.inf, 0.0, 1.0) == -math.inf
    assert exact.log_integral(lambda s: 0.0, 1.0, 1.0) == -math.inf


def test_tii_survival_is_poisson_cdf(diffusion):
    lam, t = 4.0, 0.8
    mean = lam * exact.big_I(Monomial(), diffusion, t)
    assert exact.survival_tii_k(lam, Monomial(), diffusion, 1, t) == pytest.approx(math.exp(-mean), rel=1e-7)
    assert exact.survival_tii_k(lam, Monomial(), diffusion, 3, t) == pytest.approx(stats.poisson.cdf(2, mean),
                                                                                   rel=1e-7)


def test_tii_survival_at_zero(diffusion):
    assert exact.survival_tii_k(2.0, Monomial(), diffusion, 1, 0.0) == 1.0


def test_tii_survival_decreases_in_t_and_increases_in_k(diffusion):
    spec = tii(10.0)
    grid = np.linspace(0.05, 2.0, 12)
    for k in (1, 2, 4):
        values = [exact.survival_k(spec, diffusion, k, t) for t in grid]
        assert np.all(np.diff(values) <= 1e-12)
        assert all(0.0 <= v <= 1.0 for v in values)
    t = 0.3
    by_k = [exact.survival_k(spec, diffusion, k, t) for k in (1, 2, 3)]
    assert by_k[0] <= by_k[1] <= by_k[2]


def test_tii_survival_at_huge_rate_stays_in_range(diffusion):
    value = exact.survival_tii_k(1e8, Monomial(), diffusion, 1, 0.02)
    assert 0.0 <= value <= 1.0
    assert math.isfinite(value)


def test_coupled_first_survival_is_unit_rate_tii(diffusion):
    t = 1.3
    assert exact.coupled_first_survival(Monomial(), diffusion, t) == pytest.approx(
        exact.survival_tii_k(1.0, Monomial(), diffusion, 1, t), rel=1e-9)


def test_instant_searcher_tii_mean_is_mean_arrival(instant):
    lam = 2.0
    assert exact.exact_mean(tii(lam), instant, 1, scale=1.0 / lam) == pytest.approx(1.0 / lam, rel=1e-6)


def test_yi_success_probability_matches_direct_quadrature(diffusion):
    lam, t = 3.0, 0.9
    J, _ = integrate.quad(lambda s: special.erfc(math.sqrt(0.25 / s)) * math.exp(-lam * s), 0.0, t,
                          epsabs=1e-13, epsrel=1e-11)
    expected = 1.0 / (1.0 + lam * math.exp(lam * t) * J)
    assert exact.yi_success_probability(lam, diffusion, t) == pytest.approx(expected, rel=1e-7)


def test_yi_first_passage_is_initial_searcher_times_success(diffusion):
    lam, t = 3.0, 0.9
    expected = searchers.survival(diffusion, t) * exact.yi_success_probability(lam, diffusion, t)
    assert exact.survival_yi_k(lam, diffusion, 1, t) == pytest.approx(expected, rel=1e-12)


def test_yi_instant_searcher(instant):
    lam, t = 1.5, 0.7
    # T_1 = 0; T_2 is the second arrival, Exp(lambda)
    assert exact.survival_yi_k(lam, instant, 1, t) == 0.0
    assert exact.survival_yi_k(lam, instant, 2, t) == pytest.approx(math.exp(-lam * t), rel=1e-6)


def test_yi_weight_in_log_space(instant):
    assert exact.log_yi_weight(200.0, instant, 5.0) == pytest.approx(1000.0, rel=1e-8)
    assert exact.yi_success_probability(200.0, instant, 5.0) == pytest.approx(0.0, abs=1e-300)


def test_yi_survival_monotone(diffusion):
    spec = yule(20.0)
    values = [exact.survival_k(spec, diffusion, 2, t) for t in np.linspace(0.01, 1.0, 15)]
    assert np.all(np.diff(values) <= 1e-12)


def test_geometric_compose_matches_composed_pmf():
    p1, p2 = 0.3, 0.45
    composed = exact.binomial_of_geometric_pmf(p1, p2)
    direct = exact.geometric_pmf(exact.geometric_compose(p1, p2), np.arange(composed.size))
    assert exact.total_variation(composed, direct) < 1e-10


def test_geometric_compose_limits():
    assert exact.geometric_compose(0.4, 1.0) == pytest.approx(0.4)
    assert exact.geometric_compose(0.4, 0.0) == 1.0
    with pytest.raises(DomainError):
        exact.geometric_compose(0.0, 0.5)


def test_geometric_pmf_support_starts_at_zero():
    assert exact.geometric_pmf(0.25, 0) == pytest.approx(0.25)
    assert exact.geometric_pmf(0.25, 2) == pytest.approx(0.25 * 0.75 ** 2)


def test_total_variation():
    assert exact.total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert exact.total_variation([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert exact.total_variation([0.5], [0.5, 0.5]) == pytest.approx(0.5)


def test_large_n_survival(diffusion):
    t = 0.4
    s = searchers.survival(diffusion, t)
    assert exact.survival_largeN(diffusion, 7, t) == pytest.approx(s ** 7, rel=1e-12)
    assert exact.survival_largeN_k(diffusion, 7, 1, t) == pytest.approx(s ** 7, rel=1e-10)
    assert exact.survival_largeN_k(diffusion, 7, 7, t) == pytest.approx(1.0 - (1.0 - s) ** 7, rel=1e-10)
    assert exact.survival_largeN_k(diffusion, 7, 3, t) == pytest.approx(stats.binom.cdf(2, 7, 1.0 - s), rel=1e-10)


def test_large_n_k_out_of_range(diffusion):
    with pytest.raises(DomainError):
        exact.survival_largeN_k(diffusion, 3, 4, 1.0)


def test_expected_passage_time_of_exponential():
    surv = lambda t: math.exp(-t)
    assert exact.expected_passage_time(surv, 1.0) == pytest.approx(1.0, rel=1e-8)
    assert exact.expected_passage_time(surv, 1.0, moment=2) == pytest.approx(2.0, rel=1e-8)
    assert exact.expected_passage_time(surv, 0.01) == pytest.approx(1.0, rel=1e-8)


def test_large_n_k_survival_approaches_gamma_gumbel(diffusion):
    tail = searchers.tail_params(diffusion)
    law = asymptotics.limit_law_for(LARGE_N, tail, 2)
    x_grid = np.linspace(-2.0, 3.0, 21)
    distances = []
    for N in (100, 1000, 10000):
        pair = asymptotics.scaling_largeN(tail, N)
        gaps = [abs(exact.survival_largeN_k(diffusion, N, 2, pair.to_time(x))
                    - float(asymptotics.limit_survival(law, x)))
                for x in x_grid if pair.to_time(x) > 0]
        distances.append(max(gaps))
    assert np.all(np.diff(distances) < 0)
