import math

import numpy as np
import pytest
from scipy import stats

import immigration
from errors import DomainError
from model.immigration_model import Generic, Monomial, tii, yule
from montecarlo import chi_square_gof


def _counts(spec, horizon, replicates, seed):
    rng = np.random.default_rng(seed)
    return np.array([immigration.sample_tii_arrivals(spec, rng, immigration.stop_after_horizon(horizon)).size
                     for _ in range(replicates)])


def test_cumulative_intensity_monomial():
    spec = tii(2.0, Monomial(3.0, 1))
    assert immigration.cumulative_intensity(spec, 2.0) == pytest.approx(12.0)
    assert immigration.cumulative_intensity(spec, 0.0) == 0.0


def test_cumulative_intensity_generic():
    spec = tii(2.0, Generic(lambda s: math.exp(-s), [(0.0, math.inf, 1.0)]))
    assert immigration.cumulative_intensity(spec, 1.0) == pytest.approx(2.0 * (1.0 - math.exp(-1.0)), rel=1e-10)


@pytest.mark.parametrize("rate, diverges", [
    (lambda s: 1.0, True),
    (lambda s: 1.0 / (1.0 + s), True),
    (lambda s: math.exp(-s), False),
    (lambda s: 1.0 / (1.0 + s) ** 2, False),
])
def test_rate_diverges(rate, diverges):
    assert immigration.rate_diverges(Generic(rate, [(0.0, math.inf, 1.0)])) is diverges


def test_monomial_rates_diverge():
    assert immigration.rate_diverges(Monomial(0.5, 3))


def test_cumulative_intensity_needs_tii():
    with pytest.raises(DomainError):
        immigration.cumulative_intensity(yule(1.0), 1.0)


def test_sigma_k_survival_tii():
    spec = tii(3.0)
    assert immigration.sigma_k_survival_tii(spec, 1, 0.5) == pytest.approx(math.exp(-1.5))
    assert immigration.sigma_k_survival_tii(spec, 2, 0.5) == pytest.approx(2.5 * math.exp(-1.5))
    assert immigration.sigma_k_survival_tii(spec, 3, 0.0) == 1.0


def test_sigma_k_survival_yule():
    assert immigration.sigma_k_survival_yule(2.0, 1, 0.3) == 0.0
    assert immigration.sigma_k_survival_yule(2.0, 2, 0.3) == pytest.approx(math.exp(-0.6))
    assert immigration.sigma_k_survival_yule(2.0, 3, 0.0) == 1.0


def test_yule_population_pmf_sums_to_one():
    total = sum(immigration.yule_population_pmf(1.0, 1.5, n) for n in range(1, 400))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_sample_yule_population_mean():
    rng = np.random.default_rng(4)
    samples = immigration.sample_yule_population(1.0, 1.0, rng, size=20000)
    assert samples.min() >= 1
    sd = math.sqrt((1 - math.exp(-1.0)) / math.exp(-2.0))
    assert samples.mean() == pytest.approx(math.e, abs=4 * sd / math.sqrt(20000))


def test_monomial_arrivals_increase():
    rng = np.random.default_rng(0)
    sigma = immigration.sample_tii_arrivals(tii(5.0, Monomial(1.0, 2)), rng, immigration.stop_after_count(500))
    assert sigma.size == 500
    assert np.all(np.diff(sigma) > 0)
    assert sigma[0] > 0


def test_monomial_counts_are_poisson():
    spec = tii(1.5, Monomial(2.0, 1))
    mean = immigration.cumulative_intensity(spec, 2.0)
    counts = _counts(spec, 2.0, 3000, seed=21)
    _, p_value = chi_square_gof(counts, lambda n: stats.poisson.pmf(n, mean))
    assert p_value > 1e-3


def test_thinned_counts_are_poisson():
    u = Generic(lambda s: 1.0 + math.sin(s) ** 2, [(0.0, 1.0, 2.0), (1.0, math.inf, 2.0)])
    spec = tii(3.0, u)
    mean = immigration.cumulative_intensity(spec, 2.0)
    counts = _counts(spec, 2.0, 3000, seed=22)
    _, p_value = chi_square_gof(counts, lambda n: stats.poisson.pmf(n, mean))
    assert p_value > 1e-3


def test_thinned_arrivals_skip_zero_windows():
    u = Generic(lambda s: 0.0 if s < 1.0 else 1.0, [(0.0, 1.0, 0.0), (1.0, math.inf, 1.0)])
    sigma = immigration.sample_tii_arrivals(tii(4.0, u), np.random.default_rng(1), immigration.stop_after_count(50))
    assert sigma.size == 50
    assert sigma[0] >= 1.0


def test_envelope_violation_is_reported():
    u = Generic(lambda s: 2.0, [(0.0, math.inf, 1.0)])
    with pytest.raises(DomainError):
        next(immigration.iter_tii_arrivals(tii(1.0, u), np.random.default_rng(0)))


def test_stream_past_envelope_horizon_fails():
    u = Generic(lambda s: 1.0, [(0.0, 1.0, 1.0)])
    with pytest.raises(DomainError):
        immigration.sample_tii_arrivals(tii(1.0, u), np.random.default_rng(0), immigration.stop_after_count(10 ** 6))


def test_yule_first_arrival_at_zero():
    rng = np.random.default_rng(2)
    sigma = immigration.sample_yule_arrivals(yule(1.0), rng, immigration.stop_after_count(100))
    assert sigma[0] == 0.0
    assert np.all(np.diff(sigma) >= 0)


def test_yule_second_arrival_is_exponential():
    lam = 2.5
    rng = np.random.default_rng(6)
    second = np.array([immigration.sample_yule_arrivals(yule(lam), rng, immigration.stop_after_count(2))[1]
                       for _ in range(4000)])
    assert stats.kstest(second, stats.expon(scale=1.0 / lam).cdf).pvalue > 1e-3


def test_yule_population_from_arrivals_is_geometric():
    lam, horizon = 1.0, 1.2
    rng = np.random.default_rng(8)
    counts = np.array([immigration.sample_yule_arrivals(yule(lam), rng, immigration.stop_after_horizon(horizon)).size
                       for _ in range(3000)])
    _, p_value = chi_square_gof(counts, lambda n: stats.geom.pmf(n, math.exp(-lam * horizon)), start=1)
    assert p_value > 1e-3


def test_stop_at_cutoff_follows_caller():
    bound = [10.0]
    stop = immigration.stop_at_cutoff(lambda: bound[0])
    assert not stop(5.0, 1)
    bound[0] = 4.0
    assert stop(5.0, 2)


def test_yule_conditional_law():
    lam, horizon = 2.0, 1.5
    draws = immigration.sample_yule_conditional(lam, horizon, 4001, np.random.default_rng(10))
    assert draws.size == 4000
    assert np.all(np.diff(draws) >= 0)
    cdf = lambda a: np.expm1(lam * a) / math.expm1(lam * horizon)
    assert stats.kstest(draws, cdf).pvalue > 1e-3


def test_yule_conditional_large_rate_stays_finite():
    draws = immigration.sample_yule_conditional(1000.0, 1.0, 50, np.random.default_rng(3))
    assert np.all(np.isfinite(draws))
    assert np.all((draws >= 0) & (draws <= 1.0))


def test_yule_conditional_single_searcher():
    assert immigration.sample_yule_conditional(1.0, 1.0, 1, np.random.default_rng(0)).size == 0
