"""
Immigration-time processes {sigma_n}.

TII: inhomogeneous Poisson arrivals with intensity lambda * u(t). Monomial
rates are sampled exactly by time transformation, generic rates by thinning
against a piecewise-constant envelope.
Yule: sigma_1 = 0 and the gap before the j-th arrival is Exp((j - 1) lambda).
"""
import math
from typing import Callable, Iterator

import numpy as np
from scipy import integrate

from errors import DomainError, QuadratureError, require
from model.immigration_model import ImmigrationSpec, Monomial, Generic, RateFunction
from specfun import upper_gamma_regularized

StopPredicate = Callable[[float, int], bool]

FIRST_CHUNK = 16
MAX_CHUNK = 4096
ENVELOPE_PROBES = 64
DIVERGENCE_DOUBLINGS = 60
DIVERGENCE_FLOOR = 1e-6


# Stop predicates: called with (arrival time, 1-based arrival index); the
# arrival that makes the predicate true is not returned.

def stop_after_count(n: int) -> StopPredicate:
    return lambda sigma, count: count > n


def stop_after_horizon(horizon: float) -> StopPredicate:
    return lambda sigma, count: sigma > horizon


def stop_at_cutoff(cutoff: Callable[[], float]) -> StopPredicate:
    """Stop once an arrival passes a cutoff that the caller may lower over time."""
    return lambda sigma, count: sigma > cutoff()


# Exact laws

def cumulative_intensity(spec: ImmigrationSpec, t: float) -> float:
    """Lambda(t) = int_0^t lambda u(s) ds."""
    require(spec.is_tii, "cumulative intensity is defined for time-inhomogeneous immigration")
    require(t >= 0, "cumulative intensity needs t >= 0")
    u = spec.u
    if isinstance(u, Monomial):
        return spec.lam * u.alpha * t ** (u.n + 1) / (u.n + 1)
    if t == 0:
        return 0.0
    return spec.lam * rate_mass_on(u, 0.0, t)


def rate_mass_on(u: Generic, a: float, b: float) -> float:
    """int_a^b u(s) ds."""
    value, _ = integrate.quad(u.rate, a, b, limit=200)
    if not math.isfinite(value):
        raise QuadratureError(f"rate integral diverged on [{a}, {b}]")
    return value


def rate_diverges(u: RateFunction) -> bool:
    """Whether int_0^inf u = inf, judged by the mass on [2^59, 2^60].

    Rates like 1/s or 1/(s ln s) keep far more than DIVERGENCE_FLOOR there;
    exponential decay and powers s^-q with q above about 4/3 leave less.
    """
    if isinstance(u, Monomial):
        return True
    a = 2.0 ** (DIVERGENCE_DOUBLINGS - 1)
    return rate_mass_on(u, a, 2.0 * a) >= DIVERGENCE_FLOOR


def sigma_k_survival_tii(spec: ImmigrationSpec, k: int, t: float) -> float:
    """P(sigma_k > t): fewer than k arrivals in [0, t)."""
    require(k >= 1, "k must be a positive integer")
    mean = cumulative_intensity(spec, t)
    if mean == 0:
        return 1.0
    return upper_gamma_regularized(k, mean)


def sigma_k_survival_yule(lam: float, k: int, t: float) -> float:
    """P(sigma_k > t) = P(N(t) <= k - 1) = 1 - (1 - e^{-lam t})^{k - 1}.

    The k - 1 exponent follows from sigma_1 = 0; sigma_1 > t never happens.
    """
    require(lam > 0 and k >= 1 and t >= 0, "sigma_k_survival_yule needs lam > 0, k >= 1, t >= 0")
    return 1.0 - (-math.expm1(-lam * t)) ** (k - 1) if k > 1 else 0.0


def yule_population_pmf(lam: float, t: float, n: int) -> float:
    """P(N(t) = n) for a Yule process started from one searcher."""
    require(t >= 0 and n >= 1, "yule_population_pmf needs t >= 0 and n >= 1")
    return math.exp(-lam * t) * (-math.expm1(-lam * t)) ** (n - 1)


def sample_yule_population(lam: float, t: float, rng: np.random.Generator, size=None):
    return rng.geometric(math.exp(-lam * t), size=size)


# Arrival streams

def _chunk_sizes() -> Iterator[int]:
    size = FIRST_CHUNK
    while True:
        yield size
        size = min(2 * size, MAX_CHUNK)


def iter_tii_arrivals(spec: ImmigrationSpec, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Increasing arrival times of the TII process, yielded in chunks."""
    require(spec.is_tii, "iter_tii_arrivals needs a time-inhomogeneous scheme")
    if isinstance(spec.u, Monomial):
        yield from _monomial_arrivals(spec, rng)
    else:
        yield from _thinned_arrivals(spec, rng)


def _monomial_arrivals(spec: ImmigrationSpec, rng: np.random.Generator) -> Iterator[np.ndarray]:
    # arrival i sits at Lambda^{-1}(Gamma_i) for unit-rate Poisson points Gamma_i
    u = spec.u
    degree = u.n + 1
    scale = degree / (spec.lam * u.alpha)
    last = 0.0
    for size in _chunk_sizes():
        points = last + np.cumsum(rng.exponential(1.0, size))
        last = float(points[-1])
        yield (scale * points) ** (1.0 / degree)


def _check_envelope(u: Generic, window) -> None:
    start, end, bound = window
    probe_end = end if math.isfinite(end) else start + max(1.0, abs(start))
    probes = np.linspace(start, probe_end, ENVELOPE_PROBES, endpoint=False)
    values = np.array([u.rate(s) for s in probes])
    if np.any(values < 0):
        raise DomainError(f"rate function is negative on [{start}, {end})")
    if np.any(values > bound):
        raise DomainError(f"rate function exceeds its envelope bound {bound} on [{start}, {end})")


def _thinned_arrivals(spec: ImmigrationSpec, rng: np.random.Generator) -> Iterator[np.ndarray]:
    u = spec.u
    for window in u.envelope:
        _check_envelope(u, window)
        start, end, bound = window
        if bound == 0:
            continue
        clock = start
        sizes = _chunk_sizes()
        while clock < end:
            size = next(sizes)
            candidates = clock + np.cumsum(rng.exponential(1.0 / (spec.lam * bound), size))
            keep = rng.random(size) * bound < np.array([u.rate(s) for s in candidates])
            inside = candidates < end
            clock = float(candidates[-1])
            accepted = candidates[keep & inside]
            if accepted.size:
                yield accepted
    raise DomainError(f"rate function has no envelope bound beyond t = {u.horizon}")


def iter_yule_arrivals(spec: ImmigrationSpec, rng: np.random.Generator) -> Iterator[np.ndarray]:
    require(not spec.is_tii, "iter_yule_arrivals needs the Yule scheme")
    yield np.zeros(1)
    last = 0.0
    population = 1
    for size in _chunk_sizes():
        rates = spec.lam * np.arange(population, population + size)
        arrivals = last + np.cumsum(rng.exponential(1.0, size) / rates)
        population += size
        last = float(arrivals[-1])
        yield arrivals


def iter_arrivals(spec: ImmigrationSpec, rng: np.random.Generator) -> Iterator[np.ndarray]:
    return iter_tii_arrivals(spec, rng) if spec.is_tii else iter_yule_arrivals(spec, rng)


def _collect(chunks: Iterator[np.ndarray], stop: StopPredicate) -> np.ndarray:
    out = []
    count = 0
    for chunk in chunks:
        for sigma in chunk:
            count += 1
            if stop(float(sigma), count):
                return np.array(out)
            out.append(float(sigma))
    return np.array(out)


def sample_tii_arrivals(spec: ImmigrationSpec, rng: np.random.Generator, stop: StopPredicate) -> np.ndarray:
    return _collect(iter_tii_arrivals(spec, rng), stop)


def sample_yule_arrivals(spec: ImmigrationSpec, rng: np.random.Generator, stop: StopPredicate) -> np.ndarray:
    return _collect(iter_yule_arrivals(spec, rng), stop)


def sample_yule_conditional(lam: float, t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """The n - 1 post-time-0 arrivals given N(t) = n.

    iid with cdf (e^{lam a} - 1) / (e^{lam t} - 1) on [0, t], sorted.
    """
    require(n >= 1, "population must be at least 1")
    require(t > 0, "horizon must be positive")
    U = rng.random(n - 1)
    # inverse cdf written to stay finite when lam t is large
    draws = t + np.log(U + (1.0 - U) * math.exp(-lam * t)) / lam
    return np.sort(np.clip(draws, 0.0, t))
