"""
Exact survival of the k-th passage time at finite immigration rate.

TII: the successful searchers form a Poisson process with mean lambda * I(t),
I(t) = int_0^t u(t - s) (1 - S(s)) ds, so P(T_k > t) is a Poisson cdf.
YI: the number of successes besides the initial searcher is geometric with
parameter p(t) = 1 / (1 + lambda e^{lambda t} int_0^t (1 - S(s)) e^{-lambda s} ds).
Large N: N independent searchers already present at time 0.

Integrals go through `log_convolution`, which integrates in log space around
the peak of the integrand so that e^{lambda t} prefactors and e^{-C/t} tails
never overflow or vanish in linear scale.
"""
import logging
import math
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from errors import QuadratureError, require
from model.immigration_model import ImmigrationSpec, Monomial, RateFunction
from model.precision_model import QuadratureSpec, DEFAULT_QUADRATURE
from model.survival_model import SurvivalModel
from searchers import survival, log_failure
from specfun import upper_gamma_regularized, regularized_incomplete_beta

logger = logging.getLogger(__name__)

LogFunction = Callable[[float], float]

_PEAK_GRID = 96
_TAIL_MASS = 1e-13
_MAX_SEGMENTS = 200


# Quadrature plumbing

def _quad(f, a: float, b: float, quad: QuadratureSpec, points=None) -> float:
    result = integrate.quad(f, a, b, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                            limit=quad.max_subdivisions, points=points, full_output=1)
    value, abserr = result[0], result[1]
    if len(result) > 3:
        # quad only appends a message when it flagged the result
        if not math.isfinite(value) or abserr > 10 * max(quad.abs_tol, quad.rel_tol * abs(value)):
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {result[3]}")
        logger.debug("quadrature on [%s, %s] flagged but within tolerance: %s", a, b, result[3])
    return value


def _log_rate(u: RateFunction, x: float) -> float:
    if isinstance(u, Monomial):
        if u.n == 0:
            return math.log(u.alpha)
        return math.log(u.alpha) + u.n * math.log(x) if x > 0 else -math.inf
    value = u.rate(x)
    return math.log(value) if value > 0 else -math.inf


def log_integral(h: LogFunction, a: float, b: float, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """ln int_a^b e^{h(s)} ds, -inf when the integrand vanishes."""
    if b <= a:
        return -math.inf
    grid = np.unique(np.concatenate([
        np.linspace(a, b, _PEAK_GRID),
        a + (b - a) * np.geomspace(1e-8, 1.0, _PEAK_GRID),
    ]))
    values = np.array([h(float(s)) for s in grid])
    finite = np.isfinite(values)
    if not np.any(finite):
        return -math.inf
    peak_index = int(np.argmax(np.where(finite, values, -np.inf)))
    shift = float(values[peak_index])
    peak = float(grid[peak_index])

    def shifted(s):
        value = h(s)
        return math.exp(value - shift) if value > -math.inf else 0.0

    points = [peak] if a < peak < b else None
    area = _quad(shifted, a, b, quad, points)
    if area <= 0:
        return -math.inf
    return shift + math.log(area)


def log_convolution(u: RateFunction, log_fail: LogFunction, t: float,
                    quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """ln int_0^t u(t - s) F(s) ds for F given by its logarithm."""
    require(t >= 0, "convolution needs t >= 0")

    def h(s):
        if s <= 0:
            return -math.inf
        return _log_rate(u, t - s) + log_fail(s)

    return log_integral(h, 0.0, t, quad)


# TII

def big_I(u: RateFunction, S: SurvivalModel, t: float, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    if t == 0:
        return 0.0
    return math.exp(log_convolution(u, lambda s: log_failure(S, s), t, quad))


def survival_tii_k(lam: float, u: RateFunction, S: SurvivalModel, k: int, t: float,
                   quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    require(lam > 0, "lambda must be positive")
    require(k >= 1, "k must be a positive integer")
    require(t >= 0, "survival needs t >= 0")
    if t == 0:
        return 1.0
    log_I = log_convolution(u, lambda s: log_failure(S, s), t, quad.scaled(lam))
    if log_I == -math.inf:
        return 1.0
    return upper_gamma_regularized(k, math.exp(math.log(lam) + log_I))


def coupled_first_survival(u: RateFunction, S: SurvivalModel, t: float,
                           quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """e^{-I(t)}: law of the first completion of one unit-rate TII stream."""
    return math.exp(-big_I(u, S, t, quad))


# YI

def log_yi_weight(lam: float, S: SurvivalModel, t: float, quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """ln(lambda e^{lambda t} int_0^t (1 - S(s)) e^{-lambda s} ds)."""
    log_J = log_integral(lambda s: log_failure(S, s) - lam * s if s > 0 else -math.inf, 0.0, t, quad)
    return math.log(lam) + lam * t + log_J


def yi_success_probability(lam: float, S: SurvivalModel, t: float,
                           quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    require(lam > 0, "lambda must be positive")
    require(t >= 0, "success probability needs t >= 0")
    if t == 0:
        return 1.0
    weight = log_yi_weight(lam, S, t, quad)
    if weight == -math.inf:
        return 1.0
    return float(special.expit(-weight))


def _one_minus_power(log_q: float, n: int) -> float:
    # 1 - q^n from ln q
    if n == 0:
        return 0.0
    return -math.expm1(n * log_q)


def survival_yi_k(lam: float, S: SurvivalModel, k: int, t: float,
                  quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    require(k >= 1, "k must be a positive integer")
    p = yi_success_probability(lam, S, t, quad)
    s_t = survival(S, t)
    log_q = math.log1p(-p) if p < 1 else -math.inf
    return s_t * _one_minus_power(log_q, k) + (1.0 - s_t) * _one_minus_power(log_q, k - 1)


def survival_k(spec: ImmigrationSpec, S: SurvivalModel, k: int, t: float,
               quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """P(T_k > t) under either immigration scheme."""
    if spec.is_tii:
        return survival_tii_k(spec.lam, spec.u, S, k, t, quad)
    return survival_yi_k(spec.lam, S, k, t, quad)


# Geometric compositions

def geometric_compose(p1: float, p2: float) -> float:
    """Binomial(Geometric(p1), p2) is Geometric with this parameter (support from 0)."""
    require(0 < p1 <= 1, f"geometric_compose needs 0 < p1 <= 1, got {p1}")
    require(0 <= p2 <= 1, f"geometric_compose needs 0 <= p2 <= 1, got {p2}")
    return p1 / (p1 + p2 * (1.0 - p1))


def geometric_pmf(p: float, n):
    """P(X = n) = p (1 - p)^n on n = 0, 1, ..."""
    return stats.geom.pmf(np.asarray(n) + 1, p)


def binomial_of_geometric_pmf(p1: float, p2: float) -> np.ndarray:
    """pmf of Binomial(X, p2) with X ~ Geometric(p1), composed term by term.

    X is truncated once its tail mass falls below 1e-13.
    """
    require(0 < p1 <= 1 and 0 <= p2 <= 1, "binomial_of_geometric_pmf needs 0 < p1 <= 1, 0 <= p2 <= 1")
    if p1 == 1:
        x_max = 0
    else:
        x_max = int(math.ceil(math.log(_TAIL_MASS) / math.log1p(-p1)))
    trials = np.arange(x_max + 1)
    weights = geometric_pmf(p1, trials)
    successes = np.arange(x_max + 1)
    table = stats.binom.pmf(successes[:, None], trials[None, :], p2)
    return table @ weights


def total_variation(pmf_a, pmf_b) -> float:
    """TV distance of two pmfs on 0, 1, ...; the mass missing from either array counts as one extra atom."""
    a = np.asarray(pmf_a, dtype=float)
    b = np.asarray(pmf_b, dtype=float)
    n = max(a.size, b.size)
    a = np.pad(a, (0, n - a.size))
    b = np.pad(b, (0, n - b.size))
    return 0.5 * (float(np.abs(a - b).sum()) + abs(float(b.sum() - a.sum())))


# Large N

def survival_largeN(S: SurvivalModel, N: int, t: float) -> float:
    require(N >= 1, "N must be a positive integer")
    s_t = survival(S, t)
    if s_t <= 0:
        return 0.0
    return math.exp(N * math.log(s_t))


def survival_largeN_k(S: SurvivalModel, N: int, k: int, t: float) -> float:
    """P(Binomial(N, 1 - S(t)) <= k - 1)."""
    require(N >= 1, "N must be a positive integer")
    require(1 <= k <= N, f"k must lie in [1, N], got k={k}, N={N}")
    return regularized_incomplete_beta(survival(S, t), N - k + 1, k)


# Moments

def expected_passage_time(surv: Callable[[float], float], scale: float, moment: int = 1,
                          quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """E[T^m] = m int_0^inf t^{m-1} P(T > t) dt.

    Integrated over doubling segments [0, scale], [scale, 2 scale], ... until a
    segment no longer contributes.
    """
    require(scale > 0, "time scale must be positive")
    require(moment >= 1, "moment order must be positive")
    integrand = lambda s: moment * s ** (moment - 1) * surv(s)
    segment_quad = QuadratureSpec(quad.abs_tol * scale ** moment, quad.rel_tol, quad.max_subdivisions)
    total = _quad(integrand, 0.0, scale, segment_quad)
    lo, hi = scale, 2 * scale
    for _ in range(_MAX_SEGMENTS):
        piece = _quad(integrand, lo, hi, segment_quad)
        total += piece
        if piece <= quad.rel_tol * abs(total) and surv(hi) <= quad.abs_tol:
            return total
        lo, hi = hi, 2 * hi
    raise QuadratureError(f"moment integral did not settle before t = {lo}")


def exact_mean(spec: ImmigrationSpec, S: SurvivalModel, k: int, scale: float,
               quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    return expected_passage_time(lambda t: survival_k(spec, S, k, t, quad), scale, 1, quad)
