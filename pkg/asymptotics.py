"""
Large-lambda (and large-N) behaviour of the k-th passage time.

T_k is approximately a_lambda X + b_lambda where X follows one of three limit
laws:

  GammaPower(k, p0)    P(X > x) = Q(k, x^p0) on x >= 0    TII / large N, power tails
  GammaGumbel(k)       P(X > x) = Q(k, e^x)               TII / large N, exponential tails
  YuleLogisticPower(k) P(X > x) = 1 - expit(x)^k          YI, any tail

Moments of the laws come from their moment generating functions
Gamma(k + t) / Gamma(k) and Gamma(k + t) Gamma(1 - t) / Gamma(k).
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import special

from constants import TII, YULE, LARGE_N, STANDARD, LAMBERTW
from errors import DomainError, require
from exact import log_convolution
from model.immigration_model import Monomial, RateFunction
from model.precision_model import QuadratureSpec, DEFAULT_QUADRATURE
from model.scaling_model import (
    ScalingPair, LimitLaw, GAMMA_POWER, GAMMA_GUMBEL, YULE_LOGISTIC_POWER,
    TII_POWER, TII_EXP_STANDARD, TII_EXP_LAMBERTW, YI_POWER, YI_EXP, LARGE_N_POWER, LARGE_N_EXP,
)
from model.tail_model import TailAsymptotics, EffectiveTail
from specfun import lambert_w0, lambert_w_m1, polygamma, INV_E

logger = logging.getLogger(__name__)

FD_STEP = 1e-4
_OVERFLOW_LOG = 700.0


# Effective tails and scaling pairs

def effective_tail_tii(u: RateFunction, tail: TailAsymptotics) -> EffectiveTail:
    """Short-time form of I(t) for u(t) = alpha t^n."""
    if not isinstance(u, Monomial):
        raise DomainError("closed-form effective tails need a monomial immigration rate")
    n, alpha = u.n, u.alpha
    if tail.is_power:
        log_beta = special.gammaln(n + 1) + special.gammaln(tail.p + 1) - special.gammaln(n + tail.p + 2)
        return EffectiveTail(tail.tail_class, math.exp(log_beta) * tail.A * alpha, n + tail.p + 1)
    A0 = tail.A * alpha * math.factorial(n) / tail.C ** (n + 1)
    return EffectiveTail(tail.tail_class, A0, tail.p + 2 * n + 2, tail.C)


def _log_scaled_pair(A: float, p: float, C: float, log_rate: float) -> Tuple[float, float]:
    # shared by TII (rate lambda, effective tail) and large N (rate N, searcher tail).
    # C / b solves y = ln(rate A C^p) - p ln y; expanding around ell = ln(C rate)
    # leaves ln(A C^(p - 1)) in the last term.
    ell = math.log(C) + log_rate
    require(ell > 0, f"scaling needs ln(C * rate) > 0, got {ell}")
    a = C / ell ** 2
    b = C / ell + C * p * math.log(ell) / ell ** 2 - C * (math.log(A) + (p - 1.0) * math.log(C)) / ell ** 2
    return a, b


def _lambert_w0_from_log(log_z: float) -> float:
    if log_z < _OVERFLOW_LOG:
        return lambert_w0(math.exp(log_z))
    # w + ln w = ln z
    w = log_z - math.log(log_z)
    for _ in range(50):
        step = (w + math.log(w) - log_z) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) < 1e-15 * w:
            break
    return w


def scaling_tii(eff: EffectiveTail, lam: float, variant: str = STANDARD) -> ScalingPair:
    require(lam > 0, "lambda must be positive")
    if eff.is_power:
        require(eff.p0 > 0, "power scaling needs p0 > 0")
        return ScalingPair((eff.A0 * lam) ** (-1.0 / eff.p0), 0.0, TII_POWER)
    if variant == STANDARD:
        a, b = _log_scaled_pair(eff.A0, eff.p0, eff.C0, math.log(lam))
        return ScalingPair(a, b, TII_EXP_STANDARD)
    require(variant == LAMBERTW, f"unknown scaling variant {variant!r}")
    p0, C0 = eff.p0, eff.C0
    require(p0 != 0, "the Lambert W scaling needs p0 != 0")
    log_abs_z = math.log(C0 / abs(p0)) + math.log(eff.A0 * lam) / p0
    if p0 > 0:
        W = _lambert_w0_from_log(log_abs_z)
    else:
        z = -math.exp(log_abs_z)
        require(z > -INV_E, f"Lambert W argument {z} is below the branch point -1/e")
        W = lambert_w_m1(z)
    logger.debug("Lambert W scaling at lambda = %s: W = %s (p0 = %s)", lam, W, p0)
    return ScalingPair(C0 / (p0 ** 2 * W * (1.0 + W)), C0 / (p0 * W), TII_EXP_LAMBERTW)


def scaling_yi(tail: TailAsymptotics, lam: float) -> ScalingPair:
    require(lam > 0, "lambda must be positive")
    if tail.is_power:
        b = (tail.p * math.log(lam) - math.log(tail.A) - special.gammaln(tail.p + 1)) / lam
        source = YI_POWER
    else:
        C, p = tail.C, tail.p
        b = (2.0 * math.sqrt(C * lam) + (2.0 * p - 1.0) / 4.0 * math.log(C * lam)
             - math.log(tail.A) - p * math.log(C) - 0.5 * math.log(math.pi)) / lam
        source = YI_EXP
    require(b > 0, f"lambda = {lam} is too small for the YI scaling (b = {b})")
    return ScalingPair(1.0 / lam, float(b), source)


def scaling_largeN(tail: TailAsymptotics, N: int) -> ScalingPair:
    require(N >= 2, "large-N scaling needs N >= 2")
    if tail.is_power:
        require(tail.p > 0, "large-N power scaling needs p > 0")
        return ScalingPair((tail.A * N) ** (-1.0 / tail.p), 0.0, LARGE_N_POWER)
    a, b = _log_scaled_pair(tail.A, tail.p, tail.C, math.log(N))
    return ScalingPair(a, b, LARGE_N_EXP)


def scaling_for(scheme: str, tail: TailAsymptotics, lam: float, variant: str = STANDARD) -> ScalingPair:
    """For TII `tail` is the effective tail of I(t); for large N `lam` is N."""
    if scheme == TII:
        return scaling_tii(_as_effective(tail), lam, variant)
    if scheme == YULE:
        return scaling_yi(tail, lam)
    require(scheme == LARGE_N, f"unknown scheme {scheme!r}")
    return scaling_largeN(tail, int(lam))


def _as_effective(tail: TailAsymptotics) -> EffectiveTail:
    if isinstance(tail, EffectiveTail):
        return tail
    return EffectiveTail(tail.tail_class, tail.A, tail.p, tail.C)


def limit_law_for(scheme: str, tail: TailAsymptotics, k: int) -> LimitLaw:
    if scheme == YULE:
        return LimitLaw(YULE_LOGISTIC_POWER, k)
    require(scheme in (TII, LARGE_N), f"unknown scheme {scheme!r}")
    if tail.is_power:
        return LimitLaw(GAMMA_POWER, k, tail.p)
    return LimitLaw(GAMMA_GUMBEL, k)


# Limit laws

def limit_survival(law: LimitLaw, x):
    x = np.asarray(x, dtype=float)
    k = law.k
    if law.kind == GAMMA_POWER:
        if np.any(x < 0):
            raise DomainError("GammaPower is supported on x >= 0")
        values = special.gammaincc(k, x ** law.p0)
    elif law.kind == GAMMA_GUMBEL:
        with np.errstate(over='ignore'):
            values = special.gammaincc(k, np.exp(x))
    else:
        values = -np.expm1(k * special.log_expit(x))
    return float(values) if values.ndim == 0 else values


def limit_density(law: LimitLaw, x):
    x = np.asarray(x, dtype=float)
    k = law.k
    if law.kind == GAMMA_POWER:
        if np.any(x < 0):
            raise DomainError("GammaPower is supported on x >= 0")
        p0 = law.p0
        power = p0 * k - 1.0
        with np.errstate(divide='ignore', invalid='ignore'):
            log_x = np.log(x)
            values = np.exp(math.log(p0) + power * log_x - x ** p0 - special.gammaln(k))
        at_zero = np.inf if power < 0 else (p0 / math.gamma(k) if power == 0 else 0.0)
        values = np.where(x == 0, at_zero, values)
    elif law.kind == GAMMA_GUMBEL:
        with np.errstate(over='ignore'):
            values = np.exp(k * x - np.exp(x) - special.gammaln(k))
    else:
        values = k * np.exp(k * special.log_expit(x) + special.log_expit(-x))
    return float(values) if values.ndim == 0 else values


def _cumulants(law: LimitLaw, m: int):
    k = law.k
    kappas = [polygamma(j - 1, k) for j in range(1, m + 1)]
    if law.kind == YULE_LOGISTIC_POWER:
        kappas = [kappa + (-1) ** j * polygamma(j - 1, 1.0) for j, kappa in enumerate(kappas, start=1)]
    return kappas


def _moments_from_cumulants(kappas) -> float:
    moments = [1.0]
    for m in range(1, len(kappas) + 1):
        moments.append(sum(math.comb(m - 1, i - 1) * kappas[i - 1] * moments[m - i] for i in range(1, m + 1)))
    return moments[-1]


def _log_mgf(law: LimitLaw, t: float) -> float:
    value = special.gammaln(law.k + t) - special.gammaln(law.k)
    if law.kind == YULE_LOGISTIC_POWER:
        value += special.gammaln(1.0 - t)
    return float(value)


def _central_derivative(f, m: int, h: float) -> float:
    # m-th central difference at 0, error O(h^2)
    total = sum((-1) ** j * math.comb(m, j) * f((m / 2.0 - j) * h) for j in range(m + 1))
    return total / h ** m


def limit_moment(law: LimitLaw, m: int, method: str = 'closed') -> float:
    """E[X^m] of a limit law.

    'closed' builds raw moments from the polygamma cumulants; 'finite_difference'
    differentiates the moment generating function numerically with one
    Richardson step. GammaPower moments are always Gamma(k + m/p0) / Gamma(k).
    """
    require(m >= 1, "moment order must be positive")
    if law.kind == GAMMA_POWER:
        shifted = law.k + m / law.p0
        require(shifted > 0, "GammaPower moment is outside the Gamma function's domain")
        return math.exp(special.gammaln(shifted) - special.gammaln(law.k))
    if method == 'closed':
        return _moments_from_cumulants(_cumulants(law, m))
    require(method == 'finite_difference', f"unknown moment method {method!r}")
    # larger m amplifies roundoff as eps / h^m
    h = FD_STEP if m <= 2 else max(FD_STEP, np.finfo(float).eps ** (1.0 / (m + 4)))
    mgf = lambda t: math.exp(_log_mgf(law, t))
    coarse = _central_derivative(mgf, m, h)
    fine = _central_derivative(mgf, m, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


# Expansions

def mean_expansion(scheme: str, tail: TailAsymptotics, lam: float, k: int, variant: str = STANDARD) -> float:
    pair = scaling_for(scheme, tail, lam, variant)
    law = limit_law_for(scheme, tail, k)
    return limit_moment(law, 1) * pair.a + pair.b


def var_expansion(scheme: str, tail: TailAsymptotics, lam: float, k: int, variant: str = STANDARD) -> float:
    """Var[T_k] to leading order."""
    pair = scaling_for(scheme, tail, lam, variant)
    law = limit_law_for(scheme, tail, k)
    return (limit_moment(law, 2) - limit_moment(law, 1) ** 2) * pair.a ** 2


def median_yi(tail: TailAsymptotics, lam: float, k: int) -> float:
    pair = scaling_yi(tail, lam)
    return pair.b - pair.a * math.log(2.0 ** (1.0 / k) - 1.0)


# Comparisons with branching processes

def compare_bp_yi_chain(lam: float, rates: Sequence[float]) -> Tuple[float, float]:
    """Location shifts (b_BP, b_YI) of the fastest passage through a chain with rates mu_1..mu_n."""
    n = len(rates)
    require(n >= 1, "the chain needs at least one rate")
    require(all(mu > 0 for mu in rates), "chain rates must be positive")
    require(lam > rates[-1], f"lambda must exceed the last chain rate {rates[-1]}")
    b_yi = (n * math.log(lam) - sum(math.log(mu) for mu in rates)) / lam
    b_bp = b_yi + (special.gammaln(n) - (n - 1) * math.log(math.log(lam / rates[-1]))) / lam
    return float(b_bp), b_yi


def compare_bbm_yi_diffusion(L: float, D: float, lam: float) -> Tuple[float, float]:
    """Leading-order medians (branching Brownian motion, YI) for 1D diffusion."""
    require(L > 0 and D > 0 and lam > 0, "compare_bbm_yi_diffusion needs positive arguments")
    root = math.sqrt(D * lam)
    return L / (2.0 * root), L / root


def verify_short_time_I(u: Monomial, tail: TailAsymptotics, t_grid,
                        quad: QuadratureSpec = DEFAULT_QUADRATURE) -> np.ndarray:
    """I(t) / (A0 t^p0 e^{-C0/t}) with 1 - S = A t^p e^{-C/t} taken exactly."""
    require(not tail.is_power, "the short-time check is for exponential tails")
    eff = effective_tail_tii(u, tail)
    floor = tail.C / 50.0
    ratios = []
    for t in t_grid:
        require(t >= floor * (1 - 1e-12), f"t = {t} is below the quadrature floor C/50 = {floor}")
        log_I = log_convolution(u, tail.log_value, float(t), quad)
        ratios.append(math.exp(log_I - eff.log_value(float(t))))
    return np.array(ratios)


def sample_gumbel_difference(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.gumbel(size=n) - rng.gumbel(size=n)
