"""
Special functions used across the library.

Everything is delegated to scipy.special; this module adds the domain checks,
the branch handling of Lambert W and a Halley polish step so results meet the
requested Precision.
"""
import math

import numpy as np
from scipy import special

from errors import DomainError, require
from model.precision_model import Precision, DEFAULT_PRECISION

INV_E = math.exp(-1.0)


def log_gamma(x: float) -> float:
    require(x > 0, f"log_gamma needs x > 0, got {x}")
    return float(special.gammaln(x))


def upper_gamma_regularized(r: float, z: float) -> float:
    """Q(r, z) = Gamma(r, z) / Gamma(r)."""
    require(r > 0, f"upper_gamma_regularized needs r > 0, got {r}")
    require(z >= 0, f"upper_gamma_regularized needs z >= 0, got {z}")
    return float(special.gammaincc(r, z))


def lower_gamma_regularized(r: float, z: float) -> float:
    require(r > 0, f"lower_gamma_regularized needs r > 0, got {r}")
    require(z >= 0, f"lower_gamma_regularized needs z >= 0, got {z}")
    return float(special.gammainc(r, z))


def erf(x):
    return special.erf(x)


def erf_inv(y):
    y_arr = np.asarray(y, dtype=float)
    if np.any(np.abs(y_arr) >= 1):
        raise DomainError("erf_inv needs |y| < 1")
    return special.erfinv(y)


def erfc_scaled(x):
    """exp(x^2) * erfc(x), finite for large x."""
    return special.erfcx(x)


def _halley(w: float, z: float, precision: Precision) -> float:
    # W e^W = z, same iteration as the classic Corless et al. scheme
    for _ in range(precision.max_iter):
        ew = math.exp(w)
        f = w * ew - z
        if w == -1.0:
            break
        w1 = w + 1.0
        dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
        w -= dw
        if abs(dw) <= precision.rel_tol * max(1.0, abs(w)) * 1e-2:
            break
    return w


def lambert_w0(z: float, precision: Precision = DEFAULT_PRECISION) -> float:
    require(z >= -INV_E, f"lambert_w0 needs z >= -1/e, got {z}")
    if z == 0:
        return 0.0
    if abs(z + INV_E) < 1e-15:
        return -1.0
    w = float(special.lambertw(z, 0).real)
    return max(_halley(w, z, precision), -1.0)


def lambert_w_m1(z: float, precision: Precision = DEFAULT_PRECISION) -> float:
    require(-INV_E <= z < 0, f"lambert_w_m1 needs -1/e <= z < 0, got {z}")
    if abs(z + INV_E) < 1e-15:
        return -1.0
    w = float(special.lambertw(z, -1).real)
    return min(_halley(w, z, precision), -1.0)


def digamma(x: float) -> float:
    require(x > 0, f"digamma needs x > 0, got {x}")
    return float(special.digamma(x))


def trigamma(x: float) -> float:
    require(x > 0, f"trigamma needs x > 0, got {x}")
    return float(special.polygamma(1, x))


def polygamma(n: int, x: float) -> float:
    require(n >= 0 and x > 0, f"polygamma needs n >= 0 and x > 0, got n={n}, x={x}")
    return float(special.polygamma(n, x))


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b), argument order follows the probability first."""
    require(0 <= x <= 1, f"regularized_incomplete_beta needs 0 <= x <= 1, got {x}")
    require(a > 0 and b > 0, f"regularized_incomplete_beta needs a, b > 0, got a={a}, b={b}")
    return float(special.betainc(a, b, x))
