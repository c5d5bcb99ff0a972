"""
Single-searcher survival models S(t) = P(tau > t).

Four kinds are supported: 1D diffusion towards a point at distance L, escape of
a 3D diffusion from a sphere of radius L, a continuous-time Markov chain on a
network (target made absorbing) and a user tabulation. Every model exposes
survival, ln(1 - S) without cancellation, its short-time tail class and an FPT
sampler.
"""
import logging
import math
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.linalg import expm

from constants import POWER_LAW, EXPONENTIAL_POWER, GRID5X5
from errors import DomainError, ModelError, require
from model.precision_model import Precision, DEFAULT_PRECISION
from model.survival_model import SurvivalModel, Diffusion1D, Escape3D, NetworkCTMC, Tabulated
from model.tail_model import TailAsymptotics
from specfun import erf, erfc_scaled

logger = logging.getLogger(__name__)

# below this value of D t / L^2 the short-time theta series converges fastest
_ESCAPE_SERIES_SWITCH = 0.25
_BISECTION_MAX_ITER = 200


# Construction

def diffusion_1d(L: float = 1.0, D: float = 1.0) -> SurvivalModel:
    kind = Diffusion1D(L, D)
    return SurvivalModel(kind, _canonical_tail(kind), label=f"diffusion1d(L={L}, D={D})")


def escape_3d(L: float = 1.0, D: float = 1.0) -> SurvivalModel:
    kind = Escape3D(L, D)
    return SurvivalModel(kind, _canonical_tail(kind), label=f"escape3d(L={L}, D={D})")


def network(Q, start: int, target: int, label: str = 'network') -> SurvivalModel:
    kind = NetworkCTMC(np.asarray(Q, dtype=float), int(start), int(target))
    return SurvivalModel(kind, _canonical_tail(kind), label=label)


def grid_generator(rows: int, cols: int, rate: float = 1.0) -> np.ndarray:
    """Nearest-neighbour random walk on a rows x cols grid, node index r * cols + c."""
    n = rows * cols
    Q = np.zeros((n, n))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    Q[i, rr * cols + cc] = rate
            Q[i, i] = -Q[i].sum()
    return Q


def grid5x5() -> SurvivalModel:
    # start in the upper-left corner, target one row down and two columns right
    Q = grid_generator(5, 5)
    return network(Q, start=0, target=1 * 5 + 2, label=GRID5X5)


def load_rate_matrix(path: str) -> np.ndarray:
    try:
        Q = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as e:
        raise ModelError(f"cannot read rate matrix {path}: {e}") from e
    return Q


def tabulated(points, tail: TailAsymptotics = None, interpolation: str = 'log', label: str = 'tabulated') -> SurvivalModel:
    points = np.asarray(points, dtype=float)
    require(points.ndim == 2 and points.shape[1] == 2, "tabulated points must be (t, S) pairs", ModelError)
    kind = Tabulated(points[:, 0], points[:, 1], interpolation)
    return SurvivalModel(kind, tail, label=label)


# Evaluation

def survival(model: SurvivalModel, t, precision: Precision = DEFAULT_PRECISION):
    """S(t) for a scalar or an array of times."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("survival needs t >= 0")
    kind = model.kind
    if isinstance(kind, Diffusion1D):
        values = _diffusion_survival(kind, t_arr)
    elif isinstance(kind, Escape3D):
        values = _escape_survival(kind, t_arr, precision)
    elif isinstance(kind, NetworkCTMC):
        values = np.vectorize(lambda s: _network_survival(kind, s), otypes=[float])(t_arr)
    else:
        values = _tabulated_survival(kind, t_arr)
    values = np.clip(values, 0.0, 1.0)
    return float(values) if values.ndim == 0 else values


def log_failure(model: SurvivalModel, t: float, precision: Precision = DEFAULT_PRECISION) -> float:
    """ln(1 - S(t)), accurate when 1 - S(t) underflows in linear scale."""
    require(t >= 0, "log_failure needs t >= 0")
    if t == 0:
        return -math.inf
    kind = model.kind
    if isinstance(kind, Diffusion1D):
        x = math.sqrt(kind.timescale / t)
        return math.log(erfc_scaled(x)) - x * x
    if isinstance(kind, Escape3D):
        if kind.D * t / kind.L ** 2 < _ESCAPE_SERIES_SWITCH:
            C = kind.timescale
            prefactor = math.log(2.0 * kind.L / math.sqrt(math.pi * kind.D * t))
            return prefactor - C / t + math.log(_escape_short_sum(C / t, precision))
        return _safe_log1m(float(_escape_survival(kind, np.asarray(t), precision)))
    if isinstance(kind, NetworkCTMC):
        absorbed = _network_absorbed(kind, t)
        return math.log(absorbed) if absorbed > 0 else -math.inf
    return _safe_log1m(float(_tabulated_survival(kind, np.asarray(t))))


def failure(model: SurvivalModel, t, precision: Precision = DEFAULT_PRECISION):
    """1 - S(t); scalar version goes through log_failure."""
    if np.ndim(t) == 0:
        return math.exp(log_failure(model, float(t), precision))
    return np.array([math.exp(log_failure(model, float(s), precision)) for s in np.ravel(t)]).reshape(np.shape(t))


def tail_params(model: SurvivalModel) -> TailAsymptotics:
    if isinstance(model.kind, Tabulated):
        require(model.tail is not None, "tabulated models need user-supplied tail metadata", ModelError)
        return model.tail
    return _canonical_tail(model.kind)


def _canonical_tail(kind) -> TailAsymptotics:
    if isinstance(kind, Diffusion1D):
        return TailAsymptotics(EXPONENTIAL_POWER, math.sqrt(4 * kind.D / (kind.L ** 2 * math.pi)), 0.5, kind.timescale)
    if isinstance(kind, Escape3D):
        return TailAsymptotics(EXPONENTIAL_POWER, math.sqrt(4 * kind.L ** 2 / (kind.D * math.pi)), -0.5, kind.timescale)
    p, weight = shortest_path_weight(kind)
    return TailAsymptotics(POWER_LAW, weight / math.factorial(p), float(p))


def shortest_path_weight(kind: NetworkCTMC):
    """(jump count of the shortest start->target path, sum over such paths of the rate products)."""
    Q = kind.Q
    n = kind.n_states
    weights = {kind.start: 1.0}
    visited = {kind.start}
    steps = 0
    while weights and kind.target not in weights:
        steps += 1
        next_weights = {}
        for i, w in weights.items():
            if i == kind.target:
                continue
            for j in np.flatnonzero(Q[i] > 0):
                if j == i or j in visited:
                    continue
                next_weights[int(j)] = next_weights.get(int(j), 0.0) + w * Q[i, j]
        visited.update(next_weights)
        weights = next_weights
        if steps > n:
            break
    if kind.target not in weights:
        raise ModelError("target is not reachable from the start node")
    return steps, weights[kind.target]


def _diffusion_survival(kind: Diffusion1D, t: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        x = np.sqrt(kind.timescale / t)
    return erf(x)


def _escape_short_sum(ratio, precision: Precision):
    # sum_j exp(-ratio ((2j+1)^2 - 1)), first term is 1; ratio >= 1 on the short-time branch
    ratio = np.asarray(ratio, dtype=float)
    target = math.log(1.0 / precision.abs_tol)
    r_min = float(np.min(ratio)) if ratio.size else 1.0
    j_max = 1
    while 4 * j_max * (j_max + 1) * r_min < target:
        j_max += 1
    j = np.arange(0, j_max + 1)
    exponents = -np.multiply.outer(ratio, 4.0 * j * (j + 1))
    return np.exp(exponents).sum(axis=-1)


def _escape_survival(kind: Escape3D, t: np.ndarray, precision: Precision) -> np.ndarray:
    t_flat = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.ones_like(t_flat)
    scaled = kind.D * t_flat / kind.L ** 2
    short = (t_flat > 0) & (scaled < _ESCAPE_SERIES_SWITCH)
    if np.any(short):
        ts = t_flat[short]
        ratio = kind.timescale / ts
        log_fail = np.log(2.0 * kind.L / np.sqrt(math.pi * kind.D * ts)) - ratio \
            + np.log(_escape_short_sum(ratio, precision))
        out[short] = 1.0 - np.exp(log_fail)
    long = scaled >= _ESCAPE_SERIES_SWITCH
    if np.any(long):
        # long-time alternating series, truncation error below the first omitted term
        s = scaled[long]
        n_max = max(1, int(math.ceil(math.sqrt(math.log(1.0 / precision.abs_tol) / (math.pi ** 2 * float(s.min()))))))
        n = np.arange(1, n_max + 1)
        signs = np.where(n % 2 == 1, 2.0, -2.0)
        out[long] = (signs * np.exp(-np.multiply.outer(s, n ** 2 * math.pi ** 2))).sum(axis=-1)
    return out.reshape(np.shape(t))


def _absorbed_generator(kind: NetworkCTMC) -> np.ndarray:
    Q = np.array(kind.Q)
    Q[kind.target, :] = 0.0
    return Q


def _network_survival(kind: NetworkCTMC, t: float) -> float:
    if t == 0:
        return 1.0
    keep = [i for i in range(kind.n_states) if i != kind.target]
    Q_abs = kind.Q[np.ix_(keep, keep)]
    start = keep.index(kind.start)
    return float(expm(Q_abs * t)[start].sum())


def _network_absorbed(kind: NetworkCTMC, t: float) -> float:
    return float(expm(_absorbed_generator(kind) * t)[kind.start, kind.target])


def _tabulated_survival(kind: Tabulated, t: np.ndarray) -> np.ndarray:
    times, values = kind.times, kind.values
    if np.any(t > times[-1]):
        raise DomainError(f"tabulated survival is defined on [0, {times[-1]}], extrapolation is not allowed")
    idx = np.clip(np.searchsorted(times, t, side='right') - 1, 0, times.size - 2)
    t0, t1 = times[idx], times[idx + 1]
    v0, v1 = values[idx], values[idx + 1]
    w = (t - t0) / (t1 - t0)
    linear = (1 - w) * v0 + w * v1
    if kind.interpolation == 'linear':
        return linear
    positive = (v0 > 0) & (v1 > 0)
    with np.errstate(divide='ignore', invalid='ignore'):
        logged = np.exp((1 - w) * np.log(np.where(positive, v0, 1.0)) + w * np.log(np.where(positive, v1, 1.0)))
    return np.where(positive, logged, linear)


def _safe_log1m(s: float) -> float:
    return math.log1p(-s) if s < 1.0 else -math.inf


# Sampling

def sample_fpt(model: SurvivalModel, rng: np.random.Generator, precision: Precision = DEFAULT_PRECISION) -> float:
    return float(sample_fpt_batch(model, rng, 1, precision)[0])


def sample_fpt_batch(model: SurvivalModel, rng: np.random.Generator, size: int,
                     precision: Precision = DEFAULT_PRECISION) -> np.ndarray:
    """`size` iid first passage times with P(tau > t) = S(t)."""
    kind = model.kind
    if isinstance(kind, NetworkCTMC):
        return _sample_network(kind, rng, size)
    # U in (0, 1]
    U = 1.0 - rng.random(size)
    if isinstance(kind, Diffusion1D):
        with np.errstate(divide='ignore'):
            return kind.timescale / special.erfinv(U) ** 2
    if isinstance(kind, Escape3D):
        return _invert_by_bisection(lambda s: _escape_survival(kind, s, precision), U, kind.timescale, precision)
    return _invert_tabulated(kind, U)


def _invert_by_bisection(surv, U: np.ndarray, scale: float, precision: Precision) -> np.ndarray:
    out = np.zeros_like(U)
    todo = U < 1.0
    u = U[todo]
    lo = np.full(u.shape, scale)
    hi = np.full(u.shape, scale)
    # grow the bracket geometrically until S(lo) >= U >= S(hi)
    while True:
        low_side = surv(lo) < u
        if not np.any(low_side):
            break
        lo[low_side] /= 4.0
    while True:
        high_side = surv(hi) > u
        if not np.any(high_side):
            break
        hi[high_side] *= 4.0
    for _ in range(_BISECTION_MAX_ITER):
        mid = np.sqrt(lo * hi)
        above = surv(mid) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= precision.abs_tol * np.maximum(1.0, hi)):
            break
    out[todo] = 0.5 * (lo + hi)
    return out


def _invert_tabulated(kind: Tabulated, U: np.ndarray) -> np.ndarray:
    times, values = kind.times, kind.values
    j = np.searchsorted(-values, -U, side='right')
    out = np.full(U.shape, np.inf)
    inside = j < values.size
    j_in = np.maximum(j[inside], 1)
    t0, t1 = times[j_in - 1], times[j_in]
    v0, v1 = values[j_in - 1], values[j_in]
    u = U[inside]
    w_linear = (v0 - u) / (v0 - v1)
    if kind.interpolation == 'log':
        positive = v1 > 0
        with np.errstate(divide='ignore', invalid='ignore'):
            w_log = np.log(u / v0) / np.log(np.where(positive, v1, 1.0) / v0)
        w = np.where(positive, w_log, w_linear)
    else:
        w = w_linear
    out[inside] = t0 + np.clip(w, 0.0, 1.0) * (t1 - t0)
    return out


@lru_cache(maxsize=32)
def _jump_tables(kind: NetworkCTMC):
    Q = kind.Q
    n = kind.n_states
    rates = -np.diag(Q).copy()
    jumps = np.array(Q)
    np.fill_diagonal(jumps, 0.0)
    cumulative = np.cumsum(jumps, axis=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        cumulative = np.where(rates[:, None] > 0, cumulative / rates[:, None], 1.0)
    cumulative[:, -1] = 1.0
    rates.setflags(write=False)
    cumulative.setflags(write=False)
    return rates, cumulative, n


def _sample_network(kind: NetworkCTMC, rng: np.random.Generator, size: int) -> np.ndarray:
    """Exact event simulation of `size` independent walkers until absorption."""
    rates, cumulative, _ = _jump_tables(kind)
    state = np.full(size, kind.start)
    clock = np.zeros(size)
    active = np.ones(size, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        current = state[idx]
        trapped = rates[current] <= 0
        if np.any(trapped):
            clock[idx[trapped]] = np.inf
            active[idx[trapped]] = False
            idx, current = idx[~trapped], current[~trapped]
            if idx.size == 0:
                break
        clock[idx] += rng.exponential(1.0, idx.size) / rates[current]
        u = rng.random(idx.size)
        state[idx] = (cumulative[current] <= u[:, None]).sum(axis=1)
        active[idx] = state[idx] != kind.target
    return clock
