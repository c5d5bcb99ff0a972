"""
Direct simulation of the k-th passage time T_k = k-th smallest of {sigma_n + tau_n}.

Arrivals come in increasing order, so once an arrival time exceeds the current
k-th best completion no later searcher can improve it and the replicate stops.
Every replicate draws from its own Philox stream keyed by (seed, index); the
partition of replicates across worker processes never changes the result.
"""
import heapq
import logging
import math
import pickle
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterator, Tuple

import numpy as np
from scipy import stats

from constants import YULE
from errors import ModelError, require
from immigration import iter_arrivals, rate_diverges, sample_yule_conditional, sample_yule_population
from model.immigration_model import ImmigrationSpec, Generic, RateFunction, tii
from model.precision_model import Precision, DEFAULT_PRECISION
from model.sample_model import PassageSampleSet, EcdfSummary, ConditionalYuleRun, CouplingResult
from model.scaling_model import ScalingPair
from model.survival_model import SurvivalModel, Tabulated
from searchers import sample_fpt_batch

logger = logging.getLogger(__name__)

BRUTE_FORCE_ARRIVALS = 10_000
DKW_DELTA = 0.01


def replicate_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def _check_terminates(spec: ImmigrationSpec, model: SurvivalModel) -> None:
    if isinstance(model.kind, Tabulated):
        require(model.kind.values[-1] < 1.0, "a searcher that never reaches the target makes T_k infinite", ModelError)
    if spec.is_tii and isinstance(spec.u, Generic):
        u = spec.u
        require(math.isinf(u.horizon) and u.envelope[-1][2] > 0,
                "a generic rate needs an unbounded last envelope window with a positive bound", ModelError)
        require(rate_diverges(u), "the immigration rate is integrable, so only finitely many searchers arrive "
                                  "and T_k can be infinite", ModelError)


def _picklable(*objects) -> bool:
    try:
        pickle.dumps(objects)
    except (pickle.PicklingError, AttributeError, TypeError):
        return False
    return True


def completion_chunks(spec: ImmigrationSpec, model: SurvivalModel, rng: np.random.Generator,
                      precision: Precision = DEFAULT_PRECISION) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """(arrival times, completion times) chunks; every consumer draws from rng in this order."""
    for sigma in iter_arrivals(spec, rng):
        yield sigma, sigma + sample_fpt_batch(model, rng, sigma.size, precision)


def _k_best(chunks, k: int) -> np.ndarray:
    """The k smallest completions in ascending order, stopping at the first arrival past the k-th best."""
    heap = [-math.inf] * k
    cutoff = math.inf
    for sigma, completion in chunks:
        for s, c in zip(sigma.tolist(), completion.tolist()):
            if s > cutoff:
                return np.sort(-np.array(heap))
            if c < cutoff:
                heapq.heapreplace(heap, -c)
                cutoff = -heap[0]
    raise ModelError("arrival stream ended before T_k was determined")


def _simulate_block(spec: ImmigrationSpec, model: SurvivalModel, k: int, seed: int,
                    indices: np.ndarray, precision: Precision) -> np.ndarray:
    out = np.empty(indices.size)
    for j, index in enumerate(indices):
        rng = replicate_generator(seed, int(index))
        out[j] = _k_best(completion_chunks(spec, model, rng, precision), k)[-1]
    return out


def simulate_tk(spec: ImmigrationSpec, model: SurvivalModel, k: int, replicates: int, seed: int,
                workers: int = 1, precision: Precision = DEFAULT_PRECISION) -> PassageSampleSet:
    require(k >= 1, "k must be a positive integer")
    require(replicates >= 1, "replicates must be at least 1")
    _check_terminates(spec, model)
    workers = max(1, min(int(workers), replicates))
    if workers > 1 and not _picklable(spec, model, precision):
        logger.warning("immigration rate or searcher cannot be sent to worker processes "
                       "(define it at module level); simulating on one worker")
        workers = 1
    blocks = np.array_split(np.arange(replicates), workers)
    if workers == 1:
        samples = _simulate_block(spec, model, k, seed, blocks[0], precision)
    else:
        logger.info("simulating %d replicates on %d workers", replicates, workers)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_simulate_block, [spec] * workers, [model] * workers, [k] * workers,
                             [seed] * workers, blocks, [precision] * workers)
            samples = np.concatenate(list(parts))
    return PassageSampleSet(samples, k, spec.scheme, model.describe(), spec.lam, seed)


def simulate_tk_bruteforce(spec: ImmigrationSpec, model: SurvivalModel, k: int, replicates: int, seed: int,
                           arrivals: int = BRUTE_FORCE_ARRIVALS,
                           precision: Precision = DEFAULT_PRECISION) -> np.ndarray:
    """k-th order statistic over a fixed number of arrivals, same random streams as simulate_tk."""
    require(1 <= k <= arrivals, "k must lie in [1, arrivals]")
    out = np.empty(replicates)
    for index in range(replicates):
        rng = replicate_generator(seed, index)
        collected, count = [], 0
        for _, completion in completion_chunks(spec, model, rng, precision):
            collected.append(completion)
            count += completion.size
            if count >= arrivals:
                break
        completions = np.concatenate(collected)[:arrivals]
        out[index] = np.partition(completions, k - 1)[k - 1]
    return out


def simulate_tk_yi_conditional(lam: float, model: SurvivalModel, k: int, horizon: float, replicates: int,
                               seed: int, precision: Precision = DEFAULT_PRECISION) -> ConditionalYuleRun:
    require(horizon > 0, "horizon must be positive")
    population = np.empty(replicates, dtype=int)
    initial = np.empty(replicates, dtype=bool)
    late = np.empty(replicates, dtype=int)
    passages = np.full(replicates, np.inf)
    for index in range(replicates):
        rng = replicate_generator(seed, index)
        n = int(sample_yule_population(lam, horizon, rng))
        sigma = sample_yule_conditional(lam, horizon, n, rng)
        first = sample_fpt_batch(model, rng, 1, precision)
        completions = sigma + sample_fpt_batch(model, rng, sigma.size, precision)
        population[index] = n
        initial[index] = first[0] <= horizon
        late[index] = int(np.count_nonzero(completions <= horizon))
        successes = np.sort(np.concatenate([first, completions]))
        successes = successes[successes <= horizon]
        if successes.size >= k:
            passages[index] = successes[k - 1]
    return ConditionalYuleRun(samples=passages, k=k, scheme=YULE, model=model.describe(), lam=lam, seed=seed,
                              horizon=horizon, population=population, initial_success=initial, late_successes=late)


def coupling_check_tii(lam: int, u: RateFunction, model: SurvivalModel, k: int, replicates: int,
                       seed: int, precision: Precision = DEFAULT_PRECISION) -> CouplingResult:
    """Rate-lam TII as lam superposed unit-rate streams; T_k over all completions vs over first completions."""
    require(int(lam) == lam and lam >= k, f"coupling needs an integer lambda >= k, got {lam}")
    lam = int(lam)
    unit = tii(1.0, u)
    _check_terminates(unit, model)
    merged = np.empty(replicates)
    first_only = np.empty(replicates)
    for index in range(replicates):
        rng = replicate_generator(seed, index)
        streams = [_k_best(completion_chunks(unit, model, rng, precision), k) for _ in range(lam)]
        merged[index] = np.sort(np.concatenate(streams))[k - 1]
        first_only[index] = np.sort([best[0] for best in streams])[k - 1]
    return CouplingResult(merged, first_only, lam, k)


# Empirical distributions

def ecdf(samples, delta: float = DKW_DELTA) -> EcdfSummary:
    values = np.sort(np.asarray(samples, dtype=float))
    require(values.size >= 1, "ecdf needs at least one sample")
    half_width = math.sqrt(math.log(2.0 / delta) / (2.0 * values.size))
    return EcdfSummary(values, half_width, delta)


def ks_distance(summary: EcdfSummary, survival: Callable) -> float:
    """sup |F_n - (1 - S)|; `survival` must accept arrays."""
    x = summary.values
    n = summary.n
    cdf = 1.0 - np.asarray(survival(x), dtype=float)
    cdf_left = 1.0 - np.asarray(survival(np.nextafter(x, -np.inf)), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf_left - (i - 1) / n)))


def scale_samples(samples, pair: ScalingPair) -> np.ndarray:
    values = samples.samples if isinstance(samples, PassageSampleSet) else np.asarray(samples, dtype=float)
    return pair.to_scaled(values)


def chi_square_gof(values, pmf: Callable[[np.ndarray], np.ndarray], start: int = 0,
                   min_expected: float = 5.0) -> Tuple[float, float]:
    """Chi-square goodness of fit of integer data on {start, start + 1, ...}; the tail is pooled."""
    values = np.asarray(values, dtype=int)
    n = values.size
    require(n >= 1, "chi-square test needs data")
    support = np.arange(start, max(int(values.max()), start) + 1)
    expected = n * np.asarray(pmf(support), dtype=float)
    # keep cells while both they and the remaining tail have enough expected mass
    last = 0
    while last + 1 < support.size and expected[last + 1] >= min_expected \
            and n - expected[:last + 2].sum() >= min_expected:
        last += 1
    cells = support[:last + 1]
    observed = np.array([np.count_nonzero(values == c) for c in cells] + [np.count_nonzero(values > cells[-1])])
    expected_cells = np.append(expected[:last + 1], n - expected[:last + 1].sum())
    statistic, p_value = stats.chisquare(observed, expected_cells)
    return float(statistic), float(p_value)


def chi_square_geometric(counts, p: float) -> Tuple[float, float]:
    """Counts on {0, 1, ...} against Geometric(p)."""
    return chi_square_gof(counts, lambda n: stats.geom.pmf(n + 1, p))
