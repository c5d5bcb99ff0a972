"""
Experiment runners behind the CLI.

Each runner takes a RunConfig and returns a pandas DataFrame with a fixed
column order; `write_table` persists it as CSV with 17 significant digits.
"""
import logging
import math
import os
from functools import partial
from typing import Callable, List, Optional

import numpy as np
import pandas as pd
from colorama import Fore, Style
from tqdm import tqdm

import asymptotics
import exact
import montecarlo
from constants import (
    EXACT_CURVE, LIMIT_CURVE, SIMULATE, DENSITY_CONVERGENCE, MEAN_ERROR, VERIFY_SUITE,
    COMPARE_BRANCHING, EXPONENTIAL_POWER, STANDARD, LAMBERTW, CSV_FLOAT_FORMAT,
)
from config import build_immigration, build_model
from errors import ConfigError, FptError
from model.immigration_model import ImmigrationSpec, Monomial
from model.run_config_model import RunConfig
from model.scaling_model import ScalingPair, LimitLaw, GAMMA_GUMBEL, YULE_LOGISTIC_POWER
from model.survival_model import SurvivalModel
from model.tail_model import TailAsymptotics
from searchers import tail_params, diffusion_1d

logger = logging.getLogger(__name__)

DENSITY_STEP = 1e-3

EXACT_CURVE_COLUMNS = ['lambda', 't', 'survival']
LIMIT_CURVE_COLUMNS = ['lambda', 'x', 't', 'limit_survival', 'limit_density']
SIMULATE_COLUMNS = ['lambda', 'replicate', 't_k']
DENSITY_COLUMNS = ['lambda', 'x', 'exact_density', 'mc_density', 'limit_density']
MEAN_ERROR_COLUMNS = ['lambda', 'exact_mean', 'predicted_mean', 'rel_error']
VERIFY_COLUMNS = ['check', 'statistic', 'threshold', 'passed']
BRANCHING_COLUMNS = ['lambda', 'b_bp', 'b_yi', 'shift', 't_bbm', 't_yi', 'ratio']


def write_table(df: pd.DataFrame, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("wrote %d rows to %s", len(df), path)
    return path


# Shared pieces

def scaling_tail(spec: ImmigrationSpec, model: SurvivalModel) -> TailAsymptotics:
    """Tail fed to the scaling formulas: the effective tail of I(t) under TII, the searcher tail under YI."""
    tail = tail_params(model)
    if spec.is_tii:
        return asymptotics.effective_tail_tii(spec.u, tail)
    return tail


def scaling_and_law(cfg: RunConfig, spec: ImmigrationSpec, model: SurvivalModel):
    tail = scaling_tail(spec, model)
    pair = asymptotics.scaling_for(spec.scheme, tail, spec.lam, cfg.variant)
    law = asymptotics.limit_law_for(spec.scheme, tail, cfg.k)
    return pair, law


def scaled_exact_survival(spec: ImmigrationSpec, model: SurvivalModel, k: int,
                          pair: ScalingPair) -> Callable[[float], float]:
    def surv(x):
        t = pair.to_time(x)
        return 1.0 if t <= 0 else exact.survival_k(spec, model, k, t)
    return surv


def _require_grid(grid, name: str):
    if grid is None:
        raise ConfigError(f"this experiment needs '{name}'")
    return np.asarray(grid, dtype=float)


def _sweep(cfg: RunConfig):
    return tqdm(cfg.lambdas, desc=cfg.experiment, unit='lambda', leave=False)


# Runners

def run_exact_curve(cfg: RunConfig) -> pd.DataFrame:
    t_grid = _require_grid(cfg.t_grid, 't_grid')
    model = build_model(cfg.model)
    rows = []
    for lam in _sweep(cfg):
        spec = build_immigration(cfg, lam)
        rows.extend((lam, t, exact.survival_k(spec, model, cfg.k, t)) for t in t_grid)
    return pd.DataFrame(rows, columns=EXACT_CURVE_COLUMNS)


def run_limit_curve(cfg: RunConfig) -> pd.DataFrame:
    x_grid = _require_grid(cfg.x_grid, 'x_grid')
    model = build_model(cfg.model)
    rows = []
    for lam in _sweep(cfg):
        pair, law = scaling_and_law(cfg, build_immigration(cfg, lam), model)
        x = x_grid[x_grid >= law.lower_support]
        rows.extend(zip([lam] * x.size, x, pair.to_time(x),
                        asymptotics.limit_survival(law, x), asymptotics.limit_density(law, x)))
    return pd.DataFrame(rows, columns=LIMIT_CURVE_COLUMNS)


def run_simulate(cfg: RunConfig, seed: int, workers: int = 1) -> pd.DataFrame:
    model = build_model(cfg.model)
    frames = []
    for lam in _sweep(cfg):
        result = montecarlo.simulate_tk(build_immigration(cfg, lam), model, cfg.k, cfg.replicates, seed, workers)
        frames.append(pd.DataFrame({'lambda': lam, 'replicate': np.arange(result.replicates), 't_k': result.samples},
                                   columns=SIMULATE_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def histogram_density(samples: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Freedman-Diaconis histogram of `samples` read off at `x` (0 outside the bins)."""
    finite = samples[np.isfinite(samples)]
    edges = np.histogram_bin_edges(finite, bins='fd')
    heights, edges = np.histogram(finite, bins=edges, density=True)
    index = np.searchsorted(edges, x, side='right') - 1
    inside = (index >= 0) & (index < heights.size)
    return np.where(inside, heights[np.clip(index, 0, heights.size - 1)], 0.0)


def run_density_convergence(cfg: RunConfig, seed: int, workers: int = 1) -> pd.DataFrame:
    x_grid = _require_grid(cfg.x_grid, 'x_grid')
    model = build_model(cfg.model)
    rows = []
    for lam in _sweep(cfg):
        spec = build_immigration(cfg, lam)
        pair, law = scaling_and_law(cfg, spec, model)
        surv = scaled_exact_survival(spec, model, cfg.k, pair)
        exact_density = [(surv(x - DENSITY_STEP) - surv(x + DENSITY_STEP)) / (2 * DENSITY_STEP) for x in x_grid]
        samples = montecarlo.simulate_tk(spec, model, cfg.k, cfg.replicates, seed, workers)
        mc_density = histogram_density(montecarlo.scale_samples(samples, pair), x_grid)
        inside = x_grid >= law.lower_support
        limit_density = np.zeros_like(x_grid)
        limit_density[inside] = asymptotics.limit_density(law, x_grid[inside])
        rows.extend(zip([lam] * x_grid.size, x_grid, exact_density, mc_density, limit_density))
    return pd.DataFrame(rows, columns=DENSITY_COLUMNS)


def run_mean_error(cfg: RunConfig) -> pd.DataFrame:
    model = build_model(cfg.model)
    rows = []
    for lam in _sweep(cfg):
        spec = build_immigration(cfg, lam)
        tail = scaling_tail(spec, model)
        predicted = asymptotics.mean_expansion(spec.scheme, tail, lam, cfg.k, cfg.variant)
        pair = asymptotics.scaling_for(spec.scheme, tail, lam, cfg.variant)
        scale = max(pair.b, pair.a)
        exact_mean = exact.exact_mean(spec, model, cfg.k, scale)
        rows.append((lam, exact_mean, predicted, abs(predicted - exact_mean) / exact_mean))
    return pd.DataFrame(rows, columns=MEAN_ERROR_COLUMNS)


def run_compare_branching(cfg: RunConfig) -> pd.DataFrame:
    if not cfg.chain_rates and cfg.diffusion is None:
        raise ConfigError("compare-branching needs 'chain_rates' or 'diffusion'")
    rows = []
    for lam in cfg.lambdas:
        b_bp = b_yi = t_bbm = t_yi = math.nan
        if cfg.chain_rates:
            b_bp, b_yi = asymptotics.compare_bp_yi_chain(lam, cfg.chain_rates)
        if cfg.diffusion is not None:
            t_bbm, t_yi = asymptotics.compare_bbm_yi_diffusion(cfg.diffusion[0], cfg.diffusion[1], lam)
        rows.append((lam, b_bp, b_yi, b_yi - b_bp, t_bbm, t_yi, t_yi / t_bbm))
    return pd.DataFrame(rows, columns=BRANCHING_COLUMNS)


# Verification suite

def _check(name: str, statistic: float, threshold: float, passed: bool):
    return name, float(statistic), float(threshold), bool(passed)


def _check_geometric_composition():
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    worst = 0.0
    for p1 in grid:
        for p2 in grid:
            composed = exact.binomial_of_geometric_pmf(p1, p2)
            reference = exact.geometric_pmf(exact.geometric_compose(p1, p2), np.arange(composed.size))
            worst = max(worst, exact.total_variation(composed, reference))
    return [_check('binomial-of-geometric TV distance', worst, 1e-10, worst < 1e-10)]


def _check_coupling(seed: int):
    model = diffusion_1d()
    checks = []
    first = montecarlo.coupling_check_tii(3, Monomial(), model, 1, 500, seed)
    equal = float(np.mean(first.agreement))
    checks.append(_check('coupling k=1 equality fraction', equal, 1.0, equal == 1.0))
    second = montecarlo.coupling_check_tii(4, Monomial(), model, 2, 4000, seed)
    frequency = float(np.mean(second.agreement))
    target = second.expected_agreement
    sigma = math.sqrt(target * (1 - target) / second.merged.size)
    checks.append(_check('coupling k=2 agreement deviation (sigmas)', abs(frequency - target) / sigma, 3.0,
                         abs(frequency - target) <= 3 * sigma))
    ordered = bool(np.all(second.merged <= second.first_only) and np.all(first.merged <= first.first_only))
    checks.append(_check('coupling T_k <= first-completion T_k', float(ordered), 1.0, ordered))
    return checks


def _check_geometric_law(seed: int):
    lam, horizon = 2.0, 1.0
    model = diffusion_1d()
    run = montecarlo.simulate_tk_yi_conditional(lam, model, 1, horizon, 5000, seed)
    p = exact.yi_success_probability(lam, model, horizon)
    _, p_value = montecarlo.chi_square_geometric(run.late_successes, p)
    return [_check('YI success count chi-square p-value', p_value, 0.01, p_value > 0.01)]


def _check_short_time_convolution():
    tail = TailAsymptotics(EXPONENTIAL_POWER, 1.0, 0.5, 1.0)
    t_grid = tail.C / np.arange(10, 51, 10)
    checks = []
    for n in (0, 1, 2):
        errors = np.abs(asymptotics.verify_short_time_I(Monomial(1.0, n), tail, t_grid) - 1.0)
        monotone = bool(np.all(np.diff(errors) < 0))
        checks.append(_check(f'short-time I(t) ratio error, n={n}', errors[-1], errors[0], monotone))
    return checks


def _check_scaling_equivalence():
    # the standard pair only catches up as (ln ell)^2 / ell, so the sweep reaches far out
    eff = asymptotics.effective_tail_tii(Monomial(), tail_params(diffusion_1d()))
    lambdas = 10.0 ** np.array([10, 50, 100, 200, 300])
    ratio_errors, shift_errors = [], []
    for lam in lambdas:
        standard = asymptotics.scaling_tii(eff, lam, STANDARD)
        lambert = asymptotics.scaling_tii(eff, lam, LAMBERTW)
        ratio_errors.append(abs(lambert.a / standard.a - 1.0))
        shift_errors.append(abs(lambert.b - standard.b) / standard.a)
    return [
        _check('scaling variants a ratio error', ratio_errors[-1], ratio_errors[0], ratio_errors[-1] < ratio_errors[0]),
        _check('scaling variants b shift error', shift_errors[-1], shift_errors[0], shift_errors[-1] < shift_errors[0]),
    ]


def _check_branching_formulas():
    lam, rates = 1e6, [1.0, 1.0, 1.0]
    b_bp, b_yi = asymptotics.compare_bp_yi_chain(lam, rates)
    n = len(rates)
    identity = (n - 1) * math.log(math.log(lam / rates[-1])) - math.log(math.factorial(n - 1))
    shift_error = abs((b_yi - b_bp) * lam - identity)
    t_bbm, t_yi = asymptotics.compare_bbm_yi_diffusion(1.0, 1.0, lam)
    return [
        _check('chain shift identity error', shift_error, 1e-12, shift_error < 1e-12),
        _check('YI over BBM median ratio', t_yi / t_bbm, 2.0, t_yi / t_bbm == 2.0),
    ]


def _check_limit_moments():
    worst = 0.0
    for k in range(1, 6):
        for law in (LimitLaw(GAMMA_GUMBEL, k), LimitLaw(YULE_LOGISTIC_POWER, k)):
            for m in (1, 2):
                closed = asymptotics.limit_moment(law, m)
                numeric = asymptotics.limit_moment(law, m, method='finite_difference')
                worst = max(worst, abs(closed - numeric) / max(1.0, abs(closed)))
    return [_check('limit moments closed vs finite difference', worst, 1e-4, worst < 1e-4)]


def run_verify_suite(cfg: Optional[RunConfig], seed: int) -> pd.DataFrame:
    """Every cross-module check with fixed seeds; `cfg` only contributes its seed when it has one."""
    if cfg is not None and cfg.seed is not None:
        seed = cfg.seed
    rows: List[tuple] = []
    groups = [
        ('geometric composition', _check_geometric_composition),
        ('coupling', partial(_check_coupling, seed)),
        ('YI geometric law', partial(_check_geometric_law, seed)),
        ('short-time convolution', _check_short_time_convolution),
        ('scaling equivalence', _check_scaling_equivalence),
        ('branching comparisons', _check_branching_formulas),
        ('limit moments', _check_limit_moments),
    ]
    for name, group in tqdm(groups, desc=VERIFY_SUITE, leave=False):
        try:
            rows.extend(group())
        except FptError as e:
            logger.error("%s check raised: %s", name, e)
            rows.append(_check(name, math.nan, math.nan, False))
    df = pd.DataFrame(rows, columns=VERIFY_COLUMNS)
    print_report(df)
    return df


def print_report(df: pd.DataFrame) -> None:
    for row in df.itertuples(index=False):
        label = f"{Fore.GREEN}{Style.BRIGHT}[PASSED]" if row.passed else f"{Fore.RED}{Style.BRIGHT}[FAILED]"
        print(f"\t{label}{Style.RESET_ALL} {row.check}: "
              f"{Fore.YELLOW}{row.statistic:.6g}{Style.RESET_ALL} (threshold {row.threshold:.6g})")
    passed = int(df['passed'].sum())
    colour = Fore.GREEN if passed == len(df) else Fore.RED
    print(f"Checks: {colour}{Style.BRIGHT}{passed}/{len(df)}{Style.RESET_ALL}")


RUNNERS = {
    EXACT_CURVE: run_exact_curve,
    LIMIT_CURVE: run_limit_curve,
    SIMULATE: run_simulate,
    DENSITY_CONVERGENCE: run_density_convergence,
    MEAN_ERROR: run_mean_error,
    VERIFY_SUITE: run_verify_suite,
    COMPARE_BRANCHING: run_compare_branching,
}


def run(cfg: RunConfig, seed: int, workers: int = 1) -> pd.DataFrame:
    logger.info("running %s over lambda = %s", cfg.experiment, list(cfg.lambdas))
    if cfg.experiment in (SIMULATE, DENSITY_CONVERGENCE):
        return RUNNERS[cfg.experiment](cfg, seed, workers)
    if cfg.experiment == VERIFY_SUITE:
        return run_verify_suite(cfg, seed)
    return RUNNERS[cfg.experiment](cfg)
