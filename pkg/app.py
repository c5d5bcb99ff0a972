import argparse
import logging
import os
import sys
from dataclasses import replace

from halo import Halo

import harness
from config import load_settings, load_run_config, parse_run_config
from constants import (
    EXACT_CURVE, LIMIT_CURVE, SIMULATE, DENSITY_CONVERGENCE, MEAN_ERROR, VERIFY_SUITE, COMPARE_BRANCHING,
    EXIT_OK, EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_VERIFICATION_FAILURE, SCHEMA_VERSION,
)
from errors import ConfigError, FptError, VerificationError

COMMANDS = {
    'exact': EXACT_CURVE,
    'limit': LIMIT_CURVE,
    'simulate': SIMULATE,
    'fig-density': DENSITY_CONVERGENCE,
    'fig-mean-error': MEAN_ERROR,
    'verify': VERIFY_SUITE,
    'compare-branching': COMPARE_BRANCHING,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='fpt', description="k-th fastest first passage times under immigration")
    parser.add_argument('command', choices=list(COMMANDS))
    parser.add_argument('--config', help="run-config JSON document")
    parser.add_argument('--out', help="CSV output path")
    parser.add_argument('--seed', type=int, help="random seed (non-negative)")
    parser.add_argument('--workers', type=int, help="worker processes for Monte Carlo")
    parser.add_argument('--lambda', dest='lambdas', help="comma separated immigration rates, overrides the config")
    return parser


def _parse_lambdas(value: str):
    try:
        lambdas = tuple(float(v) for v in value.split(',') if v.strip())
    except ValueError as e:
        raise ConfigError(f"--lambda must be a comma separated list of numbers: {e}") from e
    if not lambdas or any(lam <= 0 for lam in lambdas):
        raise ConfigError("--lambda needs positive rates")
    return lambdas


def _load_config(args, experiment: str):
    if args.config:
        cfg = load_run_config(args.config)
        if cfg.experiment != experiment:
            logging.warning("config experiment %s replaced by the %s command", cfg.experiment, args.command)
            cfg = replace(cfg, experiment=experiment)
    elif experiment == VERIFY_SUITE:
        # the suite carries its own parameters
        cfg = parse_run_config(f'{{"schema_version": {SCHEMA_VERSION}, "experiment": "{experiment}", '
                               f'"immigration": {{"scheme": "yule"}}, "lambdas": [1]}}')
    else:
        raise ConfigError(f"the {args.command} command needs --config")
    if args.lambdas:
        cfg = replace(cfg, lambdas=_parse_lambdas(args.lambdas))
    return cfg


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
        logging.getLogger().setLevel(settings.log_level)
        experiment = COMMANDS[args.command]
        cfg = _load_config(args, experiment)
        seed = args.seed if args.seed is not None else (cfg.seed if cfg.seed is not None else settings.seed)
        if seed < 0:
            raise ConfigError("--seed must be non-negative")
        workers = args.workers if args.workers is not None else settings.workers
        if workers < 1:
            raise ConfigError("--workers must be at least 1")
        out = args.out or cfg.output or os.path.join(settings.output_dir, f"{experiment}.csv")

        with Halo(text=f"Running {experiment}", spinner='dots', enabled=sys.stderr.isatty()) as spinner:
            df = harness.run(cfg, seed, workers)
            spinner.succeed(f"{experiment} done")
        harness.write_table(df, out)
        if experiment == VERIFY_SUITE and not df["passed"].all():
            raise VerificationError(f"{int((~df['passed']).sum())} verification checks failed")
    except ConfigError as e:
        logging.error("%s", e)
        return EXIT_CONFIG_ERROR
    except VerificationError as e:
        logging.error("%s", e)
        return EXIT_VERIFICATION_FAILURE
    except FptError as e:
        logging.error("numerical failure: %s", e)
        return EXIT_NUMERICAL_FAILURE

    return EXIT_OK


def main():
    """Main function
    """
    logging.basicConfig(format='%(asctime)s : %(levelname)s : %(message)s', level=logging.INFO)
    sys.exit(run())


if __name__ == '__main__':
    main()
