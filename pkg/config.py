"""
Settings from the environment and run-config documents.

The run config is a JSON document:

{
  "schema_version": 1,
  "experiment": "density-convergence",
  "immigration": {"scheme": "yule"},
  "model": {"kind": "diffusion1d", "L": 1, "D": 1},
  "k": 1,
  "lambdas": [100, 1000, 10000],
  "replicates": 10000,
  "x_grid": {"start": -4, "stop": 8, "num": 121}
}
"""
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, asdict
from typing import Optional

from dotenv import load_dotenv

import searchers
from constants import (
    TII, YULE, DIFFUSION_1D, ESCAPE_3D, NETWORK, TABULATED, GRID5X5, CONSTANT_RATE,
    POWER_LAW, EXPONENTIAL_POWER, STANDARD, LAMBERTW, EXPERIMENTS, SCHEMA_VERSION,
)
from errors import ConfigError, FptError
from model.immigration_model import ImmigrationSpec, Monomial, RateFunction
from model.run_config_model import RunConfig
from model.survival_model import SurvivalModel
from model.tail_model import TailAsymptotics

logger = logging.getLogger(__name__)

extDataDir = os.getcwd()
if getattr(sys, 'frozen', False):
    extDataDir = sys._MEIPASS

DEFAULT_SEED = 20240501


@dataclass(frozen=True)
class Settings:
    workers: int = 1
    seed: int = DEFAULT_SEED
    log_level: str = 'INFO'
    output_dir: str = 'results'


def load_settings(env_path: Optional[str] = None) -> Settings:
    load_dotenv(dotenv_path=env_path or os.path.join(extDataDir, '.env'))
    try:
        return Settings(
            workers=int(os.getenv("FPT_WORKERS", "1")),
            seed=int(os.getenv("FPT_SEED", str(DEFAULT_SEED))),
            log_level=os.getenv("FPT_LOG_LEVEL", "INFO").upper(),
            output_dir=os.getenv("FPT_OUTPUT_DIR", "results"),
        )
    except ValueError as e:
        raise ConfigError(f"invalid environment setting: {e}") from e


# Parsing

def _line_of(text: str, *path: str) -> Optional[int]:
    """1-based line of the last key in `path`, searched after each parent key."""
    offset = 0
    for key in path:
        found = text.find(f'"{key}"', offset)
        if found < 0:
            return None
        offset = found
    return text.count('\n', 0, offset) + 1


class _Reader:
    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, *path: str):
        raise ConfigError(message, self._line(path))

    def _line(self, path):
        return _line_of(self.text, *path) if path else None

    def number(self, block: dict, key: str, *parents: str, positive=False, default=None) -> float:
        value = block.get(key, default)
        if value is None:
            self.fail(f"missing required key {key!r}", *parents, key)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(f"{key!r} must be a finite number, got {value!r}", *parents, key)
        if positive and value <= 0:
            self.fail(f"{key!r} must be positive, got {value!r}", *parents, key)
        return float(value)

    def integer(self, block: dict, key: str, *parents: str, minimum=None, default=None) -> int:
        value = block.get(key, default)
        if value is None:
            self.fail(f"missing required key {key!r}", *parents, key)
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"{key!r} must be an integer, got {value!r}", *parents, key)
        if minimum is not None and value < minimum:
            self.fail(f"{key!r} must be at least {minimum}, got {value!r}", *parents, key)
        return value

    def block(self, doc: dict, key: str, *parents: str) -> dict:
        value = doc.get(key)
        if not isinstance(value, dict):
            self.fail(f"{key!r} must be an object", *parents, key)
        return value

    def grid(self, doc: dict, key: str):
        value = doc.get(key)
        if value is None:
            return None
        if isinstance(value, dict):
            start = self.number(value, 'start', key)
            stop = self.number(value, 'stop', key)
            num = self.integer(value, 'num', key, minimum=2)
            step = (stop - start) / (num - 1)
            points = [start + i * step for i in range(num)]
        elif isinstance(value, list) and value:
            points = [self.number({key: v}, key) for v in value]
        else:
            self.fail(f"{key!r} must be a list or {{start, stop, num}}", key)
        if any(b <= a for a, b in zip(points, points[1:])):
            self.fail(f"{key!r} must be strictly increasing", key)
        return tuple(points)


def _normalize_rate(reader: _Reader, value) -> dict:
    if value is None or value == CONSTANT_RATE:
        return {'monomial': {'alpha': 1.0, 'n': 0}}
    if isinstance(value, dict) and isinstance(value.get('monomial'), dict):
        mono = value['monomial']
        alpha = reader.number(mono, 'alpha', 'immigration', 'u', 'monomial', positive=True, default=1.0)
        n = reader.integer(mono, 'n', 'immigration', 'u', 'monomial', minimum=0, default=0)
        return {'monomial': {'alpha': alpha, 'n': n}}
    reader.fail(f"unknown rate {value!r}, expected \"constant\" or {{\"monomial\": {{...}}}}", 'immigration', 'u')


def _normalize_tail(reader: _Reader, tail: dict) -> dict:
    tail_class = tail.get('class')
    if tail_class not in (POWER_LAW, EXPONENTIAL_POWER):
        reader.fail(f"tail class must be {POWER_LAW!r} or {EXPONENTIAL_POWER!r}", 'model', 'tail')
    out = {'class': tail_class,
           'A': reader.number(tail, 'A', 'model', 'tail', positive=True),
           'p': reader.number(tail, 'p', 'model', 'tail')}
    if tail_class == EXPONENTIAL_POWER:
        out['C'] = reader.number(tail, 'C', 'model', 'tail', positive=True)
    return out


def _normalize_model(reader: _Reader, block) -> dict:
    if not isinstance(block, dict):
        reader.fail("'model' must be an object", 'model')
    kind = block.get('kind')
    if kind in (DIFFUSION_1D, ESCAPE_3D):
        return {'kind': kind,
                'L': reader.number(block, 'L', 'model', positive=True, default=1.0),
                'D': reader.number(block, 'D', 'model', positive=True, default=1.0)}
    if kind == NETWORK:
        if 'preset' in block:
            if block['preset'] != GRID5X5:
                reader.fail(f"unknown network preset {block['preset']!r}", 'model', 'preset')
            return {'kind': kind, 'preset': GRID5X5}
        if not isinstance(block.get('matrix_file'), str):
            reader.fail("network models need a preset or a matrix_file", 'model')
        return {'kind': kind, 'matrix_file': block['matrix_file'],
                'start': reader.integer(block, 'start', 'model', minimum=0),
                'target': reader.integer(block, 'target', 'model', minimum=0)}
    if kind == TABULATED:
        points = block.get('points')
        if not isinstance(points, list) or len(points) < 2 \
                or not all(isinstance(p, list) and len(p) == 2 for p in points):
            reader.fail("tabulated points must be a list of [t, S] pairs", 'model', 'points')
        interpolation = block.get('interpolation', 'log')
        if interpolation not in ('log', 'linear'):
            reader.fail("interpolation must be 'log' or 'linear'", 'model', 'interpolation')
        out = {'kind': kind, 'points': [[float(t), float(s)] for t, s in points], 'interpolation': interpolation}
        if 'tail' in block:
            out['tail'] = _normalize_tail(reader, reader.block(block, 'tail', 'model'))
        return out
    reader.fail(f"unknown model kind {kind!r}", 'model', 'kind')


def parse_run_config(text: str) -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from e
    reader = _Reader(text)
    if not isinstance(doc, dict):
        reader.fail("the run config must be a JSON object")
    if doc.get('schema_version') != SCHEMA_VERSION:
        reader.fail(f"schema_version must be {SCHEMA_VERSION}", 'schema_version')
    experiment = doc.get('experiment')
    if experiment not in EXPERIMENTS:
        reader.fail(f"experiment must be one of {', '.join(EXPERIMENTS)}", 'experiment')

    immigration = doc.get('immigration', {'scheme': YULE})
    if not isinstance(immigration, dict):
        reader.fail("'immigration' must be an object", 'immigration')
    scheme = immigration.get('scheme')
    if scheme not in (TII, YULE):
        reader.fail(f"scheme must be {TII!r} or {YULE!r}", 'immigration', 'scheme')
    rate = _normalize_rate(reader, immigration.get('u')) if scheme == TII else None
    lam = reader.number(immigration, 'lambda', 'immigration', positive=True) if 'lambda' in immigration else None

    model = _normalize_model(reader, doc.get('model', {'kind': DIFFUSION_1D}))

    lambdas = doc.get('lambdas', [lam] if lam is not None else None)
    if not isinstance(lambdas, list) or not lambdas:
        reader.fail("'lambdas' must be a non-empty list", 'lambdas')
    lambdas = tuple(reader.number({'lambdas': v}, 'lambdas', positive=True) for v in lambdas)

    variant = doc.get('variant', LAMBERTW)
    if variant not in (STANDARD, LAMBERTW):
        reader.fail(f"variant must be {STANDARD!r} or {LAMBERTW!r}", 'variant')
    output = doc.get('output')
    if output is not None and not isinstance(output, str):
        reader.fail("'output' must be a path", 'output')
    chain_rates = doc.get('chain_rates', [])
    if not isinstance(chain_rates, list):
        reader.fail("'chain_rates' must be a list", 'chain_rates')
    diffusion = None
    if 'diffusion' in doc:
        block = reader.block(doc, 'diffusion')
        diffusion = (reader.number(block, 'L', 'diffusion', positive=True),
                     reader.number(block, 'D', 'diffusion', positive=True))

    return RunConfig(
        experiment=experiment,
        scheme=scheme,
        model=model,
        lambdas=lambdas,
        rate=rate,
        lam=lam,
        k=reader.integer(doc, 'k', minimum=1, default=1),
        replicates=reader.integer(doc, 'replicates', minimum=1, default=1000),
        seed=reader.integer(doc, 'seed', minimum=0) if 'seed' in doc else None,
        x_grid=reader.grid(doc, 'x_grid'),
        t_grid=reader.grid(doc, 't_grid'),
        output=output,
        variant=variant,
        chain_rates=tuple(reader.number({'chain_rates': v}, 'chain_rates', positive=True) for v in chain_rates),
        diffusion=diffusion,
    )


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    logger.debug("loaded run config %s", path)
    return parse_run_config(text)


def dump_run_config(cfg: RunConfig) -> str:
    doc = {'schema_version': SCHEMA_VERSION, 'experiment': cfg.experiment}
    immigration = {'scheme': cfg.scheme}
    if cfg.rate is not None:
        immigration['u'] = cfg.rate
    if cfg.lam is not None:
        immigration['lambda'] = cfg.lam
    doc['immigration'] = immigration
    fields = asdict(cfg)
    for key in ('model', 'k', 'lambdas', 'replicates', 'seed', 'x_grid', 't_grid', 'output', 'variant',
                'chain_rates'):
        value = fields[key]
        if value is None:
            continue
        doc[key] = list(value) if isinstance(value, tuple) else value
    if cfg.diffusion is not None:
        doc['diffusion'] = {'L': cfg.diffusion[0], 'D': cfg.diffusion[1]}
    return json.dumps(doc, indent=2)


# Building domain objects

def build_rate(block: Optional[dict]) -> Optional[RateFunction]:
    if block is None:
        return None
    mono = block['monomial']
    return Monomial(mono['alpha'], mono['n'])


def build_immigration(cfg: RunConfig, lam: float) -> ImmigrationSpec:
    return ImmigrationSpec(cfg.scheme, lam, build_rate(cfg.rate))


def build_model(block: dict) -> SurvivalModel:
    kind = block['kind']
    try:
        if kind == DIFFUSION_1D:
            return searchers.diffusion_1d(block['L'], block['D'])
        if kind == ESCAPE_3D:
            return searchers.escape_3d(block['L'], block['D'])
        if kind == NETWORK:
            if block.get('preset') == GRID5X5:
                return searchers.grid5x5()
            Q = searchers.load_rate_matrix(block['matrix_file'])
            return searchers.network(Q, block['start'], block['target'], label=block['matrix_file'])
        tail = None
        if 'tail' in block:
            t = block['tail']
            tail = TailAsymptotics(t['class'], t['A'], t['p'], t.get('C'))
        return searchers.tabulated(block['points'], tail, block['interpolation'])
    except FptError as e:
        raise ConfigError(f"invalid model block: {e}") from e
