from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from constants import DIFFUSION_1D, ESCAPE_3D, NETWORK, TABULATED
from errors import require, ModelError
from model.tail_model import TailAsymptotics

MAX_NETWORK_STATES = 10_000


@dataclass(frozen=True)
class Diffusion1D:
    L: float
    D: float

    def __post_init__(self):
        require(self.L > 0 and self.D > 0, "Diffusion1D needs L > 0 and D > 0", ModelError)

    @property
    def timescale(self) -> float:
        return self.L ** 2 / (4.0 * self.D)


@dataclass(frozen=True)
class Escape3D:
    L: float
    D: float

    def __post_init__(self):
        require(self.L > 0 and self.D > 0, "Escape3D needs L > 0 and D > 0", ModelError)

    @property
    def timescale(self) -> float:
        return self.L ** 2 / (4.0 * self.D)


@dataclass(frozen=True, eq=False)
class NetworkCTMC:
    Q: np.ndarray
    start: int
    target: int

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        require(Q.ndim == 2 and Q.shape[0] == Q.shape[1], "rate matrix must be square", ModelError)
        n = Q.shape[0]
        require(n <= MAX_NETWORK_STATES, f"rate matrix has {n} states, at most {MAX_NETWORK_STATES} are supported",
                ModelError)
        require(0 <= self.start < n and 0 <= self.target < n, "start/target outside the rate matrix", ModelError)
        require(self.start != self.target, "start and target must differ", ModelError)
        off_diagonal = Q - np.diag(np.diag(Q))
        require(np.all(off_diagonal >= 0), "rate matrix has negative off-diagonal entries", ModelError)
        scale = max(1.0, float(np.abs(Q).max()))
        require(np.allclose(Q.sum(axis=1), 0.0, atol=1e-12 * scale * n), "rate matrix rows must sum to zero",
                ModelError)
        Q.setflags(write=False)
        object.__setattr__(self, 'Q', Q)

    @property
    def n_states(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Survival given on a grid of (t, S(t)) pairs.

    interpolation 'log' is linear in ln S (segments that reach S = 0 fall back
    to linear in S); 'linear' is linear in S everywhere.
    """
    times: np.ndarray
    values: np.ndarray
    interpolation: str = 'log'

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        require(times.ndim == 1 and times.shape == values.shape and times.size >= 2,
                "tabulated survival needs at least two (t, S) pairs", ModelError)
        require(times[0] == 0.0 and values[0] == 1.0, "tabulated survival must start at (0, 1)", ModelError)
        require(np.all(np.diff(times) > 0), "tabulated times must be strictly increasing", ModelError)
        require(np.all(np.diff(values) <= 0), "tabulated survival must be non-increasing", ModelError)
        require(np.all((values >= 0) & (values <= 1)), "tabulated survival must lie in [0, 1]", ModelError)
        require(self.interpolation in ('log', 'linear'), f"unknown interpolation {self.interpolation!r}", ModelError)
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)


Kind = Union[Diffusion1D, Escape3D, NetworkCTMC, Tabulated]

KIND_NAMES = {Diffusion1D: DIFFUSION_1D, Escape3D: ESCAPE_3D, NetworkCTMC: NETWORK, Tabulated: TABULATED}


@dataclass(frozen=True, eq=False)
class SurvivalModel:
    kind: Kind
    tail: Optional[TailAsymptotics] = None
    label: str = field(default='')

    @property
    def kind_name(self) -> str:
        return KIND_NAMES[type(self.kind)]

    def describe(self) -> str:
        return self.label or self.kind_name
