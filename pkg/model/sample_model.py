from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PassageSampleSet:
    samples: np.ndarray
    k: int
    scheme: str
    model: str
    lam: float
    seed: int

    @property
    def replicates(self) -> int:
        return int(self.samples.size)

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def standard_error(self) -> float:
        return float(np.std(self.samples, ddof=1) / np.sqrt(self.samples.size))


@dataclass(frozen=True, eq=False)
class EcdfSummary:
    values: np.ndarray
    half_width: float
    delta: float

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True, eq=False)
class ConditionalYuleRun(PassageSampleSet):
    """Yule replicates built by conditioning on the population N(t) at a horizon.

    `samples` holds the k-th completion <= horizon, inf when fewer than k.
    """
    horizon: float
    population: np.ndarray
    initial_success: np.ndarray
    late_successes: np.ndarray

    @property
    def passages(self) -> np.ndarray:
        return self.samples

    @property
    def total_successes(self) -> np.ndarray:
        return self.late_successes + self.initial_success.astype(int)


@dataclass(frozen=True, eq=False)
class CouplingResult:
    merged: np.ndarray  # T_k over all completions of all unit streams
    first_only: np.ndarray  # k-th smallest of the per-stream first completions
    lam: int
    k: int

    @property
    def agreement(self) -> np.ndarray:
        return self.merged == self.first_only

    @property
    def expected_agreement(self) -> float:
        return float(np.prod([(self.lam - j) / self.lam for j in range(self.k)]))
