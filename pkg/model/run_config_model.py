from dataclasses import dataclass, field
from typing import Optional, Tuple

from constants import LAMBERTW


@dataclass(frozen=True)
class RunConfig:
    """One experiment as read from a run-config document.

    `rate` and `model` keep their normalized JSON blocks; config.py turns them
    into RateFunction / SurvivalModel objects.
    """
    experiment: str
    scheme: str
    model: dict
    lambdas: Tuple[float, ...]
    rate: Optional[dict] = None
    lam: Optional[float] = None
    k: int = 1
    replicates: int = 1000
    seed: Optional[int] = None
    x_grid: Optional[Tuple[float, ...]] = None
    t_grid: Optional[Tuple[float, ...]] = None
    output: Optional[str] = None
    variant: str = LAMBERTW
    chain_rates: Tuple[float, ...] = field(default=())
    diffusion: Optional[Tuple[float, float]] = None
