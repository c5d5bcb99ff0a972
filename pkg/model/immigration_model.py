import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

from constants import TII, YULE
from errors import require


@dataclass(frozen=True)
class Monomial:
    """u(t) = alpha * t^n."""
    alpha: float = 1.0
    n: int = 0

    def __post_init__(self):
        require(self.alpha > 0, "monomial amplitude must be positive")
        require(int(self.n) == self.n and self.n >= 0, "monomial degree must be a non-negative integer")

    def __call__(self, t):
        return self.alpha * t ** self.n


@dataclass(frozen=True, eq=False)
class Generic:
    """Arbitrary rate u(t) >= 0 with a piecewise-constant envelope.

    envelope: (start, end, bound) windows partitioning [0, end_last); the
    sampler thins against `bound` on each window.
    """
    rate: Callable[[float], float]
    envelope: Sequence[Tuple[float, float, float]] = ()

    def __post_init__(self):
        previous_end = 0.0
        for start, end, bound in self.envelope:
            require(start == previous_end, "envelope windows must be contiguous from 0")
            require(end > start, "envelope windows must have positive length")
            require(bound >= 0, "envelope bounds must be non-negative")
            previous_end = end

    def __call__(self, t):
        return self.rate(t)

    @property
    def horizon(self) -> float:
        return self.envelope[-1][1] if self.envelope else 0.0

    def bound_on(self, t: float) -> Optional[Tuple[float, float, float]]:
        for window in self.envelope:
            if window[0] <= t < window[1]:
                return window
        return None


RateFunction = Union[Monomial, Generic]


@dataclass(frozen=True, eq=False)
class ImmigrationSpec:
    scheme: str
    lam: float
    u: Optional[RateFunction] = None

    def __post_init__(self):
        require(self.scheme in (TII, YULE), f"unknown immigration scheme {self.scheme!r}")
        require(self.lam > 0 and math.isfinite(self.lam), "immigration rate lambda must be positive")
        if self.scheme == TII:
            require(self.u is not None, "time-inhomogeneous immigration needs a rate function u")

    @property
    def is_tii(self) -> bool:
        return self.scheme == TII

    def with_rate(self, lam: float) -> "ImmigrationSpec":
        return ImmigrationSpec(self.scheme, lam, self.u)


def tii(lam: float, u: RateFunction = Monomial()) -> ImmigrationSpec:
    return ImmigrationSpec(TII, lam, u)


def yule(lam: float) -> ImmigrationSpec:
    return ImmigrationSpec(YULE, lam)
