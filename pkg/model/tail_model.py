import math
from dataclasses import dataclass
from typing import Optional

from constants import POWER_LAW, EXPONENTIAL_POWER
from errors import require


@dataclass(frozen=True)
class TailAsymptotics:
    """Short-time class of 1 - S(t).

    power:        1 - S(t) ~ A t^p
    exponential:  1 - S(t) ~ A t^p exp(-C/t)
    """
    tail_class: str
    A: float
    p: float
    C: Optional[float] = None

    def __post_init__(self):
        require(self.tail_class in (POWER_LAW, EXPONENTIAL_POWER), f"unknown tail class {self.tail_class!r}")
        require(self.A > 0, "tail amplitude A must be positive")
        if self.tail_class == POWER_LAW:
            # p = 0 covers an atom at t = 0, 1 - S(0+) = A;
            # scaling formulas that divide by p reject it themselves
            require(self.p >= 0, "power-law tails need p >= 0")
        else:
            require(self.C is not None and self.C > 0, "exponential tails need C > 0")

    @property
    def is_power(self) -> bool:
        return self.tail_class == POWER_LAW

    def log_value(self, t: float) -> float:
        """ln of the leading short-time term, A t^p (times e^{-C/t})."""
        value = math.log(self.A) + self.p * math.log(t)
        if not self.is_power:
            value -= self.C / t
        return value


@dataclass(frozen=True)
class EffectiveTail(TailAsymptotics):
    """Short-time behaviour of I(t): A0 t^p0 (times e^{-C0/t})."""

    @property
    def A0(self) -> float:
        return self.A

    @property
    def p0(self) -> float:
        return self.p

    @property
    def C0(self) -> Optional[float]:
        return self.C
