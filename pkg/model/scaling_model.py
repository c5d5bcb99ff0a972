from dataclasses import dataclass
from typing import Optional

from errors import require

TII_POWER = 'TII_Power'
TII_EXP_STANDARD = 'TII_Exp_Standard'
TII_EXP_LAMBERTW = 'TII_Exp_LambertW'
YI_POWER = 'YI_Power'
YI_EXP = 'YI_Exp'
LARGE_N_POWER = 'LargeN_Power'
LARGE_N_EXP = 'LargeN_Exp'

GAMMA_POWER = 'GammaPower'
GAMMA_GUMBEL = 'GammaGumbel'
YULE_LOGISTIC_POWER = 'YuleLogisticPower'


@dataclass(frozen=True)
class ScalingPair:
    a: float
    b: float
    source: str

    def __post_init__(self):
        require(self.a > 0, f"scaling a must be positive, got {self.a}")

    def to_time(self, x):
        return self.a * x + self.b

    def to_scaled(self, t):
        return (t - self.b) / self.a


@dataclass(frozen=True)
class LimitLaw:
    kind: str
    k: int
    p0: Optional[float] = None

    def __post_init__(self):
        require(self.kind in (GAMMA_POWER, GAMMA_GUMBEL, YULE_LOGISTIC_POWER), f"unknown limit law {self.kind!r}")
        require(int(self.k) == self.k and self.k >= 1, "limit law index k must be a positive integer")
        if self.kind == GAMMA_POWER:
            require(self.p0 is not None and self.p0 > 0, "GammaPower needs p0 > 0")

    @property
    def lower_support(self) -> float:
        return 0.0 if self.kind == GAMMA_POWER else float('-inf')
