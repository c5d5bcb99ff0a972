from dataclasses import dataclass

from errors import require


@dataclass(frozen=True)
class Precision:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 100

    def __post_init__(self):
        require(self.abs_tol > 0, "abs_tol must be positive")
        require(self.rel_tol > 0, "rel_tol must be positive")
        require(self.max_iter >= 1, "max_iter must be at least 1")


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 200

    def __post_init__(self):
        require(self.abs_tol > 0 and self.rel_tol > 0, "quadrature tolerances must be positive")
        require(self.max_subdivisions >= 1, "max_subdivisions must be at least 1")

    def scaled(self, factor: float) -> "QuadratureSpec":
        # integrals multiplied by `factor` downstream need a proportionally tighter absolute tolerance
        return QuadratureSpec(self.abs_tol / max(factor, 1.0), self.rel_tol, self.max_subdivisions)


DEFAULT_PRECISION = Precision()
DEFAULT_QUADRATURE = QuadratureSpec()
