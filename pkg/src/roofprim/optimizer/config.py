from __future__ import annotations

from dataclasses import dataclass, field, fields

from ..errors import InvalidParameterError


@dataclass(frozen=True)
class OptimizerConfig:
    """Controls for the fitting engine.

    ``beta`` weighs the footprint term against mean point-surface distance;
    ``fd_step`` is the relative central-difference step, scaled per
    coordinate by ``max(|x_i|, 1)``. When ``coarse_fd_step`` is non-zero a
    first pass runs with that larger step, which sees past the small kinks
    of the objective, and the fine pass starts from its result. Each pass
    gets up to ``max_iterations``.
    """

    memory_pairs: int = 10
    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    fd_step: float = 1e-8
    coarse_fd_step: float = 1e-4
    beta: float = 10.0
    relative_decrease: float = 1e-10

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("beta", "coarse_fd_step"):
                if not value >= 0:
                    raise InvalidParameterError(f.name, "must be non-negative")
            elif not value > 0:
                raise InvalidParameterError(f.name, "must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "OptimizerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InvalidParameterError(sorted(unknown)[0], "unknown optimizer setting")
        return cls(**values)


@dataclass(frozen=True)
class CostBreakdown:
    j1: float
    j2: float
    beta: float
    j: float

    @classmethod
    def combine(cls, j1: float, j2: float, beta: float) -> "CostBreakdown":
        return cls(j1, j2, beta, j1 + beta * j2)

    def as_dict(self) -> dict:
        return {"j1": self.j1, "j2": self.j2, "beta": self.beta, "j": self.j}


@dataclass
class FitResult:
    primitive: object
    cost: CostBreakdown
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    message: str = ""
    evaluations: int = 0
    score: float = float("nan")
