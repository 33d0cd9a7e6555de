"""Exception hierarchy shared across the pipeline.

Each family carries the process exit code the CLI maps it to, so command
handlers can stay generic: parse problems exit 2, validation problems 3,
planning failures 4, numerical failures 5.
"""
from __future__ import annotations


class WindplanError(Exception):
    exit_code = 1


class ParseError(WindplanError):
    """Malformed input document (JSON, PGM, CSV)."""

    exit_code = 2


class ValidationError(WindplanError):
    """Well-formed input that violates a documented invariant."""

    exit_code = 3

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class NoFluidCells(ValidationError):
    pass


class InletOnSolid(ValidationError):
    pass


class UnstableTau(ValidationError):
    """Relaxation time outside the stable BGK window (0.5, 2.0]."""

    pass


class DimensionMismatch(ValidationError):
    pass


class DegenerateGoal(ValidationError):
    pass


class EmptyLog(ValidationError):
    pass


class TooFewSamples(ValidationError):
    pass


class NoOverlap(ValidationError):
    pass


class ZeroBaseline(ValidationError):
    pass


class PlanningError(WindplanError):
    exit_code = 4


class NoPath(PlanningError):
    pass


class StartOrGoalBlocked(PlanningError):
    pass


class NumericalError(WindplanError):
    exit_code = 5


class NumericalBlowup(NumericalError):
    def __init__(self, step: int, message: str = ""):
        detail = message or "non-finite population or super-sonic velocity"
        super().__init__(f"step {step}: {detail}")
        self.step = step


class NonFiniteObjective(NumericalError):
    pass


class DivergedSimulation(NumericalError):
    def __init__(self, t: float, position):
        super().__init__(f"t={t:.3f}: position {tuple(position)} left the 2x domain box")
        self.t = t
