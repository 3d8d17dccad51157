# src/qadvlab/errors.py
from __future__ import annotations

from typing import Iterable, List


class QAdvLabError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class InputError(QAdvLabError):
    """Bad input, violated precondition or invalid configuration."""

    exit_code = 1


class NumericalFailure(QAdvLabError):
    """A computation produced something it should never produce."""

    exit_code = 2


class ConfigError(InputError):
    pass


class DomainError(InputError):
    pass


class DimensionCapExceeded(InputError):
    pass


class UnsupportedOrder(InputError):
    pass


class _Violation(InputError):
    invariant = "invariant"

    def __init__(self, magnitude: float, detail: str = "") -> None:
        self.magnitude = float(magnitude)
        msg = f"{self.invariant} violated by {self.magnitude:.3e}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class HermiticityViolation(_Violation):
    invariant = "hermiticity"


class TraceViolation(_Violation):
    invariant = "unit trace"


class PsdViolation(_Violation):
    invariant = "positive semi-definiteness"


class AssumptionViolation(InputError):
    """Some dataset states have minimum eigenvalue below the attack radius."""

    def __init__(self, indices: Iterable[int], epsilon: float) -> None:
        self.indices: List[int] = [int(i) for i in indices]
        self.epsilon = float(epsilon)
        shown = ", ".join(str(i) for i in self.indices[:20])
        more = "" if len(self.indices) <= 20 else f" (+{len(self.indices) - 20} more)"
        super().__init__(
            f"minimum eigenvalue below epsilon={self.epsilon:g} for samples [{shown}]{more}"
        )


class DivergenceError(NumericalFailure):
    pass


class NegativeSpectrumError(NumericalFailure):
    pass
