"""Exception hierarchy for the lab.

Configuration problems map to exit code 3 / HTTP 400, numerical failures to
exit code 2 / HTTP 422.
"""

from typing import Any, Dict, Optional


class SolitonLabError(Exception):
    """Base class for every error raised by the lab."""

    exit_code = 2
    status_code = 422

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "detail": self.detail}


class ConfigError(SolitonLabError):
    """Invalid configuration, flag or request."""

    exit_code = 3
    status_code = 400


class NumericalError(SolitonLabError):
    """A numerical step failed or a checked property did not hold."""


class NoRoot(NumericalError):
    pass


class DegenerateRoot(NumericalError):
    pass


class ProfileBlowup(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass


class TailUnresolved(NumericalError):
    pass


class WrapAround(NumericalError):
    pass


class GridMismatch(NumericalError):
    pass


class SingularGram(NumericalError):
    pass


class NotOrthogonal(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NotOdd(NumericalError):
    pass


class CrossCheckFailed(NumericalError):
    pass


class NoImprovement(NumericalError):
    pass


class SingularJacobian(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class NonFinite(NumericalError):
    """Evolution produced non-finite samples; carries the partial trajectory."""

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None, trajectory: Any = None):
        super().__init__(message, detail)
        self.trajectory = trajectory


class FitLost(NumericalError):
    """Modulation fit failed after the collision; carries the last good state."""

    def __init__(self, message: str, detail: Optional[Dict[str, Any]] = None, last_state: Any = None):
        super().__init__(message, detail)
        self.last_state = last_state
