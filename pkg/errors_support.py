from typing import Any, Dict, Optional


class NetReconError(Exception):
    """Base class for every error raised by the reconstruction toolkit"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'details': {k: _jsonable(v) for k, v in self.details.items()},
        }


class ValidationError(NetReconError):
    exit_code = 2


class ConfigError(ValidationError):
    pass


class ModelFormatError(ValidationError):
    pass


class InsufficientDataError(ValidationError):
    pass


class NumericalError(NetReconError):
    exit_code = 3


class IllConditionedError(NumericalError):
    def __init__(self, message: str, omega: Optional[float] = None, condition: Optional[float] = None, **details: Any):
        super().__init__(message, omega=omega, condition=condition, **details)
        self.omega = omega
        self.condition = condition


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    """Raised when the splitting solver exhausts its iteration budget.

    `partial` keeps the last iterate so a sweep can keep going.
    """

    def __init__(self, message: str, partial: Any = None, **details: Any):
        super().__init__(message, **details)
        self.partial = partial


class RegionSelectionError(NumericalError):
    def __init__(self, message: str, regions=None, partial: Any = None, **details: Any):
        super().__init__(message, regions=regions or [], **details)
        self.regions = regions or []
        self.partial = partial


class GenerationError(NumericalError):
    pass


def _jsonable(value: Any) -> Any:
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    if isinstance(value, float):
        return value if value == value and abs(value) != float('inf') else str(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in value]
    if hasattr(value, 'tolist'):
        return _jsonable(value.tolist())
    return str(value)
