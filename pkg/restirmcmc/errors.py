"""
Error handling for restirmcmc.

All errors inherit from RestirMcmcError for easy catching.
"""
import math
from typing import Callable, Iterable, Optional, TypeVar

T = TypeVar("T")


class RestirMcmcError(Exception):
    """Base exception for all restirmcmc errors."""

    def __init__(self, message: str, error_code: str = "UNKNOWN", details: Optional[str] = None):
        """
        Initialize error.

        Args:
            message: User-friendly error message
            error_code: Machine-readable error code (e.g., "CONFIG_ERROR")
            details: Optional technical details for debugging
        """
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details

    def __str__(self) -> str:
        """Return formatted error message."""
        msg = f"[{self.error_code}] {self.message}"
        if self.details:
            msg += f"\nDetails: {self.details}"
        return msg


class RejectedInputError(RestirMcmcError):
    """A resampling weight was negative or not finite."""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message, "REJECTED_INPUT", details)


class ContractViolationError(RestirMcmcError):
    """A precondition of a sampling routine does not hold."""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message, "CONTRACT_VIOLATION", details)


class ConfigError(RestirMcmcError):
    """Error in configuration."""

    def __init__(self, message: str, config_key: Optional[str] = None, details: Optional[str] = None):
        super().__init__(message, "CONFIG_ERROR", details)
        self.config_key = config_key


class InvalidValueError(ConfigError):
    """A configuration value is out of its valid range."""

    def __init__(self, config_key: str, value, expected: str):
        super().__init__(
            f"Invalid value for '{config_key}': {value!r}",
            config_key,
            f"Expected {expected}",
        )
        self.value = value


class UnknownConfigKeyError(ConfigError):
    """Configuration contains a key that is not part of the schema."""

    def __init__(self, config_key: str, valid_keys: Iterable[str] = ()):
        valid = sorted(valid_keys)
        super().__init__(
            f"Unknown configuration key: '{config_key}'",
            config_key,
            f"Valid keys: {', '.join(valid)}" if valid else None,
        )


class MissingSceneError(ConfigError):
    """Scene file referenced by the configuration does not exist."""

    def __init__(self, path: str):
        super().__init__(
            f"Scene file not found: {path}",
            "render.scene",
            "Use a builtin scene name (glossy_box, narrow_slot, low_light_slice, glossy_floor) "
            "or an existing JSON file",
        )
        self.path = path


class SceneError(RestirMcmcError):
    """Scene description is malformed."""

    def __init__(self, message: str, details: Optional[str] = None):
        super().__init__(message, "SCENE_ERROR", details)


class FileError(RestirMcmcError):
    """Error reading or writing a file."""

    def __init__(self, message: str, filepath: Optional[str] = None, details: Optional[str] = None):
        super().__init__(message, "FILE_ERROR", details)
        self.filepath = filepath


class FileNotReadableError(FileError):
    """Cannot read file (permissions, missing, etc)."""

    def __init__(self, filepath: str, reason: Optional[str] = None):
        super().__init__(
            f"Cannot read file: {filepath}",
            filepath,
            f"Reason: {reason or 'Unknown (check permissions and file format)'}",
        )


class ImageFormatError(FileError):
    """Image file does not follow the PPM/PFM layout."""

    def __init__(self, filepath: str, reason: str):
        super().__init__(f"Malformed image file: {filepath}", filepath, reason)


class DimensionMismatchError(RestirMcmcError):
    """Two arrays that must share a shape do not."""

    def __init__(self, expected, actual):
        super().__init__(
            f"Dimension mismatch: expected {tuple(expected)}, got {tuple(actual)}",
            "DIMENSION_MISMATCH",
        )
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class OracleFailureError(RestirMcmcError):
    """Deterministic quadrature oracle did not converge."""

    def __init__(self, intervals: int, last_delta: float):
        super().__init__(
            f"Quadrature did not converge after {intervals} intervals",
            "ORACLE_FAILURE",
            f"Last relative change between refinements: {last_delta:.3e}",
        )
        self.intervals = intervals


class GateFailureError(RestirMcmcError):
    """A statistical acceptance gate failed."""

    def __init__(self, gate: str, details: Optional[str] = None):
        super().__init__(f"Gate failed: {gate}", "GATE_FAILURE", details)
        self.gate = gate


class ErrorHandler:
    """Centralized validation helpers shared by config, scene and metrics code."""

    @staticmethod
    def handle_file_operation(func: Callable[[], T], filepath: str, operation: str = "read") -> T:
        """
        Safely execute file operation with proper error handling.

        Args:
            func: Function to execute
            filepath: File being operated on
            operation: Operation name for error messages

        Returns:
            Result of func() or raises appropriate error
        """
        try:
            return func()
        except FileNotFoundError:
            raise FileNotReadableError(filepath, "File not found")
        except PermissionError:
            raise FileNotReadableError(filepath, "Permission denied")
        except UnicodeDecodeError:
            raise FileNotReadableError(filepath, "Not valid UTF-8")
        except OSError as e:
            raise FileError(f"Error during {operation}: {e}", filepath, str(e))

    @staticmethod
    def validate_range(key: str, value, low: Optional[float] = None, high: Optional[float] = None,
                       integer: bool = False, low_inclusive: bool = True) -> float:
        """
        Validate that a numeric config value lies in [low, high].

        Raises:
            InvalidValueError: If value is not a finite number in range
        """
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidValueError(key, value, "a number")
        if integer and not float(value).is_integer():
            raise InvalidValueError(key, value, "an integer")
        if not math.isfinite(value):
            raise InvalidValueError(key, value, "a finite number")
        if low is not None and (value < low or (not low_inclusive and value == low)):
            bound = ">=" if low_inclusive else ">"
            raise InvalidValueError(key, value, f"a value {bound} {low}")
        if high is not None and value > high:
            raise InvalidValueError(key, value, f"a value <= {high}")
        return int(value) if integer else float(value)

    @staticmethod
    def validate_choice(key: str, value: str, valid: Iterable[str]) -> str:
        """Validate that value is one of the valid names."""
        options = list(valid)
        if value not in options:
            raise InvalidValueError(key, value, f"one of: {', '.join(options)}")
        return value
