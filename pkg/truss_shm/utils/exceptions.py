from typing import Any, Optional


class TrussShmError(Exception):
    """Base class for every error raised deliberately by truss-shm."""

    exit_code = 3


class UsageError(TrussShmError):
    """Raised when the command line cannot be understood."""

    exit_code = 1

    def __init__(self, message: str, suggestion: Optional[str] = None, usage: Optional[str] = None):
        super().__init__(message)
        self.suggestion = suggestion
        self.usage = usage


class DataError(TrussShmError):
    """Raised when an input file, model or value is invalid."""

    exit_code = 2


class ModelValidationError(DataError):
    """Raised when a truss model violates one of its structural invariants."""

    pass


class UnknownBarError(ModelValidationError):
    """Raised when a bar id does not exist in the model."""

    def __init__(self, bar_id: Any):
        super().__init__(f"Unknown bar id {bar_id!r}.")
        self.bar_id = bar_id


class InvalidDamageError(DataError):
    """Raised when a damage fraction lies outside [0, 1)."""

    def __init__(self, bar_id: int, fraction: float):
        super().__init__(f"Damage {fraction!r} on bar {bar_id} is outside [0, 1).")
        self.bar_id = bar_id
        self.fraction = fraction


class ScenarioError(DataError):
    """Raised when a damage scenario is malformed, off the grid or absent from a database."""

    pass


class DimensionMismatchError(DataError):
    """Raised when two modal signatures (or a signature and its weights) do not have the same shape."""

    pass


class InvalidParameterError(DataError):
    """Raised when an optimizer, noise or experiment parameter is out of range."""

    pass


class DatabaseFormatError(DataError):
    """Raised when a database file cannot be parsed."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class DatabaseVersionError(DataError):
    """Raised when a database file was written with an unsupported schema version."""

    def __init__(self, found: Any, expected: int):
        super().__init__(f"Database schema version {found!r} is not supported (expected {expected}).")
        self.found = found
        self.expected = expected


class FingerprintMismatchError(DataError):
    """Raised when a database was built from a different model than the one supplied."""

    def __init__(self, database_fingerprint: str, model_fingerprint: str):
        super().__init__(
            f"Database was built for model {database_fingerprint[:12]}, "
            f"but the supplied model is {model_fingerprint[:12]}. Use --force to override."
        )
        self.database_fingerprint = database_fingerprint
        self.model_fingerprint = model_fingerprint


class ConfigError(DataError):
    """Raised when a configuration file is malformed or holds invalid values."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class NumericalError(TrussShmError):
    """Raised when a numerical procedure fails."""

    exit_code = 3


class CholeskyError(NumericalError):
    """Raised when the mass matrix is not positive definite."""

    pass


class ConvergenceError(NumericalError):
    """Raised when the Jacobi eigen iteration exceeds its sweep cap."""

    def __init__(self, sweeps: int, off_norm: float):
        super().__init__(f"Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:.3e}).")
        self.sweeps = sweeps
        self.off_norm = off_norm


class MechanismError(NumericalError):
    """Raised when the restrained stiffness matrix is singular, i.e. the truss is a mechanism."""

    pass


class ScenarioBuildError(NumericalError):
    """Raised when computing the signature of one database scenario fails."""

    def __init__(self, scenario: Any, error: NumericalError):
        super().__init__(f"Scenario {scenario} failed: {error}")
        self.scenario = scenario
        self.error = error
