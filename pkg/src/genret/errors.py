"""Exception types shared across the package."""


class GenretError(Exception):
    """Base class for all package errors."""


class ParseError(GenretError):
    """Malformed input record; carries the 1-based line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ContractViolation(GenretError):
    """A precondition of an operation was not met."""


class ConfigError(GenretError):
    """Unknown or inconsistent configuration value."""


class ConsistencyError(GenretError):
    """Cross-artifact mismatch (e.g. unknown docid for a fragment)."""


class DependencyError(GenretError):
    """A required artifact (file, index, checkpoint) is missing."""


class TrainingDiverged(GenretError):
    """Loss became non-finite; training was aborted."""
