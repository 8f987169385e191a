"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, data
problems exit 2, and failed runs exit 3.
"""


class CrbmTwinsError(Exception):
    """Base class for all package errors."""


class ConfigError(CrbmTwinsError):
    """Invalid or inconsistent configuration."""


class DataError(CrbmTwinsError):
    """Input data does not satisfy the declared schema."""


class SchemaError(DataError):
    """The data layout does not match the schema (unknown columns, etc.)."""


class ValidationError(DataError):
    """A value lies outside the domain of its variable."""

    def __init__(self, message, subject_id=None, variable=None, month=None):
        self.subject_id = subject_id
        self.variable = variable
        self.month = month
        where = []
        if subject_id is not None:
            where.append(f"subject={subject_id}")
        if variable is not None:
            where.append(f"variable={variable}")
        if month is not None:
            where.append(f"month={month}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class DomainError(DataError):
    """A transform or domain function received an argument outside its domain."""


class FitError(DataError):
    """Normalizers could not be fitted (e.g. zero variance)."""


class RunFailure(CrbmTwinsError):
    """A training or generation run failed."""


class TrainingDiverged(RunFailure):
    """Parameters became non-finite during training."""


class ModelFormatError(CrbmTwinsError):
    """Model file is corrupt or malformed."""


class UnsupportedVersionError(ModelFormatError):
    """Model file was written with an unsupported format version."""


class CompatibilityError(DataError):
    """Model and data were built from different schemas."""
