"""Exception hierarchy shared across the pipeline."""


class EdgeQCError(Exception):
    """Base class for all pipeline errors."""


class DimensionMismatchError(EdgeQCError):
    """Input vector length does not match the model/manifest dimension."""


class EmptyMemoryError(EdgeQCError):
    """Operation requires a non-empty prototype memory."""


class EmptyBatchError(EdgeQCError):
    """Operation requires a non-empty sample batch."""


class EmptyInputError(EdgeQCError):
    """Operation requires a non-empty input collection."""


class RehearsalUnavailableError(EdgeQCError):
    """Rehearsal requested (ratio > 0) but the prototype memory is empty."""


class ProtocolError(EdgeQCError):
    """Malformed wire-protocol line; carries the offending field name."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownBatchError(EdgeQCError):
    """Batch id not present in the ingest session."""


class ServiceUnavailableError(EdgeQCError):
    """No model loaded; the service cannot predict."""


class StaleModelError(EdgeQCError):
    """Attempted swap to a model version that is not newer than the active one."""


class NotFoundError(EdgeQCError):
    """Referenced entity (sample, run, artifact) does not exist."""


class ConflictError(EdgeQCError):
    """Write rejected: would overwrite or duplicate an existing record."""


class PreconditionError(EdgeQCError):
    """Operation precondition not met (e.g. acknowledging an unlatched alarm)."""


class ImmutableRunError(EdgeQCError):
    """Write attempted against a finished or failed run."""


class StorageError(EdgeQCError):
    """Registry I/O failure."""


class GridSpecError(EdgeQCError):
    """Invalid covariate grid specification."""


class ConfigError(EdgeQCError):
    """Invalid or unresolvable pipeline configuration."""
