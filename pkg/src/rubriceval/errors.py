"""Exception types shared across the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(HarnessError):
    """An operation was called with inputs that violate its contract."""


class ConfigError(HarnessError):
    """Missing or inconsistent configuration."""


class RubricParseError(HarnessError):
    """Rubric source is not syntactically valid."""


class RubricValidationError(HarnessError):
    """Rubric content violates a structural invariant.

    Carries the issue list so callers can report every violation at once.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues) or "invalid rubric")


class VerdictParseError(HarnessError):
    """No JSON object could be extracted from a judge response."""


class VerdictSchemaError(HarnessError):
    """Extracted JSON does not match the expected verdict layout."""


class VerdictValueError(HarnessError):
    """A verdict value is not binary."""


class TransportError(HarnessError):
    """An HTTP call failed after bounded retries."""


class GenerationRejectedError(HarnessError):
    """The image service refused a prompt (e.g. content policy)."""


class RecordValidationError(HarnessError):
    """An annotation record violates the store's invariants."""


class DuplicateRecordError(HarnessError):
    """A human record for (source, image, rubric) already exists and no
    overwrite was requested."""
