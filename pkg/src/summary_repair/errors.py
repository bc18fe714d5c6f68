"""Exception types shared across the harness.

Two broad severities: errors that abort a whole run (configuration,
environment, store corruption) and errors that are recorded against a
single task and skipped (provider failures). The pipeline decides which
is which; these classes just give it the vocabulary.
"""


class HarnessError(Exception):
    """Base class for every error raised by this package."""


class LoadError(HarnessError):
    """A dataset or fixtures file could not be read or parsed."""


class DatasetValidationError(HarnessError):
    """Loaded data violates a structural requirement (count, field, id)."""


class TemplateNotFoundError(HarnessError):
    """Requested prompt template name is not registered."""


class TemplateOverrideError(HarnessError):
    """Attempt to override a protected prompt template without the flag."""


class RenderError(HarnessError):
    """Prompt rendering failed (missing or empty binding)."""


class ProviderError(HarnessError):
    """A model call failed after retries; recorded per task, run continues."""


class ConfigurationError(HarnessError):
    """Bad credentials, flags, or request shape; aborts the run."""


class SandboxEnvironmentError(HarnessError):
    """The execution environment is unusable (missing interpreter or shim)."""


class StoreError(HarnessError):
    """Run store I/O or integrity failure."""


class DuplicateRecordError(StoreError):
    """A record with the same (task, model, method, phase) key exists."""


class RunNotFoundError(StoreError):
    """No run directory for the given run id."""


class CompletenessError(HarnessError):
    """A report was requested over an incomplete or inconsistent run."""


class UndefinedMetricError(HarnessError):
    """Metric has no value (zero denominator); rendered as '--'."""


class UnsupportedProtocolError(HarnessError):
    """Operation is not defined for this experiment protocol."""


class FetchError(HarnessError):
    """Dataset download failed or produced an unexpected record count."""
