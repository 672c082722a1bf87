"""Exception hierarchy shared across the harness."""


class ReduceMTError(Exception):
    """Base class for all harness errors."""


class InputDomainError(ReduceMTError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class GuidelineViolation(InputDomainError):
    """A transformation parameter breaks its reduction guideline."""


class ConfigError(ReduceMTError, ValueError):
    """Invalid or inconsistent run configuration."""


class AdapterError(ReduceMTError):
    """An external model endpoint failed or answered with a malformed payload.

    ``payload`` carries the raw response (or ``None`` when nothing arrived).
    """

    def __init__(self, message: str, payload: object = None, role: str | None = None):
        super().__init__(message)
        self.payload = payload
        self.role = role


class ArtifactError(ReduceMTError):
    """A run directory is missing files needed by a post-hoc command."""


class TransientAdapterError(AdapterError):
    """Timeout or transport failure; the request may be retried."""
