"""Exception hierarchy shared across the pipeline."""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(PipelineError):
    """Rect/image/mask dimensions are inconsistent or out of bounds."""


class ConfigError(PipelineError):
    """Invalid configuration value."""


class NumericError(PipelineError):
    """Degenerate numeric input (e.g. zero vector in a cosine)."""


class ManifestError(PipelineError):
    """Dataset manifest failed to load, validate, or save."""


class ProtocolError(PipelineError):
    """A backend response violated the wire contract."""


class TransportError(PipelineError):
    """A backend request failed at the transport level after retries."""


class RemoteBackendError(PipelineError):
    """A backend returned a non-success status with an error envelope."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
