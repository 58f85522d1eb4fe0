"""Error types shared across the package."""


class ShapeError(ValueError):
    """Tensor extents are incompatible with the requested operation."""


class ConfigError(ValueError):
    """A configuration value violates a structural constraint."""


class InputError(ValueError):
    """Input data violates a precondition (negative intensities, extent mismatch)."""


class SamplingError(RuntimeError):
    """Patch sampling cannot proceed (e.g. an empty label class)."""


class GradError(RuntimeError):
    """Autodiff contract violation (non-scalar loss, consumed graph, missing grad)."""


class FormatError(ValueError):
    """Malformed file content; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
