"""Exception hierarchy shared across the package."""


class LayerVecError(Exception):
    """Base class for all package errors."""


class GeometryError(LayerVecError):
    """Invalid geometric input (degenerate curve, open polygon, bad parameter)."""


class FormatError(LayerVecError):
    """Malformed external input: mask stacks, config files, documents."""


class SvgParseError(FormatError):
    """SVG text could not be parsed.

    ``offset`` is the byte offset of the failure inside the path-data string
    (or -1 when the failure is structural rather than inside path data).
    """

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message)
        self.offset = offset


class SvgWriteError(FormatError):
    """Document cannot be serialized (e.g. non-finite coordinates)."""


class RenderError(LayerVecError):
    """Rasterization rejected: shape mismatch, bad layer index."""


class EditError(LayerVecError):
    """Edit operation rejected: unknown target, bad payload, singular transform."""


class NumericError(LayerVecError):
    """Numeric failure during optimization or sampling (NaN/Inf state)."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
