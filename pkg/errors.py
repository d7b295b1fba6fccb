"""Exception types raised by the SheetLoc library."""


class SheetLocError(Exception):
    """Root of every error the library raises on purpose."""


class InvalidParameter(SheetLocError, ValueError):
    """A precondition on an argument does not hold."""


class InvalidTransform(SheetLocError, ValueError):
    """Rotation is not orthonormal with determinant +1."""


class TooFewPoints(SheetLocError):
    pass


class EmptyCloud(SheetLocError):
    pass


class MissingChannel(SheetLocError):
    """A filter needs a channel (normals, intensities) the cloud does not carry."""

    def __init__(self, channel):
        super().__init__(f"point cloud has no '{channel}' channel")
        self.channel = channel


class ParseError(SheetLocError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingCoordinateProperty(ParseError):
    pass


class WrongImageKind(SheetLocError):
    pass


class DegeneratePolygon(SheetLocError):
    pass


class EmptyScene(SheetLocError):
    pass


class NoCorrespondences(SheetLocError):
    pass


class InsufficientDepthPixels(SheetLocError):
    pass


class BeaconCountMismatch(SheetLocError):
    pass


class AmbiguousLabelling(SheetLocError):
    pass


class DegenerateGeometry(SheetLocError):
    pass


class InsufficientMotion(SheetLocError):
    pass


class TooFewSamples(SheetLocError):
    pass


class ModelCacheVersionError(SheetLocError):
    pass


class ConfigValidationError(SheetLocError):
    """Pipeline config failed validation; `stage` names the offending stage if any."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
