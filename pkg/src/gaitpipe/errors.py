"""Exception types raised across the pipeline."""


class GaitPipeError(Exception):
    """Base class; the CLI maps these to the data-error exit code."""


class DegenerateTracklet(GaitPipeError):
    pass


class NonMonotonicFrames(GaitPipeError):
    pass


class TooShort(GaitPipeError):
    pass


class EmptySequence(GaitPipeError):
    pass


class InvalidGraph(GaitPipeError):
    pass


class ShapeMismatch(GaitPipeError):
    pass


class NoPositive(GaitPipeError):
    pass


class InsufficientIdentities(GaitPipeError):
    pass


class EmptyGallery(GaitPipeError):
    pass


class EmptyInput(GaitPipeError):
    pass


class ParseError(GaitPipeError):
    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        self.line = line
        self.offset = offset
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", offset {offset})" if offset is not None else ")")
        super().__init__(message + where)


class ConfigError(GaitPipeError):
    pass
