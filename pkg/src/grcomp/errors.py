"""Exception hierarchy shared by the compressor, decoder and CLI."""


class GrcompError(Exception):
    """Base class for all package errors."""


class InvariantError(GrcompError):
    """An internal invariant was violated (a bug, not bad input)."""


class FramingError(InvariantError):
    """Event stream framing was violated by the writer."""


class CorruptStreamError(GrcompError):
    """The container or its event stream cannot be decoded."""


class TruncatedStreamError(CorruptStreamError):
    pass


class MirrorDivergenceError(CorruptStreamError):
    """The decoder's replayed dictionary disagrees with the stream."""


class IntegrityError(GrcompError):
    """Recovered length does not match the length recorded in the header."""
