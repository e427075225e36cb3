class LexiError(Exception):
    """Base class for codec failures on malformed or unsupported data."""


class CorruptStreamError(LexiError):
    pass


class FramingError(CorruptStreamError):
    pass


class ContainerError(LexiError):
    pass


class UnsupportedVersionError(ContainerError):
    pass
