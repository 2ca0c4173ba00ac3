"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Layer widths, vector lengths or network endpoints do not line up."""


class ParseError(ValueError):
    """A serialized network payload is malformed."""


class CapabilityError(RuntimeError):
    """The requested operation needs data the problem does not carry."""


class ResourceError(RuntimeError):
    """A computation would exceed a configured evaluation or parameter cap."""
