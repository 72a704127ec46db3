"""Exception hierarchy shared across the package."""


class EntropicOODError(Exception):
    """Base class for all package errors."""


class ShapeError(EntropicOODError, ValueError):
    """Matrix dimensions do not line up."""


class ContractError(EntropicOODError, ValueError):
    """A documented precondition was violated."""


class NumericalError(EntropicOODError, ArithmeticError):
    """A computation produced a non-finite value."""


class DataFormatError(EntropicOODError, ValueError):
    """An input file could not be parsed."""


class UnsupportedError(EntropicOODError):
    """The requested combination is not defined (e.g. MDS on a SoftMax head)."""


class ConfigError(EntropicOODError, ValueError):
    """An experiment configuration is invalid."""
