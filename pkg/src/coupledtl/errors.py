"""Exception hierarchy.

The CLI maps each family to an exit code: :class:`DataError` -> 2,
:class:`NumericalError` -> 3. Usage errors are handled by the argument parser.
"""


class CoupledTLError(Exception):
    """Base class for all package errors."""


class DataError(CoupledTLError, ValueError):
    """Input data is malformed, inconsistent, or has the wrong shape."""


class ShapeError(DataError):
    pass


class InvalidBudgetError(DataError):
    pass


class UnsupportedDirectionError(DataError):
    pass


class ParseError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class MalformedHeaderError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class DimensionOverflowError(DataError):
    pass


class ManifestError(DataError):
    pass


class ConfigError(DataError):
    pass


class NumericalError(CoupledTLError, ArithmeticError):
    """A numerical sub-problem could not be solved."""


class SingularInputError(NumericalError):
    pass


class InfeasibleSpecError(NumericalError):
    pass
