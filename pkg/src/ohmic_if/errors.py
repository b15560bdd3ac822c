"""Exception hierarchy shared by every module of the package."""


class OhmicIFError(Exception):
    """Base class for all package errors."""


class ParameterError(OhmicIFError, ValueError):
    """Physical or numerical parameters outside the admissible range."""


class ContractError(OhmicIFError, ValueError):
    """Inputs violate a structural precondition (shapes, hermiticity, ...)."""


class NumericalError(OhmicIFError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class ResourceError(OhmicIFError, MemoryError):
    """The requested object would exceed the configured resource budget."""


class ConfigError(OhmicIFError, ValueError):
    """Invalid, missing or contradictory configuration entries."""
