"""Exception hierarchy shared by every module."""


class SubnetSARError(Exception):
    """Base class for all package errors."""


class ParseError(SubnetSARError, ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(SubnetSARError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(SubnetSARError, ValueError):
    """Inconsistent or incomplete configuration."""


class DegenerateDataError(SubnetSARError, ArithmeticError):
    """The response vector carries no information (e.g. all zeros)."""


class SingularityError(SubnetSARError, ArithmeticError):
    """``I - rho W`` is singular or numerically close to it."""


class DegenerateCurvatureError(SubnetSARError, ArithmeticError):
    """Curvature of the profiled likelihood is too small to invert."""


class FitError(SubnetSARError, RuntimeError):
    """The likelihood could not be maximised."""


class BootstrapError(SubnetSARError, RuntimeError):
    """Too few bootstrap replicates succeeded."""
