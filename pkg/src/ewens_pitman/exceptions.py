"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a special function or pmf."""


class ParameterError(ValueError):
    """Model parameters are invalid, or outside the regime an operation needs."""


class SingularityError(ArithmeticError):
    """A product or ratio hit a zero denominator."""


class SamplerOverflowError(OverflowError):
    """A Sibuya draw exceeded the inverse-CDF search cap."""


class IngestError(ValueError):
    """A frequency-of-frequencies file could not be parsed."""
