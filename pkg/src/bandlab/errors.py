"""Exception hierarchy shared by the numerical and CLI layers."""


class BandlabError(Exception):
    """Base class for all errors raised by this package."""


class NearSingular(BandlabError, ArithmeticError):
    """A symmetric factorization hit a pivot below the relative floor."""

    def __init__(self, message, pivot=None, scale=None):
        super().__init__(message)
        self.pivot = pivot
        self.scale = scale


class DomainError(BandlabError, ValueError):
    pass


class IntegrabilityError(BandlabError, ValueError):
    """The unnormalized density exp(-phi) is not integrable on (0, inf)."""


class DegenerateFit(BandlabError, ValueError):
    pass


class ConfigError(BandlabError, ValueError):
    """Invalid experiment configuration.

    ``field`` names the offending key and ``line`` the line of a JSON syntax
    error, when known.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self):
        parts = []
        if self.field is not None:
            parts.append(f"field={self.field}")
        if self.line is not None:
            parts.append(f"line={self.line}")
        msg = super().__str__()
        return " ".join(parts + [msg]) if parts else msg


class ExclusionRateExceeded(BandlabError, RuntimeError):
    pass
