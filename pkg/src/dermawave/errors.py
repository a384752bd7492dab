"""Exception and warning types shared across the package."""


class DermawaveError(Exception):
    """Base class for all package errors."""


class DomainError(DermawaveError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class CompositionError(DermawaveError, ValueError):
    """Volume fractions do not describe a valid mixture."""


class SingularityError(DermawaveError, ArithmeticError):
    """A denominator vanished in a mixing or scattering formula."""


class CatalogError(DermawaveError, KeyError):
    """Unknown identifier requested from a catalog."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CatalogReadError(DermawaveError, OSError):
    """A catalog file could not be read."""


class CatalogValidationError(DermawaveError, ValueError):
    """A catalog file failed to parse or violates one or more invariants.

    ``issues`` holds every problem found, one string per offending field.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("invalid catalog:\n  " + "\n  ".join(self.issues))


class FrequencyRangeWarning(UserWarning):
    """Frequency outside the 100 GHz - 1 THz band the parameters are valid for."""
