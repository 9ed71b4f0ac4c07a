"""Exception and warning types shared across the toolkit."""


class FadkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(FadkitError):
    """A file does not conform to one of the on-disk formats."""


class ValidationError(FadkitError):
    """Input data violates a documented invariant or precondition."""


class NumericalError(FadkitError):
    """A numerical routine broke down beyond its documented tolerance."""


class FadkitWarning(UserWarning):
    """Non-fatal condition worth surfacing (small samples, clamped values)."""
