"""Exception types shared across the package."""


class PrismError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(PrismError):
    """Matrix could not be factored even after the full jitter schedule."""


class DimensionMismatch(PrismError):
    pass


class EmptySet(PrismError):
    """A requested kernel block references a feature set that was not given."""


class MissingBlock(PrismError):
    """A measure needs a kernel block that was never materialized."""


class NegativeParameter(PrismError):
    pass


class AlreadySelected(PrismError):
    pass


class InstanceTooLarge(PrismError):
    """Instance exceeds the size cap of an enumeration-based routine."""


class InvalidConfig(PrismError):
    pass


class ParseError(PrismError):
    """Feature/kernel file did not parse; carries row/column position."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class DivergedLoss(PrismError):
    pass
