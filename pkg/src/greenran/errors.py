"""Exception types raised across the toolkit."""


class GreenRanError(Exception):
    """Base class for every toolkit error."""


class FactorizationFailure(GreenRanError):
    """The kernel-plus-noise matrix is not numerically positive definite."""


class CountExceedsGrid(GreenRanError):
    pass


class DuplicateMeasurement(GreenRanError):
    pass


class SlotMismatch(GreenRanError):
    pass


class EmptyHistory(GreenRanError):
    pass


class OutOfHorizon(GreenRanError):
    pass


class UnknownPreset(GreenRanError):
    pass


class DegenerateLikelihood(GreenRanError):
    """Posterior mass vanished; the belief and the observation disagree."""


class GapOverflow(GreenRanError):
    pass


class NoActiveCarriers(GreenRanError):
    pass


class LengthMismatch(GreenRanError):
    pass


class ConfigError(GreenRanError):
    """Invalid experiment configuration (CLI exit code 2)."""


class UnknownParameter(ConfigError):
    pass


class ParseError(GreenRanError):
    """Malformed row in an input trace file."""

    def __init__(self, row: int, message: str) -> None:
        super().__init__(f"row {row}: {message}")
        self.row = row
