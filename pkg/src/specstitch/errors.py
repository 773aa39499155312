"""Exception types shared across the toolkit."""


class StitchError(Exception):
    """Base class for all toolkit errors."""


class NonPowerOfTwoLength(StitchError):
    """Fast transform requires a power-of-two length."""


class InvalidBand(StitchError):
    """Filter passband edges are inverted or degenerate."""


class InvalidWindow(StitchError):
    """Smoothing window must be odd and no larger than the bin count."""


class AllSilence(StitchError):
    """No sample exceeded the silence-crop threshold."""


class UnknownClass(StitchError):
    """Protocol class name or id is not recognized."""


class CorruptBank(StitchError):
    """Signal bank file failed magic/version/length validation."""


class MissingClass(StitchError):
    """A drawn protocol class has no entries in the signal bank."""


class ShapeMismatch(StitchError):
    """Array shapes disagree with the network or label contract."""


class DivergedLoss(StitchError):
    """Training loss became NaN."""


class ConfigMismatch(StitchError):
    """Checkpoint was written for a different network configuration."""


class CorruptCheckpoint(StitchError):
    """Checkpoint file failed magic/version/length validation."""


class ZeroFloor(StitchError):
    """Input has zero minimum smoothed power; cannot normalize."""


class InvalidGeometry(StitchError):
    """Tiling plan parameters are inconsistent."""


class ConfigError(StitchError):
    """Run configuration failed validation; message lists every violation."""
