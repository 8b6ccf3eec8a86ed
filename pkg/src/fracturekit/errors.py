"""Exception types shared across the package."""


class FractureKitError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FractureKitError, ValueError):
    """An argument violates a documented precondition."""


class DecodeError(FractureKitError, ValueError):
    """Malformed or truncated image payload.

    ``offset`` is the byte position at which decoding failed, when known.
    """

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class DegenerateHistogramError(FractureKitError, ValueError):
    """Otsu threshold undefined: the image has a single intensity value."""


class ModelFormatError(FractureKitError, ValueError):
    """Model file failed validation; the message names the failed check."""


class DivergedError(FractureKitError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
