"""Exception hierarchy.

Every error raised on bad input derives from :class:`ScatIrisError` (and
``ValueError`` where the problem is a bad value), so callers can catch the
whole family at once. :class:`InvariantViolation` is reserved for internal
consistency failures; the CLI maps it to exit status 2.
"""


class ScatIrisError(Exception):
    """Base class for input-level errors."""


class InvariantViolation(RuntimeError):
    """An internal invariant did not hold."""


# corpus
class UnsupportedFormat(ScatIrisError, ValueError):
    pass


class CorruptImage(ScatIrisError, ValueError):
    pass


class IncompatibleTarget(ScatIrisError, ValueError):
    pass


class TooFewImages(ScatIrisError, ValueError):
    pass


class ManifestError(ScatIrisError, ValueError):
    pass


# scattering
class IncompatibleSize(ScatIrisError, ValueError):
    pass


class SizeMismatch(ScatIrisError, ValueError):
    pass


# texture
class InvalidLevels(ScatIrisError, ValueError):
    pass


class OffsetTooLarge(ScatIrisError, ValueError):
    pass


class EmptyCooccurrence(ScatIrisError, ValueError):
    pass


class IncompatibleGrid(ScatIrisError, ValueError):
    pass


# features
class DimensionMismatch(ScatIrisError, ValueError):
    pass


class TooFewSamples(ScatIrisError, ValueError):
    pass


class BadK(ScatIrisError, ValueError):
    pass


class DegenerateSpectrum(ScatIrisError, ValueError):
    pass


class FormatError(ScatIrisError, ValueError):
    """A serialized artifact could not be decoded."""


# matcher
class FingerprintMismatch(ScatIrisError, ValueError):
    pass


class EmptyGallery(ScatIrisError, ValueError):
    pass


class EmptyProbeSet(ScatIrisError, ValueError):
    pass
