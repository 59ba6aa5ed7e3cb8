"""Exception types shared across the package."""


class LafCorrectionError(Exception):
    """Base class for all errors raised by lafcorrect."""


class CoincidentCenters(LafCorrectionError):
    """Two cameras share an optical center; epipolar geometry is undefined."""


class SingularFrame(LafCorrectionError):
    """A frame matrix that must be invertible is numerically singular."""


class DegenerateConstraint(LafCorrectionError):
    """An epipolar constraint row vanishes (points at or near the epipoles)."""


class NonPositiveScale(LafCorrectionError):
    """A partial frame was given a scale that is not strictly positive."""


class InvalidPairIndex(LafCorrectionError):
    """A constraint pair references a view index outside the track."""


class DuplicatePair(LafCorrectionError):
    """The same view pair appears twice in a constraint set."""


class InsufficientConstraints(LafCorrectionError):
    """The track carries no usable constraint pairs."""


class NumericalFailure(LafCorrectionError):
    """A linear solve did not converge or returned non-finite values."""


class DegenerateConfiguration(LafCorrectionError):
    """Point correspondences do not determine a unique fundamental matrix."""


class VisibilityFailure(LafCorrectionError):
    """No valid synthetic scene was found within the retry budget."""


class SchemaError(LafCorrectionError):
    """A track document violates the expected file schema."""
