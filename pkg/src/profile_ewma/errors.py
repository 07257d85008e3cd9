"""Exception hierarchy shared by every module."""


class ProfileError(ValueError):
    """Base class for invalid inputs to the monitoring scheme."""


class DegenerateDesign(ProfileError):
    """The design points have zero spread (s_xx == 0) or too few points."""


class DimensionMismatch(ProfileError):
    """Array shapes disagree with the model (n design points, p responses)."""


class NotPositiveDefinite(ProfileError):
    """A covariance matrix failed its Cholesky factorization."""


class IndexOutOfRange(IndexError):
    """A design-point index outside 0..n-1."""


class NoBracket(RuntimeError):
    """Calibration could not bracket the target ARL within the allowed limits."""
