"""Exception and warning types raised across the package."""


class SinghypError(Exception):
    """Base class for all errors raised by singhyp."""


class DomainError(SinghypError, ValueError):
    """Arguments outside the mathematical domain of an operation."""


class DegenerateForm(SinghypError):
    pass


class NotIndefinite(SinghypError):
    pass


class NotSeparatedSpectrum(SinghypError):
    """L L^+ has non-real or non-positive eigenvalues."""


class DegenerateEigenvector(SinghypError):
    """An eigenvector of the J-symmetric factor lies on the zero cone."""


class PreconditionFailed(SinghypError):
    pass


class SamplingError(SinghypError):
    pass


class Escape(SinghypError):
    """Trajectory left the ball of radius 1e8."""


class StiffnessError(SinghypError):
    """Adaptive step size underflowed."""


class NonInvariantSubbundle(SinghypError):
    pass


class NoGap(SinghypError):
    """No usable gap in the Lyapunov spectrum at the requested cut."""


class FieldNotNonNegative(SinghypError):
    pass


class DegenerateInput(UserWarning):
    """Linearly dependent vectors were wedged together."""
