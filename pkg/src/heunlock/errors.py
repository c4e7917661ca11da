"""Exception types shared across the package."""


class HeunlockError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(HeunlockError, ValueError):
    """A physical or derived parameter violates its domain constraints."""


class NearPoleError(HeunlockError):
    """A denominator fell below the singularity floor on the raw path.

    Carries the offending index and the magnitude that tripped the floor so
    callers can switch to the regularized (prefactor-multiplied) evaluation.
    """

    def __init__(self, index, magnitude, what="Z"):
        self.index = index
        self.magnitude = magnitude
        self.what = what
        super().__init__(
            f"|{what}_{index}| = {magnitude:.3e} is below the singularity floor; "
            "use the regularized evaluation path"
        )


class TruncationLimitError(HeunlockError):
    """Adaptive truncation failed to converge before the index cap."""

    def __init__(self, j_max, last_change):
        self.j_max = j_max
        self.last_change = last_change
        super().__init__(
            f"matrix product not converged at truncation cap {j_max} "
            f"(last relative change {last_change:.3e})"
        )


class EvaluationDomainError(HeunlockError, ValueError):
    """Evaluation point lies outside the certified annulus."""


class MonodromyMismatchError(HeunlockError):
    """The conjugate-symmetry relation failed to hold pointwise.

    Signals that kappa is not actually a matching root or that the series
    truncation is too coarse.
    """


class SolutionPoleError(HeunlockError):
    """A phase-solution denominator vanished at the requested time."""

    def __init__(self, t, magnitude):
        self.t = t
        self.magnitude = magnitude
        super().__init__(f"solution denominator ~{magnitude:.3e} at t={t!r}")


class WindingUnresolvedError(HeunlockError):
    """The winding integral refused to settle on an integer."""

    def __init__(self, raw, residual):
        self.raw = raw
        self.residual = residual
        super().__init__(
            f"winding integral {raw!r} is {residual:.3e} away from an integer "
            "after grid refinement"
        )


class IntegrationFailure(HeunlockError):
    """Direct ODE integration failed (step-size underflow or solver error)."""
