"""Analytic phase-lock solutions of the driven overdamped junction equation.

The package builds Floquet solutions of a reduced double confluent Heun
equation from convergent infinite matrix products, locates the Floquet
exponent through a transcendental matching condition, assembles the
attractor/repeller/general phase solutions and their winding number, and
validates everything against direct ODE integration.
"""

from .errors import (
    EvaluationDomainError,
    HeunlockError,
    IntegrationFailure,
    InvalidParameterError,
    MonodromyMismatchError,
    NearPoleError,
    SolutionPoleError,
    TruncationLimitError,
    WindingUnresolvedError,
)
from .params import DerivedParams, ProblemParams, derive, invert_derived
from .recurrence import (
    M,
    M_INF,
    M_tilde,
    ProductResult,
    RecurrenceContext,
    Z,
    Z_tilde,
    product,
)
from .laurent import (
    LaurentSolution,
    MonodromyConstant,
    coefficients,
    companion_E_sharp,
    companion_E_sharp_prime,
    conjugate_hat_E,
    evaluate_E,
    evaluate_E_derivs,
    gamma_ratio,
    monodromy_constant,
    prefactor,
)
from .matching import (
    NO_LOCK,
    DiscriminantProfile,
    LockRoot,
    NoLock,
    find_roots,
    lock_decision,
    xi,
    xi_samples,
)

__version__ = "0.1.0"
