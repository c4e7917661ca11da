"""Drive parameters of the junction equation and their derived constants.

The physical triple is (A, B, omega): the equation being solved is

    phi'(t) + sin(phi(t)) = B + A*cos(omega*t).

All series machinery works with the derived constants

    n      = -(B/omega + 1)
    mu     = A/(2*omega)
    lambda = (2*omega)**-2 - mu**2

plus a discrete parity in {0, 1} selecting the ansatz branch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import InvalidParameterError

__all__ = ["ProblemParams", "DerivedParams", "derive", "invert_derived"]


@dataclass(frozen=True)
class ProblemParams:
    """Physical drive parameters. Immutable, safe to share across threads."""

    A: float
    B: float
    omega: float
    parity: int = 1

    def __post_init__(self):
        for name in ("A", "B", "omega"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.omega <= 0:
            raise InvalidParameterError(f"omega must be > 0, got {self.omega}")
        if self.A < 0:
            raise InvalidParameterError(f"A must be >= 0, got {self.A}")
        if self.parity not in (0, 1):
            raise InvalidParameterError(f"parity must be 0 or 1, got {self.parity!r}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def replace_parity(self, parity: int) -> "ProblemParams":
        return ProblemParams(self.A, self.B, self.omega, parity)

    def to_json(self) -> str:
        return json.dumps(
            {"A": self.A, "B": self.B, "omega": self.omega, "parity": self.parity}
        )

    @classmethod
    def from_json(cls, text: str) -> "ProblemParams":
        obj = json.loads(text)
        return cls(
            A=float(obj["A"]),
            B=float(obj["B"]),
            omega=float(obj["omega"]),
            parity=int(obj.get("parity", 1)),
        )


@dataclass(frozen=True)
class DerivedParams:
    """Constants replacing (A, B) in the series machinery.

    Always recomputed from a ProblemParams via :func:`derive`; never mutated
    independently, so the two representations cannot drift apart.
    """

    n: float
    mu: float
    lam: float

    def __post_init__(self):
        for name in ("n", "mu", "lam"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")


def derive(params: ProblemParams) -> DerivedParams:
    """Map (A, B, omega) to (n, mu, lambda).

    lambda + mu**2 reproduces (2*omega)**-2 exactly as floating point, since
    lambda is computed as that difference.
    """
    omega = params.omega
    n = -(params.B / omega + 1.0)
    mu = params.A / (2.0 * omega)
    lam = (2.0 * omega) ** -2 - mu * mu
    return DerivedParams(n=n, mu=mu, lam=lam)


def invert_derived(d: DerivedParams, omega: float, parity: int = 1) -> ProblemParams:
    """Recover (A, B) from (n, mu) at the given drive frequency.

    Round-trip convenience for scans parameterized in (n, mu):
    derive(invert_derived(d, omega)) == d to machine precision.
    """
    if not (isinstance(omega, (int, float)) and math.isfinite(omega) and omega > 0):
        raise InvalidParameterError(f"omega must be finite and > 0, got {omega!r}")
    A = 2.0 * omega * d.mu
    B = -(d.n + 1.0) * omega
    return ProblemParams(A=A, B=B, omega=float(omega), parity=parity)
