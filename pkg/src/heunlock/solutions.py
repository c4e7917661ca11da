"""Attractor, repeller, and general phase solutions, plus the winding number.

Every solution is expressed through the single Floquet function E(z):

  attractor:  exp(-i*phi) = 2i*omega*( z E'/E + u - mu*z ),      z = e^(i*omega*t)
  repeller:   exp(+i*phi) = -2i*omega*( z^-1 E'(1/z)/E(1/z) + u - mu/z )
  general:    a nonlinear superposition parameterized by a real angle psi,
              reducing to the attractor at psi = 0 and the repeller at
              psi = pi/2.

Here u = (n+parity)/2 - i*kappa.  Branch powers z^(-parity + 2i*kappa) are
evaluated with the unwrapped argument theta = omega*t (covering-space
evaluation), so general solutions are continuous in t but not periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SolutionPoleError, WindingUnresolvedError
from .laurent import LaurentSolution, coefficients, evaluate_E
from .matching import NO_LOCK, lock_decision
from .params import ProblemParams, derive
from .recurrence import RecurrenceContext
from .trajio import TRAJECTORY_HEADER, write_trajectory_csv

__all__ = [
    "PhaseSolution",
    "WindingResult",
    "phase_solution",
    "exp_i_phi",
    "dphi_dz",
    "winding_number",
    "phi_unwrapped",
    "export_trajectory_csv",
    "write_trajectory_csv",
    "TRAJECTORY_HEADER",
]


@dataclass(frozen=True)
class PhaseSolution:
    """A phase solution of the drive equation at a matched Floquet exponent."""

    kind: str                   # 'attractor' | 'repeller' | 'general'
    sol: LaurentSolution
    kappa: float
    parity: int
    omega: float
    psi: float = 0.0            # superposition angle, kind == 'general' only

    def __post_init__(self):
        if self.kind not in ("attractor", "repeller", "general"):
            raise ValueError(f"unknown solution kind {self.kind!r}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def u(self) -> complex:
        return (self.sol.derived.n + self.parity) / 2.0 - 1j * self.kappa


def phase_solution(params: ProblemParams, kind: str = "attractor",
                   psi: float = 0.0, kappa: float | None = None,
                   parity: int | None = None, K: int = 64,
                   tol: float = 1e-14) -> PhaseSolution:
    """Construct a phase solution, locating (parity, kappa) if not supplied."""
    if kappa is None or parity is None:
        decision = lock_decision(params)
        if decision is NO_LOCK:
            raise ValueError(
                "no phase lock at these parameters: no matching root exists"
            )
        parity, kappa = decision.parity, decision.kappa
    d = derive(params)
    ctx = RecurrenceContext(d, parity, kappa)
    sol = coefficients(ctx, K, K, tol=tol)
    return PhaseSolution(kind=kind, sol=sol, kappa=kappa, parity=parity,
                         omega=params.omega, psi=psi)


def _pole_guard(t, den, scale):
    bad = np.abs(den) < 1e-12 * scale
    if np.any(bad):
        tb = np.asarray(t)[bad] if np.ndim(t) else t
        db = np.abs(den)[bad] if np.ndim(den) else abs(den)
        raise SolutionPoleError(np.atleast_1d(tb)[0], float(np.atleast_1d(db)[0]))


def exp_i_phi(ps: PhaseSolution, t):
    """exp(i*phi(t)) for real t (scalar or array)."""
    t = np.asarray(t, dtype=float)
    theta = ps.omega * t
    z = np.exp(1j * theta)
    sol, u, mu, omega = ps.sol, ps.u, ps.sol.derived.mu, ps.omega

    if ps.kind == "attractor":
        E, Ep = evaluate_E(sol, z)
        den = 2j * omega * (z * Ep / E + u - mu * z)
        _pole_guard(t, den, 1.0)
        out = 1.0 / den
    elif ps.kind == "repeller":
        zi = 1.0 / z
        E, Ep = evaluate_E(sol, zi)
        out = -2j * omega * (zi * Ep / E + u - mu * zi)
    else:
        zi = 1.0 / z
        E, Ep = evaluate_E(sol, z)
        Ei, Epi = evaluate_E(sol, zi)
        cp, sp = math.cos(ps.psi), math.sin(ps.psi)
        # covering-space powers: z^a evaluated as exp(a * i*theta)
        pw_num = np.exp((-ps.parity + 2j * ps.kappa) * 1j * theta)
        pw_den = np.exp((-ps.parity + 1 + 2j * ps.kappa) * 1j * theta)
        num = cp * E + sp * pw_num * (Epi + (u * z - mu) * Ei)
        den = (omega * cp * (z * Ep + (u - mu * z) * E)
               + sp / (4.0 * omega) * pw_den * Ei)
        scale = np.max(np.abs(num)) if np.ndim(num) else abs(num)
        _pole_guard(t, den, max(float(scale), 1e-30))
        out = -0.5j * num / den
    if out.shape == ():
        return complex(out)
    return out


def dphi_dz(ps: PhaseSolution, z):
    """Closed-form d(phi)/dz of the attractor as an analytic function of z."""
    if ps.kind != "attractor":
        raise ValueError("dphi_dz is defined for the attractor solution")
    z = np.asarray(z, dtype=complex)
    sol, u, mu = ps.sol, ps.u, ps.sol.derived.mu
    d = ps.sol.derived
    E, Ep = evaluate_E(sol, z)
    r = Ep / E
    wim = (d.n - ps.parity) / 2.0 + 1j * ps.kappa   # the conjugate-side constant
    den = z * r + u - mu * z
    _pole_guard(z, den, 1.0)
    # last term is z/(4*omega^2); lam + mu^2 reproduces (2*omega)^-2 exactly
    num = (z ** 3 * r * r
           + z * ((1.0 - z * z) * mu + z * ((ps.parity - 1) - 2j * ps.kappa)) * r
           - (z + z * wim - mu) * (u - mu * z)
           + z * (d.lam + mu * mu))
    out = -1j * z ** -2 * num / den
    if out.shape == ():
        return complex(out)
    return out


@dataclass(frozen=True)
class WindingResult:
    """Integer winding of the attractor phase over one drive period."""

    k: int
    raw_integral: float
    residual: float


def winding_number(ps: PhaseSolution, n_samples: int = 512,
                   max_samples: int = 1 << 16) -> WindingResult:
    """Contour integral of dphi/dz over |z| = 1, driven to an integer.

    Trapezoid on a uniform angle grid is spectrally accurate for this
    periodic integrand; the grid doubles until the rounded value is stable
    and the distance to the nearest integer is < 1e-6.
    """
    if n_samples < 256:
        raise ValueError("n_samples must be >= 256")

    def raw(n):
        theta = 2.0 * math.pi * np.arange(n) / n
        z = np.exp(1j * theta)
        integrand = dphi_dz(ps, z) * 1j * z   # dz = i z dtheta
        val = np.sum(integrand).real * (2.0 * math.pi / n) / (2.0 * math.pi)
        return val

    n = n_samples
    val = raw(n)
    while True:
        n2 = 2 * n
        val2 = raw(n2)
        k = round(val2)
        residual = abs(val2 - k)
        if abs(val2 - val) < 1e-9 and residual < 1e-6:
            return WindingResult(k=int(k), raw_integral=float(val2),
                                 residual=float(residual))
        if n2 >= max_samples:
            if residual > 1e-3:
                raise WindingUnresolvedError(val2, residual)
            return WindingResult(k=int(k), raw_integral=float(val2),
                                 residual=float(residual))
        n, val = n2, val2


def phi_unwrapped(ps: PhaseSolution, ts):
    """phi(t) recovered by continuous argument tracking along ts.

    Internal sampling is refined so each tracked step moves the argument by
    less than pi/2; the value at ts[0] is the principal argument there.
    """
    ts = np.asarray(ts, dtype=float)
    if ts.ndim != 1 or len(ts) < 1:
        raise ValueError("ts must be a 1-d array of times")
    if np.any(np.diff(ts) < 0):
        raise ValueError("ts must be nondecreasing")
    # phi' is bounded by |B| + A + 1; keep steps safely under pi/2
    d = ps.sol.derived
    omega = ps.omega
    B = -(d.n + 1.0) * omega
    A = 2.0 * omega * d.mu
    rate = abs(B) + A + 1.0
    dt_max = 0.25 * math.pi / rate
    fine = [np.array([ts[0]])]
    for a, b in zip(ts[:-1], ts[1:]):
        m = max(1, int(math.ceil(abs(b - a) / dt_max)))
        fine.append(np.linspace(a, b, m + 1)[1:])
    tgrid = np.concatenate(fine)
    vals = np.atleast_1d(exp_i_phi(ps, tgrid))
    steps = np.angle(vals[1:] / vals[:-1])
    phi = np.concatenate(([np.angle(vals[0])], np.angle(vals[0]) + np.cumsum(steps)))
    idx = np.searchsorted(tgrid, ts)
    return phi[idx]


def export_trajectory_csv(ps: PhaseSolution, ts, path):
    """Evaluate the phase solution on ts and write the fixed-schema CSV."""
    ts = np.asarray(ts, dtype=float)
    vals = np.atleast_1d(exp_i_phi(ps, ts))
    phis = phi_unwrapped(ps, ts)
    write_trajectory_csv(path, ts, vals, phis)
