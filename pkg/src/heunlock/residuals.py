"""Residual diagnostics shared by the CLI and the verification tests."""

from __future__ import annotations

import math

import numpy as np

from .laurent import LaurentSolution, evaluate_E_derivs
from .solutions import PhaseSolution, exp_i_phi, phi_unwrapped

__all__ = ["dche_residual", "ojje_residual", "unit_modulus_error"]


def dche_residual(sol: LaurentSolution, n_points: int = 64) -> float:
    """Max relative residual of the reduced Heun equation on |z| = 1.

    The equation in the Floquet frame reads

        z^3 E'' + z[(p - 2i*kappa) z - mu (z^2 - 1)] E'
        + [mu ((n-p)/2 + i*kappa) z^2 + c1 z + mu ((n+p)/2 - i*kappa)] E = 0

    with c1 = (1-p)(1/4 + i*kappa) - kappa^2 - ((n+1)/2)^2 + lambda; the
    residual is normalized by the sum of the three term magnitudes.
    """
    d = sol.derived
    p, kap = sol.parity, sol.kappa
    theta = 2.0 * math.pi * np.arange(n_points) / n_points
    z = np.exp(1j * theta)
    E, Ep, Epp = evaluate_E_derivs(sol, z, 2)
    t1 = z ** 3 * Epp
    t2 = z * ((p - 2j * kap) * z - d.mu * (z * z - 1.0)) * Ep
    c1 = (1 - p) * (0.25 + 1j * kap) - kap ** 2 - ((d.n + 1) / 2.0) ** 2 + d.lam
    t3 = (d.mu * ((d.n - p) / 2.0 + 1j * kap) * z * z + c1 * z
          + d.mu * ((d.n + p) / 2.0 - 1j * kap)) * E
    # normalize by ingredient magnitudes, not the (possibly cancelling)
    # assembled terms; |z| = 1 on the sample circle
    c1_abs = (1 - p) * abs(0.25 + 1j * kap) + kap ** 2 \
        + ((d.n + 1) / 2.0) ** 2 + abs(d.lam)
    scale = (np.abs(Epp)
             + (abs(p - 2j * kap) + 2.0 * d.mu) * np.abs(Ep)
             + (2.0 * d.mu * abs((d.n + p) / 2.0 - 1j * kap) + c1_abs)
             * np.abs(E))
    return float(np.max(np.abs(t1 + t2 + t3) / np.maximum(scale, 1e-300)))


def ojje_residual(ps: PhaseSolution, n_points: int = 256,
                  h_rel: float = 1e-4) -> float:
    """Max |phi' + sin(phi) - B - A cos(omega t)| over one period.

    phi' comes from a 4th-order central stencil on the continuously tracked
    phase with step h_rel * period.
    """
    d = ps.sol.derived
    omega = ps.omega
    B = -(d.n + 1.0) * omega
    A = 2.0 * omega * d.mu
    h = h_rel * ps.period
    t0 = ps.period * np.arange(n_points) / n_points
    cols = [phi_unwrapped(ps, t0 + s * h) for s in (-2, -1, 0, 1, 2)]
    # stencil values are tracked independently; re-align mod 2*pi to center
    phis = [c - 2.0 * math.pi * np.round((c - cols[2]) / (2.0 * math.pi))
            for c in cols]
    dphi = (phis[0] - 8 * phis[1] + 8 * phis[3] - phis[4]) / (12.0 * h)
    res = dphi + np.sin(phis[2]) - B - A * np.cos(omega * t0)
    return float(np.max(np.abs(res)))


def unit_modulus_error(ps: PhaseSolution, n_points: int = 1024) -> float:
    """Max deviation of |exp(i*phi)| from 1 over one period."""
    ts = ps.period * np.arange(n_points) / n_points
    return float(np.max(np.abs(np.abs(exp_i_phi(ps, ts)) - 1.0)))
