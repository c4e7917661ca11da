"""The matching discriminant, its real roots, and the phase-lock decision.

The two half-infinite coefficient chains of the Laurent solution satisfy
every three-term constraint except the central one joining their edge
elements.  That last constraint, regularized by the same sine/linear
prefactor as the solution itself, is the discriminant

    Xi(kappa) = N(kappa) * ( mu^2 gamma~(1) alpha(1)  -- cross terms --
                + (Z_0 + lam) alpha~(1) alpha(1) + mu^2 gamma(1) alpha~(1) )

whose real roots are the admissible Floquet exponents.  Empirically Xi is
real on the real kappa axis and a positive root exists exactly when
Xi(0) > 0 (the phase-lock criterion); both behaviors are monitored, not
assumed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .laurent import coefficients, evaluate_E, prefactor_over_suppressed
from .params import ProblemParams, derive
from .recurrence import (
    RecurrenceContext,
    initial_truncation,
    sweep_batch,
    sweep_columns,
)

__all__ = [
    "DiscriminantProfile",
    "LockRoot",
    "NoLock",
    "NO_LOCK",
    "xi",
    "xi_samples",
    "find_roots",
    "lock_decision",
]

logger = logging.getLogger(__name__)

XI_J0_MIN = 2048          # floor keeps Im Xi truncation noise well under 1e-9
XI_DIR_TOL = 1e-13        # direction stability demanded of both sweeps
ROOT_REL_TOL = 1e-12      # bisection width relative to the search bound
IMAG_TOL = 1e-8           # health bound on |Im Xi| / (|Xi| + 1)


class LockRoot(NamedTuple):
    parity: int
    kappa: float


class NoLock:
    """Outcome marker: no parity branch admits a positive matching root."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NoLock"

    def __bool__(self):
        return False


NO_LOCK = NoLock()


def _xi_at(ctx: RecurrenceContext, j0: int):
    """Xi truncated at j0, with near-pole factors consumed by the prefactor."""
    d = ctx.derived
    musq = d.mu * d.mu
    v1p, v2p, rec_p = sweep_columns(ctx, j0, k_lo=1, tilde=False)
    v1t, v2t, rec_t = sweep_columns(ctx, j0, k_lo=1, tilde=True)
    u, w = ctx.u, ctx.w
    z0 = -u * (1.0 + w)
    combo = musq * v2p * v1t + (z0 + d.lam) * v1t * v1p + musq * v2t * v1p
    pref = prefactor_over_suppressed(d, ctx.parity, ctx.kappa, rec_p + rec_t)
    return pref * combo, (v1p, v2p, v1t, v2t)


def _dir_dist(a, b):
    na = math.hypot(abs(a[0]), abs(a[1]))
    nb = math.hypot(abs(b[0]), abs(b[1]))
    if na == 0.0 or nb == 0.0:
        return math.inf
    return abs(a[0] * b[1] - a[1] * b[0]) / (na * nb)


def xi(ctx: RecurrenceContext, tol: float = XI_DIR_TOL) -> complex:
    """Discriminant value at the context's kappa.

    The truncation index doubles until the directions of both matrix-product
    columns are stable to tol; the remaining truncation effect is a slowly
    decaying real scale factor that cannot move roots or flip signs.
    """
    j0 = max(XI_J0_MIN, initial_truncation(ctx, 1))
    val, cols = _xi_at(ctx, j0)
    while True:
        j2 = 2 * j0
        val2, cols2 = _xi_at(ctx, j2)
        stable = (
            _dir_dist(cols[:2], cols2[:2]) < tol
            and _dir_dist(cols[2:], cols2[2:]) < tol
        )
        if stable or j2 >= (1 << 22):
            return val2
        j0, val, cols = j2, val2, cols2


def xi_samples(params: ProblemParams, parity: int, kappas,
               tol: float = XI_DIR_TOL):
    """Vectorized Xi over an array of kappa values bounded away from zero.

    All kappas share one truncation index, doubled until the worst direction
    change across the batch is below tol.
    """
    kappas = np.asarray(kappas, dtype=float)
    if np.any(kappas <= 0):
        raise ValueError("batched sampling requires kappa > 0; "
                         "use xi() for the regularized kappa = 0 value")
    d = derive(params)
    musq = d.mu * d.mu
    u = (d.n + parity) / 2.0 - 1j * kappas
    w = (d.n - parity) / 2.0 + 1j * kappas
    ctx0 = RecurrenceContext(d, parity, float(np.max(kappas)))
    j0 = max(XI_J0_MIN, initial_truncation(ctx0, 1))

    def run(j):
        v1p, v2p = sweep_batch(d.lam, musq, u, w, j, 1, tilde=False)
        v1t, v2t = sweep_batch(d.lam, musq, u, w, j, 1, tilde=True)
        return v1p, v2p, v1t, v2t

    cols = run(j0)
    while True:
        j2 = 2 * j0
        cols2 = run(j2)
        num_p = np.abs(cols[0] * cols2[1] - cols[1] * cols2[0])
        den_p = np.hypot(np.abs(cols[0]), np.abs(cols[1])) * np.hypot(
            np.abs(cols2[0]), np.abs(cols2[1]))
        num_t = np.abs(cols[2] * cols2[3] - cols[3] * cols2[2])
        den_t = np.hypot(np.abs(cols[2]), np.abs(cols[3])) * np.hypot(
            np.abs(cols2[3]), np.abs(cols2[2]))
        worst = max(np.max(num_p / den_p), np.max(num_t / den_t))
        if worst < tol or j2 >= (1 << 22):
            v1p, v2p, v1t, v2t = cols2
            break
        j0, cols = j2, cols2

    z0 = -u * (1.0 + w)
    combo = musq * v2p * v1t + (z0 + d.lam) * v1t * v1p + musq * v2t * v1p
    pref = np.array(
        [prefactor_over_suppressed(d, parity, float(k), ()) for k in kappas]
    )
    return pref * combo


@dataclass
class DiscriminantProfile:
    """Sampled discriminant on one parity branch with located real roots."""

    parity: int
    samples: list                 # (kappa, complex Xi) pairs, kappa ascending
    roots: list                   # positive real roots, ascending
    xi_at_zero: complex
    lock: bool
    bracket_meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "parity": self.parity,
            "roots": list(self.roots),
            "xi_at_zero": [self.xi_at_zero.real, self.xi_at_zero.imag],
            "lock": self.lock,
            "samples": [[k, v.real, v.imag] for k, v in self.samples],
        }


def _bisect_root(params, parity, lo, hi, flo, fhi, bound):
    d = derive(params)
    width_tol = ROOT_REL_TOL * bound
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        fmid = xi(RecurrenceContext(d, parity, mid)).real
        if fmid == 0.0:
            return mid
        if (flo < 0) != (fmid < 0):
            hi, fhi = mid, fmid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def find_roots(params: ProblemParams, parity: int,
               grid_n: int = 256) -> DiscriminantProfile:
    """Sample Re Xi over (0, 1/(2*omega)], bracket sign changes, bisect.

    Conjectured behavior is monitored rather than assumed: an imaginary part
    exceeding the health bound is recorded in bracket_meta, a grid zero
    without a sign change is classified as a critical (merged) point, and
    the hard constraint that every root lies in (0, 1/(2*omega)] holds by
    construction of the search interval.
    """
    if grid_n < 16:
        raise ValueError("grid_n must be >= 16")
    d = derive(params)
    bound = 1.0 / (2.0 * params.omega)
    kappas = bound * np.arange(1, grid_n + 1) / grid_n
    xis = xi_samples(params, parity, kappas)

    xi0 = xi(RecurrenceContext(d, parity, 0.0))
    im_violations = [
        (float(k), complex(v)) for k, v in zip(kappas, xis)
        if abs(v.imag) > IMAG_TOL * (abs(v) + 1.0)
    ]

    re = xis.real
    scale = float(np.max(np.abs(re))) or 1.0
    roots: list[float] = []
    critical: list[float] = []
    brackets = []

    grid = np.concatenate(([0.0], kappas))
    vals = np.concatenate(([xi0.real], re))
    zero = np.abs(vals) <= 1e-13 * scale

    # grid points that are themselves zeros (degenerate closed-form cases
    # land exactly on the interval endpoint); an interior zero with equal
    # signs on both sides is a tangential (merged attractor/repeller) point
    for i in range(1, grid_n + 1):
        if not zero[i]:
            continue
        left = vals[i - 1]
        if i == grid_n or (left < 0) != (vals[i + 1] < 0):
            roots.append(float(grid[i]))
        else:
            critical.append(float(grid[i]))

    for i in range(grid_n):
        if zero[i] or zero[i + 1]:
            continue
        fa, fb = vals[i], vals[i + 1]
        if (fa < 0) != (fb < 0):
            brackets.append((float(grid[i]), float(grid[i + 1]),
                             float(fa), float(fb)))

    for (a, b, fa, fb) in brackets:
        root = _bisect_root(params, parity, a, b, fa, fb, bound)
        if root <= ROOT_REL_TOL * bound:
            critical.append(root)   # collapses onto kappa = 0: boundary case
        else:
            roots.append(float(root))

    # interior |Re Xi| dips toward zero without a sign change
    for i in range(1, grid_n - 1):
        if (abs(re[i]) < 1e-10 * scale and not zero[i + 1]
                and abs(re[i]) < abs(re[i - 1]) and abs(re[i]) < abs(re[i + 1])
                and (re[i - 1] < 0) == (re[i + 1] < 0)):
            critical.append(float(kappas[i]))

    roots = sorted(set(roots))
    for r in roots:
        if not (0.0 < r <= bound * (1.0 + 1e-12)):
            raise AssertionError(
                f"matching root {r} escaped (0, {bound}]: conjectured root "
                "bound violated; aborting with diagnostics"
            )
    if len(roots) > 1:
        logger.warning(
            "parity %d: %d positive roots found (%s); conjectured uniqueness "
            "violated, keeping all", parity, len(roots), roots,
        )

    meta = {
        "grid_n": grid_n,
        "brackets": brackets,
        "critical": critical,
        "imag_violations": im_violations,
        "conjB_predicate": bool(xi0.real > 0.0),
    }
    return DiscriminantProfile(
        parity=parity,
        samples=[(float(k), complex(v)) for k, v in zip(kappas, xis)],
        roots=roots,
        xi_at_zero=complex(xi0),
        lock=bool(roots),
        bracket_meta=meta,
    )


def _attractor_ojje_residual(params: ProblemParams, parity: int,
                             kappa: float) -> float:
    """Max residual of the drive equation for the candidate attractor.

    Cheap discriminator used only to choose between parity branches when
    both carry a root: phi' is recovered spectrally from exp(i*phi) sampled
    on one period and plugged back into phi' + sin(phi) - q(t).
    """
    d = derive(params)
    ctx = RecurrenceContext(d, parity, kappa)
    sol = coefficients(ctx, 32, 32, tol=1e-12, r_bounds=(0.5, 2.0))
    omega = params.omega
    m = 256
    ts = 2.0 * math.pi / omega * np.arange(m) / m
    z = np.exp(1j * omega * ts)
    E, Ep = evaluate_E(sol, z)
    u = (d.n + parity) / 2.0 - 1j * kappa
    inv = 2j * omega * (z * Ep / E + u - d.mu * z)
    exp_iphi = 1.0 / inv
    # spectral differentiation of the periodic signal exp(i*phi(t))
    freq = np.fft.fftfreq(m, d=ts[1] - ts[0]) * 2.0 * math.pi
    dexp = np.fft.ifft(1j * freq * np.fft.fft(exp_iphi))
    phi_dot = np.real(dexp / (1j * exp_iphi))
    sin_phi = np.imag(exp_iphi / np.abs(exp_iphi))
    q = params.B + params.A * np.cos(omega * ts)
    return float(np.max(np.abs(phi_dot + sin_phi - q)))


def lock_decision(params: ProblemParams, grid_n: int = 256, profiles=None):
    """Select the parity branch and positive root used downstream.

    Returns LockRoot(parity, kappa) or NO_LOCK.  When both parities carry a
    root the branch whose candidate attractor better satisfies the original
    drive equation wins, and the choice is logged.  Precomputed per-parity
    profiles may be passed to avoid re-sampling the discriminant.
    """
    if profiles is None:
        profiles = {p: find_roots(params, p, grid_n=grid_n) for p in (0, 1)}
    rooted = {p: prof for p, prof in profiles.items() if prof.roots}
    if not rooted:
        return NO_LOCK
    if len(rooted) == 1:
        p, prof = next(iter(rooted.items()))
        return LockRoot(p, max(prof.roots))
    scored = {}
    for p, prof in rooted.items():
        kappa = max(prof.roots)
        try:
            scored[p] = _attractor_ojje_residual(params, p, kappa)
        except Exception as exc:  # pole or truncation trouble: disqualify
            logger.info("parity %d residual check failed: %s", p, exc)
            scored[p] = math.inf
    best = min(scored, key=scored.get)
    logger.info(
        "both parities rooted at %s; residuals %s -> parity %d",
        {p: rooted[p].roots for p in rooted}, scored, best,
    )
    return LockRoot(best, max(rooted[best].roots))
