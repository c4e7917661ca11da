"""Recurrence factors and convergent truncations of their infinite matrix products.

The Laurent coefficients of the Floquet solution are driven by two families
of 2x2 matrices,

    M_j      = [[1 + lam/Z_j,  mu^2/Z_j], [1,                0]]
    M_tild_j = [[1 + lam/Zt_j, mu^2/Zt_j], [Zt_{j-1}/Zt_j,   0]]

whose infinite right products converge because M_j tends to the idempotent
matrix M_inf = [[1, 0], [1, 0]] at rate O(1/j^2).  A truncation replaces the
unreachable tail by M_inf itself; the truncated first column converges to
(alpha, gamma) with an O(1/j0) drift in scale while its *direction* (the
ratio gamma/alpha, which is all downstream consumers ever use) settles at
machine precision almost immediately, the per-step contraction toward the
dominant column being ~ mu^2/j^2.

With u = (n+parity)/2 - i*kappa and w = (n-parity)/2 + i*kappa the divisors
factor exactly:

    Z_j  = (j + u) * (j - 1 - w)
    Zt_j = (j - u) * (j + 1 + w)

so a divisor can only vanish when kappa ~ 0 and one linear factor sits on an
integer grid point.  Sweeps never divide by such a factor: they multiply by
the rescaled matrix Z_j*M_j instead and record the small factor, letting the
caller cancel it against the matching zero of the sine prefactor.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NearPoleError, TruncationLimitError
from .params import DerivedParams

__all__ = [
    "RecurrenceContext",
    "ProductResult",
    "Z",
    "Z_tilde",
    "M",
    "M_tilde",
    "M_INF",
    "product",
    "singularity_floor",
]

DEFAULT_TOL = 1e-14
DEFAULT_J_MAX = 1 << 20

M_INF = np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex)


def j_max_cap() -> int:
    """Truncation cap; overridable through HEUNLOCK_J_MAX."""
    return int(os.environ.get("HEUNLOCK_J_MAX", DEFAULT_J_MAX))


@dataclass(frozen=True)
class RecurrenceContext:
    """Derived parameters plus the Floquet-exponent parameter kappa.

    kappa may be any finite real here; positivity is selected later by the
    matching condition.
    """

    derived: DerivedParams
    parity: int
    kappa: float

    def __post_init__(self):
        if self.parity not in (0, 1):
            raise ValueError(f"parity must be 0 or 1, got {self.parity!r}")
        if not math.isfinite(self.kappa):
            raise ValueError(f"kappa must be finite, got {self.kappa!r}")

    @property
    def u(self) -> complex:
        return (self.derived.n + self.parity) / 2.0 - 1j * self.kappa

    @property
    def w(self) -> complex:
        return (self.derived.n - self.parity) / 2.0 + 1j * self.kappa


def singularity_floor(derived: DerivedParams) -> float:
    """Magnitude below which a divisor is treated as a pole hit."""
    return 1e-12 * max(1.0, abs(derived.lam), derived.mu * derived.mu)


def Z(ctx: RecurrenceContext, k: int) -> complex:
    """Divisor of the k-th forward recurrence step."""
    half = (ctx.parity - 1) / 2.0
    return (k + half - 1j * ctx.kappa) ** 2 - ((ctx.derived.n + 1) / 2.0) ** 2


def Z_tilde(ctx: RecurrenceContext, k: int) -> complex:
    """Divisor of the k-th backward recurrence step (kappa sign flipped)."""
    half = (1 - ctx.parity) / 2.0
    return (k + half + 1j * ctx.kappa) ** 2 - ((ctx.derived.n + 1) / 2.0) ** 2


def M(ctx: RecurrenceContext, j: int) -> np.ndarray:
    """Forward product factor at index j.

    Raises NearPoleError when |Z_j| is below the singularity floor; the
    caller is then expected to use the regularized path.
    """
    zj = Z(ctx, j)
    floor = singularity_floor(ctx.derived)
    if abs(zj) < floor:
        raise NearPoleError(j, abs(zj), what="Z")
    lam = ctx.derived.lam
    musq = ctx.derived.mu ** 2
    return np.array([[1.0 + lam / zj, musq / zj], [1.0, 0.0]], dtype=complex)


def M_tilde(ctx: RecurrenceContext, j: int) -> np.ndarray:
    """Backward product factor at index j."""
    zj = Z_tilde(ctx, j)
    floor = singularity_floor(ctx.derived)
    if abs(zj) < floor:
        raise NearPoleError(j, abs(zj), what="Zt")
    zjm1 = Z_tilde(ctx, j - 1)
    lam = ctx.derived.lam
    musq = ctx.derived.mu ** 2
    return np.array(
        [[1.0 + lam / zj, musq / zj], [zjm1 / zj, 0.0]], dtype=complex
    )


class SmallFactor(NamedTuple):
    """A near-zero linear factor pulled out of a sweep.

    The suppressed divisor equals value * cofactor; `var` names which of the
    two linear factors (in u or in w) went small and `grid` is the integer
    it sits on, so the matching sine zero can be consumed against it.
    """

    var: str        # 'u' or 'w'
    grid: int
    value: complex
    cofactor: complex
    j: int          # index of the suppressed divisor
    tilde: bool


def _split_small(u, w, j, zj, tilde):
    """Classify which linear factor of a vanishing divisor is the small one."""
    if not tilde:
        fu = j + u          # u - (-j)
        fw_cof = j - 1 - w  # Z_j = fu * fw_cof
        if abs(fu) <= abs(fw_cof):
            return SmallFactor("u", -j, fu, fw_cof, j, tilde)
        # Z_j = -(j + u) * (w - (j-1))
        return SmallFactor("w", j - 1, w - (j - 1), -(j + u), j, tilde)
    fu = u - j              # Zt_j = -(u - j) * (j + 1 + w)
    fw = w + 1 + j          # Zt_j = (j - u) * (w - (-1-j))
    if abs(fu) <= abs(fw):
        return SmallFactor("u", j, fu, -(j + 1 + w), j, tilde)
    return SmallFactor("w", -1 - j, fw, j - u, j, tilde)


def sweep_columns(ctx, j0, k_lo=1, tilde=False, collect_to=None):
    """First column of prod_{j=k}^{j0} (M_j or M~_j) * M_inf, pole-safe.

    Runs the descending recurrence from j0 down to k_lo starting from the
    first column (1, 1) of M_inf.  Divisors below the singularity floor are
    not divided by: the step multiplies by the rescaled matrix instead and
    the small factor is recorded, so the returned column equals the true one
    times the product of all recorded factors.

    Returns (v1, v2, records) for k = k_lo, or, when collect_to >= k_lo is
    given, (columns, records) where columns[k] = (v1, v2) for
    k = k_lo..collect_to and records carry the index j at which each factor
    was suppressed (a record applies to every k <= record.j).
    """
    d = ctx.derived
    lam, musq = d.lam, d.mu * d.mu
    u, w = ctx.u, ctx.w
    floor = singularity_floor(d)
    records = []
    v1 = 1.0 + 0.0j
    v2 = 1.0 + 0.0j
    collected = {} if collect_to is not None else None
    # indices beyond this cannot produce |Z| below the floor
    j_guard = int(max(abs(u), abs(w))) + 3
    if not tilde:
        for j in range(j0, k_lo - 1, -1):
            zj = (j + u) * (j - 1 - w)
            if j <= j_guard and abs(zj) < floor:
                records.append(_split_small(u, w, j, zj, tilde))
                v1, v2 = (zj + lam) * v1 + musq * v2, zj * v1
            else:
                v1, v2 = v1 + (lam * v1 + musq * v2) / zj, v1
            if collected is not None and j <= collect_to:
                collected[j] = (v1, v2)
    else:
        for j in range(j0, k_lo - 1, -1):
            zj = (j - u) * (j + 1 + w)
            zjm1 = (j - 1 - u) * (j + w)
            if j <= j_guard and abs(zj) < floor:
                records.append(_split_small(u, w, j, zj, tilde))
                v1, v2 = (zj + lam) * v1 + musq * v2, zjm1 * v1
            else:
                v1, v2 = v1 + (lam * v1 + musq * v2) / zj, (zjm1 / zj) * v1
            if collected is not None and j <= collect_to:
                collected[j] = (v1, v2)
    if collected is not None:
        return collected, records
    return v1, v2, records


def sweep_batch(lam, musq, u, w, j0, k_lo=1, tilde=False):
    """Vectorized sweep over arrays of (u, w); no pole suppression.

    Intended for discriminant sampling on kappa grids bounded away from
    zero, where no divisor can come near the floor.
    """
    v1 = np.ones_like(u)
    v2 = np.ones_like(u)
    if not tilde:
        for j in range(j0, k_lo - 1, -1):
            zj = (j + u) * (j - 1 - w)
            v1, v2 = v1 + (lam * v1 + musq * v2) / zj, v1
    else:
        for j in range(j0, k_lo - 1, -1):
            zj = (j - u) * (j + 1 + w)
            zjm1 = (j - 1 - u) * (j + w)
            v1, v2 = v1 + (lam * v1 + musq * v2) / zj, (zjm1 / zj) * v1
    return v1, v2


@dataclass(frozen=True)
class ProductResult:
    """Converged first column of a truncated infinite matrix product.

    The second column of the converged product vanishes by construction, so
    only (alpha, gamma) are stored.  est_error is the relative change of the
    raw column over the last doubling of the truncation index; it decays
    like 1/j0.  The column *direction* is far more accurate than that.
    """

    alpha: complex
    gamma: complex
    truncation_index: int
    est_error: float


def _direction_distance(a1, a2, b1, b2):
    """Sine of the angle between complex 2-vectors (a1,a2) and (b1,b2)."""
    na = math.hypot(abs(a1), abs(a2))
    nb = math.hypot(abs(b1), abs(b2))
    if na == 0.0 or nb == 0.0:
        return math.inf
    return abs(a1 * b2 - a2 * b1) / (na * nb)


def initial_truncation(ctx: RecurrenceContext, k: int) -> int:
    """Starting truncation index: past the region where M_j is far from M_inf."""
    d = ctx.derived
    scale = max(abs(ctx.u), abs(ctx.w), abs(d.lam), d.mu * d.mu, float(k), 1.0)
    j0 = 256
    while j0 < 8 * scale:
        j0 *= 2
    return j0


def product(ctx: RecurrenceContext, k: int, tilde: bool = False,
            tol: float = DEFAULT_TOL, j0: int | None = None) -> ProductResult:
    """alpha^(k), gamma^(k): first column of prod_{j=k}^{inf} M_j (or M~_j).

    The truncation index doubles until the direction of the column moves by
    less than tol between doublings (the scale-invariant measure every
    consumer of these products depends on); est_error reports the raw
    relative change over the final doubling.  Passing an explicit j0 skips
    the adaptive loop and truncates exactly there.

    Raises NearPoleError if any divisor in range falls below the floor
    (raw path; the regularized evaluators consume sweep records instead)
    and TruncationLimitError if the cap is hit before convergence.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    def run(j):
        v1, v2, records = sweep_columns(ctx, j, k_lo=k, tilde=tilde)
        if records:
            rec = records[0]
            raise NearPoleError(rec.j, abs(rec.value * rec.cofactor),
                                what="Zt" if tilde else "Z")
        return v1, v2

    if j0 is not None:
        v1, v2 = run(j0)
        p1, p2 = run(max(k, j0 // 2))
        rel = abs(v1 - p1) + abs(v2 - p2)
        rel /= max(abs(v1) + abs(v2), 1e-300)
        return ProductResult(v1, v2, j0, rel)

    cap = j_max_cap()
    j = min(initial_truncation(ctx, k), cap)
    prev1, prev2 = run(j)
    while True:
        j2 = 2 * j
        if j2 > cap:
            raise TruncationLimitError(cap, math.nan)
        cur1, cur2 = run(j2)
        dirdist = _direction_distance(cur1, cur2, prev1, prev2)
        raw = (abs(cur1 - prev1) + abs(cur2 - prev2)) / max(
            abs(cur1) + abs(cur2), 1e-300
        )
        if dirdist < tol:
            return ProductResult(cur1, cur2, j2, raw)
        j = j2
        prev1, prev2 = cur1, cur2
