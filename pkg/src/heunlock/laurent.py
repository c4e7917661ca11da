"""Laurent coefficients and the regularized Floquet solution E(z).

The solution of the reduced double confluent Heun equation is assembled as

    E(z) = N * (E_plus(z) + E_minus(z) - 1)

where E_plus, E_minus are entire series in z and 1/z whose coefficients come
from the convergent matrix products of :mod:`heunlock.recurrence` scaled by
Gamma-function ratios, and N is a z-independent sine/linear normalization.
N's zero grid exactly covers the parameter configurations where raw
coefficient formulas hit vanishing divisors, so every such pole is consumed
as a sin(x)/x limit and the assembled function stays finite for any
parameter values.

Also provided: the companion solution obtained by the involutive index map,
the conjugate-reflected solution, and the monodromy constant tying the two.
"""

from __future__ import annotations

import cmath
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EvaluationDomainError,
    MonodromyMismatchError,
    NearPoleError,
    TruncationLimitError,
)
from .params import DerivedParams
from .recurrence import (
    RecurrenceContext,
    SmallFactor,
    _split_small,
    initial_truncation,
    singularity_floor,
    sweep_columns,
)

__all__ = [
    "LaurentSolution",
    "MonodromyConstant",
    "gamma_ratio",
    "prefactor",
    "coefficients",
    "evaluate_E",
    "evaluate_E_derivs",
    "companion_E_sharp",
    "companion_E_sharp_prime",
    "conjugate_hat_E",
    "monodromy_constant",
    "BranchCutWarning",
]

MAX_SERIES_TERMS = 2048


class BranchCutWarning(UserWarning):
    """Evaluation point sits within 1e-8 of the branch cut (negative reals)."""


def sinc_pi(x: complex) -> complex:
    """sin(pi*x)/(pi*x), stable through x = 0."""
    px = math.pi * x
    if abs(px) < 1e-4:
        px2 = px * px
        return 1.0 - px2 / 6.0 * (1.0 - px2 / 20.0)
    return cmath.sin(px) / px


def prefactor(derived: DerivedParams, parity: int, kappa: float) -> complex:
    """The z-independent sine/linear normalization of E(z).

    Equivalent closed form of the sin*sin over linear-factors expression:
    with u = (n+parity)/2 - i*kappa and w = (n-parity)/2 + i*kappa it equals
    (-1)**(parity+1) * sinc(pi*u) * sinc(pi*(w+1)), finite for all parameter
    values (the two 'superfluous' sine roots are divided out by the sinc
    denominators themselves).
    """
    u = (derived.n + parity) / 2.0 - 1j * kappa
    w = (derived.n - parity) / 2.0 + 1j * kappa
    return (-1) ** (parity + 1) * sinc_pi(u) * sinc_pi(w + 1.0)


def prefactor_over_suppressed(derived, parity, kappa, records) -> complex:
    """Prefactor divided by the suppressed near-zero divisors.

    Each record is a SmallFactor (var, grid, value, cofactor, ...) pulled out
    of a sweep; its small linear factor is cancelled against the matching
    sine zero as a sin(x)/x limit, the O(1) cofactor is divided directly.
    At most one record per variable can exist at a given parameter point.
    """
    u = (derived.n + parity) / 2.0 - 1j * kappa
    w = (derived.n - parity) / 2.0 + 1j * kappa
    u_recs = [r for r in records if r.var == "u"]
    w_recs = [r for r in records if r.var == "w"]
    if len(u_recs) > 1 or len(w_recs) > 1:
        raise NearPoleError(records[0].j, abs(records[0].value),
                            what="multiple poles")
    if u_recs:
        r = u_recs[0]
        fu = (-1) ** (r.grid & 1) * sinc_pi(u - r.grid) / (u * r.cofactor)
    else:
        fu = sinc_pi(u)
    if w_recs:
        r = w_recs[0]
        if r.grid == -1:
            raise NearPoleError(r.j, abs(r.value), what="w=-1 pole")
        fw = (-1) ** ((r.grid + 1) & 1) * sinc_pi(w - r.grid) / ((w + 1.0) * r.cofactor)
    else:
        fw = sinc_pi(w + 1.0)
    return (-1) ** (parity + 1) * fu * fw


def gamma_ratio(nu: complex, k: int) -> complex:
    """Gamma(1+nu)/Gamma(k+1+nu) as the finite product prod_{j=1..k} 1/(nu+j).

    Never routed through a complex log-gamma: the finite product cannot
    overflow for the index ranges in use and has no spurious branch issues.
    Raises NearPoleError when some nu+j sits on (or numerically at) a pole.
    """
    value, records = _gamma_ratio_records(nu, k, var="u")
    if records:
        rec = records[0]
        raise NearPoleError(-rec.grid, abs(rec.value), what="nu+j")
    return value


def _gamma_ratio_records(nu, k, var, scale=1.0):
    """Gamma ratio with near-zero factors pulled out as records.

    `scale` folds a per-index numerator factor into the product, so callers
    can form scale^k * Gamma(1+nu)/Gamma(k+1+nu) without ever materializing
    the overflowing scale^k and underflowing ratio separately.
    """
    floor = 1e-12 * max(1.0, abs(nu))
    value = 1.0 + 0.0j
    records = []
    for j in range(1, k + 1):
        f = nu + j
        if abs(f) < floor:
            records.append(SmallFactor(var, -j, f, 1.0 + 0j, -j, False))
            value *= scale
        else:
            value *= scale / f
    return value, records


class _RegValue:
    """Complex value with suppressed small linear factors kept symbolic.

    Represents mantissa / prod(value(key)**power); ratios cancel identical
    keys exactly, leftovers are resolved by explicit multiplication.
    """

    __slots__ = ("mantissa", "keys", "values")

    def __init__(self, mantissa, keys=None, values=None):
        self.mantissa = mantissa
        self.keys = keys or Counter()
        self.values = values or {}

    def mul_plain(self, c):
        return _RegValue(self.mantissa * c, Counter(self.keys), dict(self.values))

    def div_record(self, rec):
        out = _RegValue(self.mantissa / rec.cofactor, Counter(self.keys),
                        dict(self.values))
        key = (rec.var, rec.grid)
        out.keys[key] += 1
        out.values[key] = rec.value
        return out

    def mul_reg(self, other):
        out = _RegValue(self.mantissa * other.mantissa,
                        self.keys + other.keys, dict(self.values))
        out.values.update(other.values)
        return out

    def ratio(self, den):
        """self / den with symbolic cancellation of shared suppressed keys."""
        if den.mantissa == 0:
            raise NearPoleError(0, 0.0, what="zero normalization mantissa")
        keys = Counter(self.keys)
        keys.subtract(den.keys)
        values = dict(self.values)
        values.update(den.values)
        out = self.mantissa / den.mantissa
        for key, power in keys.items():
            if power == 0:
                continue
            val = values[key]
            if val == 0 and power > 0:
                # an uncancelled exact zero in the denominator of self
                raise NearPoleError(key[1], 0.0, what="exact pole in ratio")
            out *= val ** (-power)
        return out


def _side_coefficients(ctx, K, tilde, j0):
    """Raw coefficients tilde-a_k (k = 0..K) for one side as _RegValues."""
    mu = ctx.derived.mu
    nu = ctx.u if not tilde else ctx.w
    cols, records = sweep_columns(ctx, j0, k_lo=0, tilde=tilde, collect_to=K)
    floor = singularity_floor(ctx.derived)
    out = []
    for k in range(K + 1):
        v1, v2 = cols[k]
        val = _RegValue(v2 + 0.0j)
        for rec in records:
            if rec.j >= k:
                val = val.div_record(rec)
        # mu^k is folded factor-by-factor into the Gamma ratio so neither
        # side overflows on its own for strong drives
        gval, grecs = _gamma_ratio_records(nu, k, var="u" if not tilde else "w",
                                           scale=mu)
        val = val.mul_plain(gval)
        for rec in grecs:
            val = val.div_record(rec)
        if tilde:
            # extra 1/Zt_{k-1} factor
            u, w = ctx.u, ctx.w
            ztkm1 = (k - 1 - u) * (k + w)
            if abs(ztkm1) < floor:
                val = val.div_record(_split_small(u, w, k - 1, ztkm1, True))
            else:
                val = val.mul_plain(1.0 / ztkm1)
        out.append(val)
    return out


@dataclass(frozen=True)
class LaurentSolution:
    """Laurent data of the Floquet solution, immutable after construction.

    a_plus[k] and a_minus[k] are the normalized series coefficients of z^k
    and z^-k (a_plus[0] == a_minus[0] == 1 unless a fallback normalization
    by the index-1 coefficients was needed); `prefactor` is the overall
    sine/linear normalization.  The full function is

        E(z) = prefactor * (sum_k a_plus[k] z^k + sum_{k>=1} a_minus[k] z^-k)

    with certified absolute tail bounds inside [r_min, r_max].
    """

    a_plus: np.ndarray
    a_minus: np.ndarray
    prefactor: complex
    kappa: float
    parity: int
    derived: DerivedParams
    trunc: dict = field(default_factory=dict)
    fallback_normalization: bool = False

    @property
    def omega(self) -> float:
        # lam + mu^2 reproduces (2*omega)**-2 exactly by construction
        return 0.5 / math.sqrt(self.derived.lam + self.derived.mu ** 2)

    @property
    def u(self) -> complex:
        return (self.derived.n + self.parity) / 2.0 - 1j * self.kappa

    def context(self) -> RecurrenceContext:
        return RecurrenceContext(self.derived, self.parity, self.kappa)

    def to_json_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "parity": self.parity,
            "prefactor": [self.prefactor.real, self.prefactor.imag],
            "a_plus": [[c.real, c.imag] for c in self.a_plus],
            "a_minus": [[c.real, c.imag] for c in self.a_minus],
            "trunc": dict(self.trunc),
            "derived": {"n": self.derived.n, "mu": self.derived.mu,
                        "lam": self.derived.lam},
            "fallback_normalization": self.fallback_normalization,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LaurentSolution":
        return cls(
            a_plus=np.array([complex(r, i) for r, i in obj["a_plus"]]),
            a_minus=np.array([complex(r, i) for r, i in obj["a_minus"]]),
            prefactor=complex(*obj["prefactor"]),
            kappa=float(obj["kappa"]),
            parity=int(obj["parity"]),
            derived=DerivedParams(**obj["derived"]),
            trunc=dict(obj["trunc"]),
            fallback_normalization=bool(obj.get("fallback_normalization", False)),
        )


def _tail_ratio(coeffs, r):
    """Geometric majorant ratio of |a_k| r^k over the last few stored terms."""
    mags = np.abs(coeffs)
    tail = [mags[k + 1] * r / mags[k] for k in range(len(mags) - 4, len(mags) - 1)
            if mags[k] > 0]
    if not tail:
        return 0.0
    return max(tail)


def coefficients(ctx: RecurrenceContext, K_plus: int = 64, K_minus: int = 64,
                 tol: float = 1e-14, r_bounds=(0.1, 10.0)) -> LaurentSolution:
    """Build the normalized Laurent coefficients for the given context.

    The requested K_plus/K_minus are extended automatically until the
    factorial tail bound of each series drops below tol across the whole
    annulus r_bounds.  Coefficient zeros forced by mu = 0 come out exactly.
    """
    if K_plus < 1 or K_minus < 1:
        raise ValueError("K_plus and K_minus must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    r_min, r_max = r_bounds
    if not (0 < r_min <= 1 <= r_max):
        raise EvaluationDomainError(f"annulus must straddle |z| = 1, got {r_bounds}")

    N = prefactor(ctx.derived, ctx.parity, ctx.kappa)

    def build_side(K, tilde, r):
        K_cur = K
        j0_floor = 4096
        while True:
            j0 = max(initial_truncation(ctx, K_cur), j0_floor)
            raw = _side_coefficients(ctx, K_cur, tilde, j0)
            # stability check: one truncation doubling must leave the
            # normalized head unchanged (ratios converge far faster than
            # the raw product scale)
            n_head = min(K_cur, 4)
            raw2 = _side_coefficients(ctx, n_head, tilde, 2 * j0)
            scale = raw[0] if abs(raw[0].mantissa) > 0 else raw[1]
            scale2 = raw2[0] if abs(raw2[0].mantissa) > 0 else raw2[1]
            head1 = [raw[k].ratio(scale) for k in range(n_head + 1)]
            head2 = [raw2[k].ratio(scale2) for k in range(n_head + 1)]
            drift = max(abs(h1 - h2) for h1, h2 in zip(head1, head2))
            href = max(1.0, max(abs(h) for h in head1))
            if drift > 1e3 * tol * href and j0 < (1 << 22):
                j0_floor = 4 * j0
                continue
            if ctx.derived.mu == 0.0:
                return raw
            mags = np.maximum(np.array([abs(v.mantissa) for v in raw]), 1e-300)
            rho = _tail_ratio(mags, r)
            # log space: r^K overflows long before the bound itself matters
            log_tail = (math.log(mags[-1]) + K_cur * math.log(r)
                        - math.log(mags.max()))
            if rho < 0.5 and log_tail + math.log(rho / (1 - rho)) < math.log(tol):
                return raw
            if K_cur >= MAX_SERIES_TERMS:
                raise TruncationLimitError(K_cur, math.exp(min(log_tail, 700.0)))
            K_cur = min(MAX_SERIES_TERMS, max(K_cur + 16, int(1.5 * K_cur)))

    raw_plus = build_side(K_plus, False, r_max)
    raw_minus = build_side(K_minus, True, 1.0 / r_min)

    mag_p = np.array([abs(v.mantissa) for v in raw_plus])
    mag_m = np.array([abs(v.mantissa) for v in raw_minus])
    fallback = (mag_p[0] < 1e-10 * mag_p.max()) or (mag_m[0] < 1e-10 * mag_m.max())
    idx = 1 if fallback else 0
    a_plus = np.array([v.ratio(raw_plus[idx]) for v in raw_plus])
    a_minus = np.array([v.ratio(raw_minus[idx]) for v in raw_minus])

    def stored_tail(coeffs, r):
        rho = _tail_ratio(np.maximum(np.abs(coeffs), 1e-300), r)
        log_t = (math.log(max(abs(coeffs[-1]), 1e-300))
                 + (len(coeffs) - 1) * math.log(r)
                 + math.log(max(abs(N), 1e-300)))
        if 0 < rho < 1:
            log_t += math.log(rho / (1 - rho))
        return math.exp(min(log_t, 700.0))

    tail_p = stored_tail(a_plus, r_max)
    tail_m = stored_tail(a_minus, 1.0 / r_min)

    trunc = {
        "K_plus": len(a_plus) - 1,
        "K_minus": len(a_minus) - 1,
        "tail_plus": float(tail_p),
        "tail_minus": float(tail_m),
        "r_min": float(r_min),
        "r_max": float(r_max),
    }
    return LaurentSolution(
        a_plus=a_plus, a_minus=a_minus, prefactor=N, kappa=ctx.kappa,
        parity=ctx.parity, derived=ctx.derived, trunc=trunc,
        fallback_normalization=bool(fallback),
    )


def _check_annulus(sol, z):
    r = np.abs(z)
    r_min = sol.trunc.get("r_min", 0.1)
    r_max = sol.trunc.get("r_max", 10.0)
    slack = 1e-12
    if np.any(r < r_min * (1 - slack)) or np.any(r > r_max * (1 + slack)):
        raise EvaluationDomainError(
            f"|z| outside certified annulus [{r_min}, {r_max}]"
        )
    if np.any(r == 0):
        raise EvaluationDomainError("z = 0 is an essential singular point")


def _series_eval(sol, z, order):
    """Value and derivatives of E up to `order` by term-wise differentiation.

    The m-th derivative is sum_k a_k k(k-1)..(k-m+1) z^(k-m) over both index
    signs; the shared constant a_minus[0] is counted once (on the plus side).
    """
    zi = 1.0 / z
    ap = sol.a_plus
    am = sol.a_minus.copy()
    am[0] = 0.0
    kp = np.arange(len(ap))
    km = np.arange(len(am))
    out = []
    for m in range(order + 1):
        cp = ap.copy()
        cm = am.copy()
        for d in range(m):
            cp = cp * (kp - d)
            cm = cm * (-km - d)
        plus = np.polynomial.polynomial.polyval(z, cp)
        minus = np.polynomial.polynomial.polyval(zi, cm)
        total = plus * z ** (-m) + minus * zi ** m
        out.append(sol.prefactor * total)
    return out


def evaluate_E(sol: LaurentSolution, z):
    """E(z) and E'(z) inside the certified annulus (scalar or array z)."""
    z = np.asarray(z, dtype=complex)
    _check_annulus(sol, z)
    vals = _series_eval(sol, z, 1)
    if vals[0].shape == ():
        return complex(vals[0]), complex(vals[1])
    return vals[0], vals[1]


def evaluate_E_derivs(sol: LaurentSolution, z, order: int = 2):
    """E and its first `order` term-wise derivatives."""
    z = np.asarray(z, dtype=complex)
    _check_annulus(sol, z)
    return _series_eval(sol, z, order)


def _branch_power(z, expo):
    """Principal-branch z**expo with cut on the negative real axis."""
    return np.exp(expo * np.log(np.asarray(z, dtype=complex)))


def near_branch_cut(z) -> bool:
    z = np.asarray(z, dtype=complex)
    return bool(np.any(np.abs(np.abs(np.angle(z)) - math.pi) < 1e-8))


def _sharp_matrix(sol, z):
    """Coefficient rows of the involutive map: (E#, E#') from (E'(1/z), E(1/z)).

    E#(z)  = z^(2i*kappa - p)   * (b11 E'(1/z) + b12 E(1/z))
    E#'(z) = z^(2i*kappa - p - 1) * (b21 E'(1/z) + b22 E(1/z))
    """
    u = sol.u
    mu = sol.derived.mu
    lam = sol.derived.lam
    b11 = np.ones_like(np.asarray(z, dtype=complex))
    b12 = u * z - mu
    b21 = -u + mu * z
    b22 = mu * u * (z * z + 1.0) + (lam - u * u) * z
    return b11, b12, b21, b22


def companion_E_sharp(sol: LaurentSolution, z):
    """The second Floquet solution, via the involutive transformation of E."""
    z = np.asarray(z, dtype=complex)
    if near_branch_cut(z):
        warnings.warn("evaluation near the branch cut of z^(2i*kappa - p)",
                      BranchCutWarning, stacklevel=2)
    Ei, Epi = evaluate_E(sol, 1.0 / z)
    b11, b12, _, _ = _sharp_matrix(sol, z)
    head = _branch_power(z, 2j * sol.kappa - sol.parity)
    return head * (b11 * Epi + b12 * Ei)


def companion_E_sharp_prime(sol: LaurentSolution, z):
    """Derivative of the companion solution (closed form, no differencing)."""
    z = np.asarray(z, dtype=complex)
    if near_branch_cut(z):
        warnings.warn("evaluation near the branch cut of z^(2i*kappa - p)",
                      BranchCutWarning, stacklevel=2)
    Ei, Epi = evaluate_E(sol, 1.0 / z)
    _, _, b21, b22 = _sharp_matrix(sol, z)
    head = _branch_power(z, 2j * sol.kappa - sol.parity - 1)
    return head * (b21 * Epi + b22 * Ei)


def conjugate_hat_E(sol: LaurentSolution, z):
    """Conjugate-reflected solution; has the same analytic type as E itself.

    Uses bar-E(z) = conj(E(conj z)), which for a Laurent series is just the
    series with conjugated coefficients; only integer powers appear, so this
    solution is single-valued.
    """
    z = np.asarray(z, dtype=complex)
    zc = np.conjugate(1.0 / z)
    Ei, Epi = evaluate_E(sol, zc)
    Ebar = np.conjugate(Ei)
    Ebar_p = np.conjugate(Epi)
    ubar = np.conjugate(sol.u)
    mu = sol.derived.mu
    return z ** (-sol.parity) * (Ebar_p + (ubar * z - mu) * Ebar)


@dataclass(frozen=True)
class MonodromyConstant:
    """Constant tying the conjugate-reflected solution back to E."""

    C_C: complex
    C_c: float      # phase: C_C = (2*omega)^-1 * exp(i*C_c)
    residual: float


def monodromy_constant(sol: LaurentSolution, n_samples: int = 64,
                       tol: float = 1e-6) -> MonodromyConstant:
    """Estimate the monodromy constant on the unit circle and validate it.

    The conjugate-reflected solution must be a constant multiple of E with
    modulus exactly (2*omega)^-1; failure signals an unmatched kappa or too
    coarse a truncation.
    """
    theta = 2.0 * math.pi * np.arange(n_samples) / n_samples
    zs = np.exp(1j * theta)
    E, _ = evaluate_E(sol, zs)
    Ehat = conjugate_hat_E(sol, zs)
    cc = np.vdot(E, Ehat) / np.vdot(E, E)  # least-squares Ehat ~ cc * E
    resid = np.max(np.abs(Ehat - cc * E) / np.maximum(np.abs(cc * E), 1e-300))
    half_inv_omega = math.sqrt(sol.derived.lam + sol.derived.mu ** 2)  # = 1/(2w)
    mod_err = abs(abs(cc) - half_inv_omega) / half_inv_omega
    if resid > tol or mod_err > tol:
        raise MonodromyMismatchError(
            f"monodromy relation violated: pointwise residual {resid:.3e}, "
            f"|C_C|*2*omega - 1 = {mod_err:.3e}"
        )
    return MonodromyConstant(C_C=complex(cc), C_c=float(cmath.phase(cc)),
                             residual=float(resid))
