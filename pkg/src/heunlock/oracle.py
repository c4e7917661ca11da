"""Brute-force ground truth by direct numerical integration.

This module never touches the series machinery: it integrates the drive
equation phi' + sin(phi) = B + A*cos(omega*t) (and the equivalent linear
2x2 system) with an adaptive embedded Runge-Kutta scheme, classifies
phase lock through the period map exp(i*phi(t)) -> exp(i*phi(t + T)), and
measures the rotation number.  Acceptance tests compare the analytic
solutions against these results, so independence is strict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure
from .params import ProblemParams
from .trajio import write_trajectory_csv

__all__ = [
    "TrajectoryConfig",
    "Trajectory",
    "LockReport",
    "integrate_ojje",
    "integrate_linear",
    "detect_lock",
    "export_trajectory_csv",
]

BURN_IN_PERIODS = 50
MAX_PERIODS = 500
CONVERGED_SPREAD = 1e-8
AMBIGUOUS_SPREAD = 1e-3


@dataclass(frozen=True)
class TrajectoryConfig:
    """Integration settings; method must be an embedded RK of order >= 5(4)."""

    t_end: float
    rtol: float = 1e-10
    atol: float = 1e-12
    initial_phi: float = 0.0
    method: str = "DOP853"

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be > 0")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("rtol and atol must be > 0")
        if self.method not in ("RK45", "DOP853"):
            raise ValueError("method must be an embedded RK pair: RK45 or DOP853")


class Trajectory:
    """Dense solution wrapper with phase and exponent accessors."""

    def __init__(self, params, dense, t_end, components=1):
        self.params = params
        self._dense = dense
        self.t_end = t_end
        self.components = components

    def phi(self, ts):
        ts = np.asarray(ts, dtype=float)
        out = self._dense(ts)
        return out[0] if self.components == 1 else out

    def exp_iphi(self, ts):
        return np.exp(1j * self.phi(ts))

    def states(self, ts):
        return self._dense(np.asarray(ts, dtype=float))


def _solve(params, rhs, y0, cfg):
    sol = solve_ivp(
        rhs, (0.0, cfg.t_end), y0, method=cfg.method, rtol=cfg.rtol,
        atol=cfg.atol, dense_output=True,
    )
    if not sol.success:
        raise IntegrationFailure(f"integration failed: {sol.message}")
    return sol.sol


def integrate_ojje(params: ProblemParams, cfg: TrajectoryConfig) -> Trajectory:
    """Integrate the scalar drive equation from cfg.initial_phi."""
    A, B, omega = params.A, params.B, params.omega

    def rhs(t, y):
        return B + A * np.cos(omega * t) - np.sin(y)

    dense = _solve(params, rhs, [cfg.initial_phi], cfg)
    return Trajectory(params, dense, cfg.t_end, components=1)


def integrate_linear(params: ProblemParams, x0: float, y0: float,
                     cfg: TrajectoryConfig):
    """Integrate the equivalent linear 2x2 system for (x, y) on the circle.

    Returns (trajectory, phase) where trajectory.states(ts) gives (x, y)
    rows and phase(ts) is the drive phase recovered from
    exp(i*phi) = (x - i*y)/(x + i*y) with continuous unwrapping.
    """
    if x0 == 0.0 and y0 == 0.0:
        raise ValueError("initial state must be nonzero")
    A, B, omega = params.A, params.B, params.omega

    def rhs(t, s):
        q = B + A * np.cos(omega * t)
        return [0.5 * (s[0] + q * s[1]), -0.5 * (q * s[0] + s[1])]

    dense = _solve(params, rhs, [x0, y0], cfg)
    traj = Trajectory(params, dense, cfg.t_end, components=2)

    def phase(ts):
        ts = np.asarray(ts, dtype=float)
        # dense sampling keeps unwrap steps small: |phi'| <= |B| + A + 1
        rate = abs(B) + A + 1.0
        n = max(8, int(math.ceil((ts.max() - ts.min()) * rate / (0.25 * math.pi))))
        tgrid = np.union1d(np.linspace(ts.min(), ts.max(), n + 1), ts)
        x, y = dense(tgrid)
        vals = (x - 1j * y) / (x + 1j * y)
        steps = np.angle(vals[1:] / vals[:-1])
        phi = np.concatenate(([np.angle(vals[0])],
                              np.angle(vals[0]) + np.cumsum(steps)))
        idx = np.searchsorted(tgrid, ts)
        return phi[idx]

    return traj, phase


def export_trajectory_csv(traj: Trajectory, ts, path):
    """Write the integrated trajectory in the shared fixed CSV schema.

    The integrated phi is already continuous, so it doubles as the
    unwrapped-phase column; files diff directly against the analytic export.
    """
    ts = np.asarray(ts, dtype=float)
    phis = traj.phi(ts)
    write_trajectory_csv(path, ts, np.exp(1j * phis), phis)


@dataclass
class LockReport:
    """Outcome of period-map iteration from a fan of initial phases."""

    locked: str                         # 'yes' | 'no' | 'boundary-suspect'
    rotation_number: float              # <phi'>/omega over >= 100 periods
    attractor_samples: np.ndarray | None  # rows (t mod T, Re e^iphi, Im e^iphi)
    convergence_rate: float             # per-period contraction of the map
    spread_history: list = field(default_factory=list)

    @property
    def is_locked(self) -> bool:
        return self.locked == "yes"


def detect_lock(params: ProblemParams, cfg: TrajectoryConfig | None = None,
                n_probes: int = 8, burn_in: int = BURN_IN_PERIODS,
                max_periods: int = MAX_PERIODS,
                n_attractor_samples: int = 256) -> LockReport:
    """Classify phase lock by iterating the period map from n_probes phases.

    Locked means every orbit lands on a common fixed point of the map
    (pairwise exp(i*phi) spread < 1e-8 after burn-in); spreads stuck between
    1e-8 and 1e-3 at the period cap are reported boundary-suspect.  The
    rotation number is measured on one orbit over at least 100 periods and
    the contraction factor is the median per-period spread ratio while the
    spread is still resolvable.
    """
    A, B, omega = params.A, params.B, params.omega
    T = 2.0 * math.pi / omega
    y0 = 2.0 * math.pi * np.arange(n_probes) / n_probes

    def rhs(t, y):
        return B + A * np.cos(omega * t) - np.sin(y)

    base_cfg = cfg or TrajectoryConfig(t_end=T)
    rot_span = max(100, burn_in)        # periods used for the rotation number
    chunk = 25
    spreads = []                        # spread at every period boundary
    locked_at = None
    t_done = 0.0
    y = y0.copy()
    phi0_start = None
    phi0_end = None
    periods_done = 0
    while periods_done < max_periods:
        n_per = min(chunk, max_periods - periods_done)
        sol = solve_ivp(rhs, (t_done, t_done + n_per * T), y,
                        method=base_cfg.method, rtol=base_cfg.rtol,
                        atol=base_cfg.atol, dense_output=True)
        if not sol.success:
            raise IntegrationFailure(f"integration failed: {sol.message}")
        ends = t_done + T * np.arange(1, n_per + 1)
        states = sol.sol(ends)
        e = np.exp(1j * states)
        for m in range(n_per):
            col = e[:, m]
            spreads.append(float(np.abs(col[:, None] - col[None, :]).max()))
        if periods_done < burn_in <= periods_done + n_per:
            phi0_start = float(sol.sol(burn_in * T)[0])
        y = sol.y[:, -1]   # exact integrator endpoint, not the interpolant
        t_done += n_per * T
        periods_done += n_per
        phi0_end = float(y[0])
        if (locked_at is None and periods_done >= burn_in
                and spreads[-1] < CONVERGED_SPREAD):
            locked_at = periods_done
        if locked_at is not None and periods_done >= burn_in + rot_span:
            break

    if phi0_start is None:  # burn_in >= max_periods edge
        phi0_start = float(y0[0])
    rotation = (phi0_end - phi0_start) / ((periods_done - burn_in) * T * omega) \
        if periods_done > burn_in else 0.0

    if locked_at is not None:
        verdict = "yes"
    elif spreads[-1] < AMBIGUOUS_SPREAD:
        verdict = "boundary-suspect"
    else:
        verdict = "no"

    # contraction factor: median per-period ratio while spread is resolvable
    usable = [(a, b) for a, b in zip(spreads[:-1], spreads[1:])
              if 1e-12 < b < a < 1e-2]
    rate = float(np.median([b / a for a, b in usable])) if usable else math.nan

    samples = None
    if verdict == "yes":
        # tight tolerances and a small max_step here: the dense interpolant
        # is lower order than the integrator, and these samples feed
        # absolute analytic-vs-oracle comparisons
        ts = t_done + T * np.arange(n_attractor_samples) / n_attractor_samples
        sol = solve_ivp(rhs, (t_done, t_done + T), y, method=base_cfg.method,
                        rtol=min(base_cfg.rtol, 1e-12),
                        atol=min(base_cfg.atol, 1e-13),
                        max_step=T / 32.0, dense_output=True)
        if not sol.success:
            raise IntegrationFailure(f"integration failed: {sol.message}")
        phis = sol.sol(ts)[0]
        evals = np.exp(1j * phis)
        samples = np.column_stack([np.mod(ts, T), evals.real, evals.imag])

    return LockReport(
        locked=verdict,
        rotation_number=float(rotation),
        attractor_samples=samples,
        convergence_rate=rate,
        spread_history=spreads,
    )
