"""Shared fixtures: frozen locked points and the acceptance parameter grid."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pytest

from heunlock.matching import NO_LOCK, find_roots, lock_decision
from heunlock.oracle import TrajectoryConfig, detect_lock
from heunlock.params import ProblemParams
from heunlock.solutions import phase_solution, winding_number

# Oracle-confirmed phase-locked points, diverse in parity and winding.
LOCKED_POINTS = [
    (2.0, 1.0, 1.0),    # k=1, parity 0
    (1.0, 0.4, 0.8),    # k=0, parity 1
    (1.2, 0.25, 0.5),   # k=0, parity 1
    (2.0, 1.8, 0.6),    # k=3, parity 0
    (2.0, 1.0, 0.6),    # k=2, parity 1
]

GRID_OMEGA = 0.6
GRID_N = 21


@dataclass
class LockedCase:
    params: ProblemParams
    parity: int
    kappa: float
    attractor: object
    oracle: object


@pytest.fixture(scope="session")
def locked_cases():
    cases = []
    for (A, B, om) in LOCKED_POINTS:
        params = ProblemParams(A, B, om)
        dec = lock_decision(params)
        assert dec is not NO_LOCK, f"fixture point {(A, B, om)} must lock"
        rep = detect_lock(params, TrajectoryConfig(t_end=1.0, rtol=1e-12,
                                                   atol=5e-14))
        assert rep.locked == "yes", f"oracle must confirm lock at {(A, B, om)}"
        ps = phase_solution(params, "attractor", kappa=dec.kappa,
                            parity=dec.parity)
        cases.append(LockedCase(params=params, parity=dec.parity,
                                kappa=dec.kappa, attractor=ps, oracle=rep))
    return cases


def grid_cell(task):
    """One acceptance-grid cell: analytic roots/winding plus oracle verdict."""
    B, A = task
    params = ProblemParams(A, B, GRID_OMEGA)
    out = {"B": B, "A": A}
    profiles = {p: find_roots(params, p, grid_n=96) for p in (0, 1)}
    out["xi0"] = {p: profiles[p].xi_at_zero.real for p in (0, 1)}
    out["imag_violations"] = sum(
        len(profiles[p].bracket_meta["imag_violations"]) for p in (0, 1))
    dec = lock_decision(params, profiles=profiles)
    if dec is NO_LOCK:
        out["analytic_lock"] = False
    else:
        out["analytic_lock"] = True
        out["parity"] = dec.parity
        out["kappa"] = dec.kappa
        try:
            ps = phase_solution(params, "attractor", kappa=dec.kappa,
                                parity=dec.parity, K=48)
            out["winding"] = winding_number(ps).k
        except Exception as exc:
            out["winding_error"] = str(exc)
    rep = detect_lock(params)
    out["oracle_locked"] = rep.locked
    out["oracle_rotation"] = rep.rotation_number
    return out


@pytest.fixture(scope="session")
def acceptance_grid():
    """21x21 grid over B, A in [0, 2] at omega = 0.6 (criteria 6 and 7)."""
    bs = np.linspace(0.0, 2.0, GRID_N)
    as_ = np.linspace(0.0, 2.0, GRID_N)
    tasks = [(float(b), float(a)) for b in bs for a in as_]
    with ProcessPoolExecutor(max_workers=2) as pool:
        cells = list(pool.map(grid_cell, tasks, chunksize=8))
    return {
        "omega": GRID_OMEGA,
        "n": GRID_N,
        "cells": cells,
    }
