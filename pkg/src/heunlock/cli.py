"""Command-line front end: solve, verify, scan, xi.

Exit codes: 0 on success (phase lock found where one was required), 2 when
the analytic machinery reports no lock, 1 on usage or runtime errors.
Errors are rendered as structured JSON on stderr.  Scan output is a CSV
with 17-significant-digit decimals, '\\n' line endings, and a deterministic
row order that does not depend on the worker count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import HeunlockError
from .laurent import coefficients, monodromy_constant
from .matching import NO_LOCK, find_roots, lock_decision
from .oracle import TrajectoryConfig, detect_lock
from .params import ProblemParams, derive
from .recurrence import RecurrenceContext
from .residuals import dche_residual, ojje_residual
from .solutions import PhaseSolution, exp_i_phi, phase_solution, winding_number

__all__ = ["main", "ScanSpec", "run_scan"]

SCAN_FIELDS = ["lock", "parity", "kappa", "winding", "xi0_p0", "xi0_p1", "error"]


def _fmt(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class ScanSpec:
    """Two-axis rectangular parameter scan."""

    axis1: tuple          # (name, lo, hi, n)
    axis2: tuple
    fixed: dict           # remaining parameter values, including omega etc.
    outputs: tuple = ("lock", "kappa", "winding", "xi0")

    def __post_init__(self):
        names = {self.axis1[0], self.axis2[0]}
        if len(names) != 2:
            raise ValueError("axis names must be distinct")
        if not names <= {"A", "B", "omega"}:
            raise ValueError("axis names must be among A, B, omega")
        for _, lo, hi, n in (self.axis1, self.axis2):
            if n < 2:
                raise ValueError("each axis needs n >= 2")
            if not lo < hi:
                raise ValueError("each axis needs lo < hi")

    def grid(self):
        n1, n2 = self.axis1[3], self.axis2[3]
        v1 = np.linspace(self.axis1[1], self.axis1[2], n1)
        v2 = np.linspace(self.axis2[1], self.axis2[2], n2)
        return v1, v2


def _scan_cell(task):
    """One scan cell; isolated so a pathological cell cannot kill the sweep."""
    spec_axis1, spec_axis2, fixed, outputs, grid_n, v1, v2 = task
    row = {f: "" for f in SCAN_FIELDS}
    row[spec_axis1] = _fmt(v1)
    row[spec_axis2] = _fmt(v2)
    try:
        kwargs = dict(fixed)
        kwargs[spec_axis1] = v1
        kwargs[spec_axis2] = v2
        params = ProblemParams(A=kwargs["A"], B=kwargs["B"], omega=kwargs["omega"])
        profiles = {p: find_roots(params, p, grid_n=grid_n) for p in (0, 1)}
        if "xi0" in outputs:
            row["xi0_p0"] = _fmt(profiles[0].xi_at_zero.real)
            row["xi0_p1"] = _fmt(profiles[1].xi_at_zero.real)
        rooted = {p: prof for p, prof in profiles.items() if prof.roots}
        locked = bool(rooted)
        if "lock" in outputs:
            row["lock"] = "1" if locked else "0"
        if locked:
            decision = lock_decision(params, grid_n=grid_n, profiles=profiles)
            row["parity"] = str(decision.parity)
            if "kappa" in outputs:
                row["kappa"] = _fmt(decision.kappa)
            if "winding" in outputs:
                ps = phase_solution(params, "attractor",
                                    kappa=decision.kappa,
                                    parity=decision.parity, K=48)
                row["winding"] = str(winding_number(ps).k)
    except Exception as exc:  # per-cell isolation
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_scan(spec: ScanSpec, parallel: int = 1, grid_n: int = 256) -> str:
    """Run the scan and return the CSV text (deterministic, row-major)."""
    v1s, v2s = spec.grid()
    tasks = [
        (spec.axis1[0], spec.axis2[0], spec.fixed, tuple(spec.outputs),
         grid_n, float(v1), float(v2))
        for v1 in v1s for v2 in v2s
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_scan_cell, tasks, chunksize=8))
    else:
        rows = [_scan_cell(t) for t in tasks]
    buf = io.StringIO()
    fields = [spec.axis1[0], spec.axis2[0]] + SCAN_FIELDS
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _params_from_args(args) -> ProblemParams:
    conf = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            conf = json.load(fh)
    def pick(name, default=None):
        val = getattr(args, name, None)
        if val is not None:
            return val
        return conf.get(name, default)
    A = pick("A")
    B = pick("B")
    omega = pick("omega")
    if A is None or B is None or omega is None:
        raise HeunlockError("A, B and omega are required (flags or --config)")
    parity = pick("parity", 1)
    return ProblemParams(A=float(A), B=float(B), omega=float(omega),
                         parity=int(parity))


def _solve_report(params: ProblemParams, grid_n: int,
                  tol: float | None = None) -> tuple[dict, int]:
    decision = lock_decision(params, grid_n=grid_n)
    if decision is NO_LOCK:
        profiles = {p: find_roots(params, p, grid_n=grid_n) for p in (0, 1)}
        report = {
            "lock": False,
            "xi_at_zero": {str(p): prof.xi_at_zero.real
                           for p, prof in profiles.items()},
        }
        return report, 2
    ps = phase_solution(params, "attractor", kappa=decision.kappa,
                        parity=decision.parity, tol=tol or 1e-14)
    wind = winding_number(ps)
    mc = monodromy_constant(ps.sol)
    report = {
        "lock": True,
        "parity": decision.parity,
        "kappa": decision.kappa,
        "winding": wind.k,
        "C_C_phase": mc.C_c,
        "residuals": {
            "dche": dche_residual(ps.sol),
            "ojje": ojje_residual(ps),
            "monodromy": mc.residual,
            "winding": wind.residual,
        },
    }
    return report, 0


def _verify_report(params: ProblemParams, t_end, grid_n: int,
                   tol: float | None = None) -> tuple[dict, int]:
    cfg = None
    if t_end is not None:
        cfg = TrajectoryConfig(t_end=float(t_end))
    oracle = detect_lock(params, cfg)
    decision = lock_decision(params, grid_n=grid_n)
    report = {
        "oracle": {
            "locked": oracle.locked,
            "rotation_number": oracle.rotation_number,
            "convergence_rate": oracle.convergence_rate,
        },
    }
    if decision is NO_LOCK:
        report["analytic"] = "NoLock"
        return report, 2
    ps = phase_solution(params, "attractor", kappa=decision.kappa,
                        parity=decision.parity, tol=tol or 1e-14)
    mc = monodromy_constant(ps.sol)
    checks = {
        "ojje_residual": (ojje_residual(ps), 1e-6),
        "dche_residual": (dche_residual(ps.sol), 1e-8),
        "monodromy_residual": (mc.residual, 1e-6),
    }
    if oracle.attractor_samples is not None:
        t_mod = oracle.attractor_samples[:, 0]
        target = oracle.attractor_samples[:, 1] + 1j * oracle.attractor_samples[:, 2]
        mine = exp_i_phi(ps, t_mod)
        checks["attractor_sup_deviation"] = (float(np.max(np.abs(mine - target))),
                                             1e-5)
    report["analytic"] = {"parity": decision.parity, "kappa": decision.kappa}
    report["checks"] = {
        name: {"value": val, "threshold": thr, "pass": bool(val < thr)}
        for name, (val, thr) in checks.items()
    }
    report["pass"] = all(c["pass"] for c in report["checks"].values())
    return report, 0


def _axis(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "axis spec must be name:lo:hi:n, e.g. B:0:2:21")
    name, lo, hi, n = parts
    return (name, float(lo), float(hi), int(n))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="heunlock",
        description="Phase-lock analysis of the driven overdamped junction "
                    "equation via Floquet solutions of a reduced double "
                    "confluent Heun equation.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--A", type=float, default=None)
        p.add_argument("--B", type=float, default=None)
        p.add_argument("--omega", type=float, default=None)
        p.add_argument("--parity", type=int, default=None, choices=(0, 1))
        p.add_argument("--config", type=str, default=None,
                       help="JSON file with A/B/omega/parity defaults")
        p.add_argument("--grid", type=int, default=256,
                       help="discriminant sampling grid size")
        p.add_argument("--tol", type=float, default=None,
                       help="series tail tolerance (default 1e-14; "
                            "product truncation is adaptive)")
        p.add_argument("--out", type=str, default=None)

    p_solve = sub.add_parser("solve", help="matching root, winding number, "
                                           "residual diagnostics")
    common(p_solve)

    p_verify = sub.add_parser("verify", help="analytic vs oracle comparison")
    common(p_verify)
    p_verify.add_argument("--t-end", type=float, default=None, dest="t_end")

    p_scan = sub.add_parser("scan", help="parameter-plane scan to CSV")
    p_scan.add_argument("--axis1", type=_axis, required=True)
    p_scan.add_argument("--axis2", type=_axis, required=True)
    common(p_scan)
    p_scan.add_argument("--parallel", type=int, default=1)
    p_scan.add_argument("--outputs", type=str, default="lock,kappa,winding,xi0")

    p_xi = sub.add_parser("xi", help="dump discriminant samples and roots")
    common(p_xi)

    return ap


def _emit(obj, out_path):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        if args.command == "solve":
            params = _params_from_args(args)
            report, code = _solve_report(params, args.grid, args.tol)
            _emit(report, args.out)
            return code

        if args.command == "verify":
            params = _params_from_args(args)
            report, code = _verify_report(params, args.t_end, args.grid,
                                          args.tol)
            _emit(report, args.out)
            return code

        if args.command == "xi":
            params = _params_from_args(args)
            parity = params.parity if args.parity is None else args.parity
            prof = find_roots(params, parity, grid_n=args.grid)
            _emit(prof.to_json_dict(), args.out)
            return 0 if prof.lock else 2

        if args.command == "scan":
            fixed = {}
            for name in ("A", "B", "omega"):
                val = getattr(args, name)
                if val is not None:
                    fixed[name] = val
            spec = ScanSpec(axis1=args.axis1, axis2=args.axis2, fixed=fixed,
                            outputs=tuple(args.outputs.split(",")))
            text = run_scan(spec, parallel=max(1, args.parallel),
                            grid_n=args.grid)
            if args.out:
                with open(args.out, "w", newline="") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return 0
    except HeunlockError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
