"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure,
3 verification failure. Settings are layered as built-in defaults, then a
JSON file given by ``--config``, then explicit flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import jsonio
from .config import Config
from .continuation import (
    largest_passing_p,
    sweep,
    write_sweep_csv,
)
from .errors import ChoquardError, DomainError, SweepError
from .functionals import scale_minimize
from .grid import RadialProfile, read_profile_csv, write_profile_csv
from .rearrangement import rearrange, rearrangement_inequalities
from .solver import (
    START_SHAPES,
    GroundState,
    check_solver_range,
    decay_fit,
    euler_lagrange_gradient,
    pohozaev_report,
    relative_residual,
    solve,
)
from .spectrum import SECTORS, ift_operators_check, nondegeneracy_report

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3
CHECKS = ("pohozaev", "multiplier", "scaling", "residual", "decay", "ift", "rearrangement")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text: str, cast=str):
    try:
        return [cast(x.strip()) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad list {text!r}: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="choquard", description="Choquard ground states and their verification.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON settings file")
        p.add_argument("--timestamp", action="store_true", help="add a wall-clock field to JSON output")

    def grid_flags(p):
        p.add_argument("--grid-n", type=int, help="solve grid node count")
        p.add_argument("--r-max", type=float, help="truncation radius (default: scaled to p and mass)")

    for name in ("solve", "fixpoint-solve"):
        s = sub.add_parser(name, help="compute a ground state and write it as JSON")
        common(s)
        grid_flags(s)
        s.add_argument("--p", type=float, required=True)
        s.add_argument("--mass", type=float, default=1.0)
        if name == "solve":
            s.add_argument("--method", choices=("flow", "fixpoint"), default="flow")
        s.add_argument("--initial", choices=sorted(START_SHAPES), default="gaussian")
        s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("spectrum", help="low spectra of the linearized operators")
    common(s)
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.add_argument("--ell", default="0,1,2")
    s.add_argument("--k", type=int)
    s.add_argument("--spectral-n", type=int)
    s.add_argument("--out", type=Path, required=True, help="output directory")

    s = sub.add_parser("sweep", help="continuation in p with the full check battery")
    common(s)
    grid_flags(s)
    s.add_argument("--p-from", type=float, default=2.0)
    s.add_argument("--p-to", type=float, default=2.25)
    s.add_argument("--steps", type=int, default=11)
    s.add_argument("--mass", type=float, default=1.0)
    s.add_argument("--starts", type=int, default=5, help="multistart initializations per p")
    s.add_argument("--no-spectra", action="store_true")
    s.add_argument("--no-multistart", action="store_true")
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("verify", help="check the identities on a solved state")
    common(s)
    s.add_argument("--in", dest="inp", type=Path, required=True)
    s.add_argument("--checks", default=",".join(CHECKS))
    s.add_argument("--out", type=Path, help="JSON report path")

    s = sub.add_parser("rearrange", help="symmetric-decreasing rearrangement of a profile")
    common(s)
    s.add_argument("--in", dest="inp", type=Path, required=True, help="profile CSV or state JSON")
    s.add_argument("--p", type=float, default=2.0, help="exponent for the inequality report")
    s.add_argument("--out", type=Path, required=True, help="output profile CSV")
    return ap


def load_config(args) -> Config:
    data = {}
    if getattr(args, "config", None) is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
    cfg = Config.from_mapping(data)
    solver = cfg.solver
    if getattr(args, "grid_n", None) is not None:
        solver = dataclasses.replace(solver, n=args.grid_n)
    if getattr(args, "r_max", None) is not None:
        solver = dataclasses.replace(solver, r_max=args.r_max)
    spectral = cfg.spectral
    if getattr(args, "k", None) is not None:
        spectral = dataclasses.replace(spectral, k=args.k)
    if getattr(args, "spectral_n", None) is not None:
        spectral = dataclasses.replace(spectral, spectral_n=args.spectral_n)
    return dataclasses.replace(cfg, solver=solver, spectral=spectral)


def _stamp(doc: dict, args) -> dict:
    if args.timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat()
    return doc


def _load_state(path: Path) -> GroundState:
    if not path.exists():
        raise UsageError(f"input file not found: {path}")
    try:
        return GroundState.load(path)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    except DomainError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args, cfg: Config) -> int:
    method = getattr(args, "method", "fixpoint")
    try:
        check_solver_range(args.p, args.mass)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    gs = solve(args.p, args.mass, cfg.solver, method=method, initial=args.initial)
    q = gs.q.values
    n = gs.grid.n
    if q[int(0.8 * n) - 1] >= 1e-2 * q[int(0.4 * n) - 1]:
        print("warning: the profile has not decayed on this grid; increase r_max or leave it "
              "unset to scale it automatically", file=sys.stderr)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    jsonio.dump(_stamp(gs.to_dict(), args), args.out)
    print(f"p={gs.p:.6g} mass={gs.mass:.6g} lambda={gs.lam:.12g} energy={gs.energy.total:.12g} "
          f"residual={gs.eq_residual:.2e} iterations={gs.iterations}")
    return EXIT_OK


def cmd_spectrum(args, cfg: Config) -> int:
    ells = _csv_list(args.ell, int)
    bad = [e for e in ells if e not in SECTORS]
    if bad or not ells:
        raise UsageError(f"sector out of verified scope: {bad or args.ell} (supported: 0, 1, 2)")
    gs = _load_state(args.inp)
    rep = nondegeneracy_report(gs, cfg.spectral, sectors=tuple(ells))
    args.out.mkdir(parents=True, exist_ok=True)
    for ell in ells:
        jsonio.dump(_stamp(rep.reports[ell].to_dict(), args), args.out / f"spectrum_ell{ell}.json")
    jsonio.dump(_stamp(rep.lminus.to_dict(), args), args.out / "spectrum_lminus_ell0.json")
    for ell in ells:
        r = rep.reports[ell]
        print(f"ell={ell} kernel_count={r.kernel_count} lowest={r.eigenvalues[0]:.6e} gap={r.gap:.6e}")
    print(f"NONDEGENERATE: {'true' if rep.verdict else 'false'}")
    return EXIT_OK


def cmd_sweep(args, cfg: Config) -> int:
    from .continuation import sweep_points

    try:
        sweep_points(args.p_from, args.p_to, args.steps)
        if not args.mass > 0:
            raise DomainError("mass must be positive")
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    args.out.parent.mkdir(parents=True, exist_ok=True)
    try:
        records = sweep(args.p_from, args.p_to, args.steps, args.mass, cfg.solver, cfg.spectral,
                        n_starts=args.starts, spectra=not args.no_spectra,
                        multistart=not args.no_multistart)
    except SweepError as exc:
        write_sweep_csv(exc.records, args.out)
        print(f"sweep aborted at p={exc.p}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_sweep_csv(records, args.out)
    best = largest_passing_p(records, cfg.tolerances)
    print(f"rows={len(records)} LARGEST PASSING p: {'none' if best is None else format(best, '.6g')}")
    return EXIT_OK


def run_checks(gs: GroundState, checks, cfg: Config) -> list:
    """Evaluate the selected identities; returns (name, value, limit, passed) rows."""
    tol = cfg.tolerances
    rows = []
    if "pohozaev" in checks:
        poh = pohozaev_report(gs)
        rows.append(("pohozaev_K", poh.rel_errors[0], tol.pohozaev, poh.rel_errors[0] <= tol.pohozaev))
        rows.append(("pohozaev_D", poh.rel_errors[1], tol.pohozaev, poh.rel_errors[1] <= tol.pohozaev))
    if "multiplier" in checks:
        err = pohozaev_report(gs).lambda_rel_error
        rows.append(("multiplier_law", err, tol.multiplier, err <= tol.multiplier))
    if "scaling" in checks:
        _, value = scale_minimize(gs.q, gs.p)
        err = abs(value - gs.energy.total) / abs(gs.energy.total)
        rows.append(("scaling_minimum", err, tol.scaling, err <= tol.scaling))
    if "residual" in checks:
        err = relative_residual(gs.q, euler_lagrange_gradient(gs.q, gs.p), gs.lam)
        rows.append(("euler_lagrange", err, tol.eq_residual, err <= tol.eq_residual))
    if "decay" in checks:
        fit = decay_fit(gs)
        rows.append(("decay_r2", fit.r2, tol.decay_r2, fit.r2 >= tol.decay_r2))
        rows.append(("power_bound", float(fit.power_bound_ok), 1.0, fit.power_bound_ok))
        rows.append(("potential_bound", float(fit.c0_v_bound_ok), 1.0, fit.c0_v_bound_ok))
    if "ift" in checks and gs.p == 2.0:
        ift = ift_operators_check(gs)
        rows.append(("ift_factorization", ift.factorization, tol.factorization,
                     ift.factorization <= tol.factorization))
        rows.append(("ift_w2", ift.w2_residual, tol.anchor_w2, ift.w2_residual <= tol.anchor_w2))
        rows.append(("ift_scalar", ift.scalar_rel_error, tol.anchor_scalar,
                     ift.scalar_rel_error <= tol.anchor_scalar))
        rows.append(("virial", ift.virial_residual, tol.anchor_virial,
                     ift.virial_residual <= tol.anchor_virial))
    if "rearrangement" in checks:
        rep = rearrangement_inequalities(gs.q, gs.p, tol.rearrangement_slack)
        rows.append(("rearrangement_K", rep.K - rep.K_star, 0.0, rep.K_ok))
        rows.append(("rearrangement_D", rep.D_star - rep.D, 0.0, rep.D_ok))
    return [(n, float(v), float(lim), bool(ok)) for n, v, lim, ok in rows]


def cmd_verify(args, cfg: Config) -> int:
    checks = _csv_list(args.checks)
    unknown = sorted(set(checks) - set(CHECKS))
    if unknown or not checks:
        raise UsageError(f"unknown checks {unknown}; choose from {','.join(CHECKS)}")
    gs = _load_state(args.inp)
    rows = run_checks(gs, checks, cfg)
    for name, value, limit, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name:20s} value={value:.3e} limit={limit:.3e}")
    passed = all(ok for *_, ok in rows)
    print(f"VERIFIED: {'true' if passed else 'false'}")
    if args.out is not None:
        doc = {"p": gs.p, "mass": gs.mass, "passed": passed,
               "checks": [{"name": n, "value": v, "limit": lim, "passed": ok} for n, v, lim, ok in rows]}
        jsonio.dump(_stamp(doc, args), args.out)
    return EXIT_OK if passed else EXIT_VERIFY


def cmd_rearrange(args, cfg: Config) -> int:
    if not args.inp.exists():
        raise UsageError(f"input file not found: {args.inp}")
    try:
        if args.inp.suffix == ".json":
            u = _load_state(args.inp).q
        else:
            u = read_profile_csv(args.inp)
    except (DomainError, ValueError, StopIteration) as exc:
        raise UsageError(f"cannot read profile: {exc}") from None
    if np.any(u.values < 0):
        raise UsageError("rearrangement needs a nonnegative profile")
    us: RadialProfile = rearrange(u)
    write_profile_csv(us, args.out)
    rep = rearrangement_inequalities(u, args.p, cfg.tolerances.rearrangement_slack)
    print(f"K={rep.K:.12g} K*={rep.K_star:.12g} K_ok={rep.K_ok}")
    print(f"D={rep.D:.12g} D*={rep.D_star:.12g} D_ok={rep.D_ok}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "fixpoint-solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "rearrange": cmd_rearrange,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ChoquardError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
