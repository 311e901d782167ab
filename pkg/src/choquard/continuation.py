"""Parameter continuation in p, uniqueness probing and kernel tracking."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .config import SolverConfig, SpectralConfig, Tolerances
from .errors import ChoquardError, DomainError, SweepError
from .functionals import dilate, gaussian_trial_scale
from .grid import RadialGrid, make_grid, quadrature
from .solver import (
    P_MAX,
    START_SHAPES,
    GroundState,
    auto_grid,
    check_solver_range,
    decay_fit,
    pohozaev_report,
    solve_flow,
)
from .spectrum import nondegeneracy_report

SWEEP_HEADER = "p,lambda,m,h1_dist,pohozaev_err,nondegenerate,spread,gamma"
P_GUARD = P_MAX - 1e-3


def worker_count() -> int:
    """Thread budget from CHOQUARD_THREADS, else the machine core count."""
    env = os.environ.get("CHOQUARD_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise DomainError(f"CHOQUARD_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise DomainError("CHOQUARD_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def h1_distance(a, b) -> float:
    """‖a - b‖₂ + ‖∇(a - b)‖₂ for profiles on possibly different grids.

    Both profiles are represented by cubic splines of ``w = r f`` and
    compared on a common grid with the finer spacing and the larger
    radius; a profile is zero beyond its own r_max.
    """
    fa = getattr(a, "q", a)
    fb = getattr(b, "q", b)
    if fa.grid == fb.grid and np.array_equal(fa.values, fb.values):
        return 0.0
    h = min(fa.grid.h, fb.grid.h)
    R = max(fa.grid.r_max, fb.grid.r_max)
    grid = make_grid(int(round(R / h)), R)
    x = grid.r

    def w_and_dw(f):
        s = CubicSpline(np.concatenate(([0.0], f.grid.r)), np.concatenate(([0.0], f.grid.r * f.values)))
        inside = x <= f.grid.r_max
        xc = np.minimum(x, f.grid.r_max)
        return np.where(inside, s(xc), 0.0), np.where(inside, s(xc, 1), 0.0)

    wa, da = w_and_dw(fa)
    wb, db = w_and_dw(fb)
    dw, ddw = wa - wb, da - db
    diff = dw / x
    grad = (ddw - diff) / x
    wts = quadrature(grid, "simpson").weights
    return float(np.sqrt(np.dot(wts, diff**2)) + np.sqrt(np.dot(wts, grad**2)))


@dataclass(frozen=True)
class UniquenessResult:
    spread: float
    unique: bool
    lambdas: dict
    lambda_spread: float
    failures: dict
    states: dict = field(repr=False, default_factory=dict)


def uniqueness_probe(p: float, N: float = 1.0, n_starts: int = 5, cfg: SolverConfig | None = None,
                     threshold: float = 1e-4, workers: int | None = None) -> UniquenessResult:
    """Solve from ``n_starts`` canonical shapes and compare the results.

    Shapes, in order: gaussian, gaussian-narrow, gaussian-wide, plateau,
    two-bump (see :data:`choquard.solver.START_SHAPES`). ``spread`` is the
    largest pairwise sup distance relative to ‖Q‖_∞; starts that fail
    are listed in ``failures``.
    """
    check_solver_range(p, N)
    names = list(START_SHAPES)
    if not 3 <= n_starts <= len(names):
        raise DomainError(f"n_starts must lie in [3, {len(names)}], got {n_starts}")
    names = names[:n_starts]
    cfg = cfg or SolverConfig()
    grid = auto_grid(p, N, cfg)

    def run(name):
        try:
            return name, solve_flow(p, N, cfg, initial=name, grid=grid)
        except ChoquardError as exc:
            return name, exc

    with ThreadPoolExecutor(max_workers=min(workers or worker_count(), n_starts)) as pool:
        results = list(pool.map(run, names))
    states = {k: v for k, v in results if isinstance(v, GroundState)}
    failures = {k: str(v) for k, v in results if not isinstance(v, GroundState)}
    if len(states) < 2:
        return UniquenessResult(np.inf, False, {}, np.inf, failures, states)
    arrs = [s.q.values for s in states.values()]
    qmax = max(np.max(a) for a in arrs)
    spread = max(float(np.max(np.abs(x - y))) for i, x in enumerate(arrs) for y in arrs[i + 1:]) / qmax
    lams = {k: s.lam for k, s in states.items()}
    lv = np.array(list(lams.values()))
    lam_spread = float((lv.max() - lv.min()) / lv.mean())
    unique = spread <= threshold and not failures
    return UniquenessResult(spread, bool(unique), lams, lam_spread, failures, states)


@dataclass(frozen=True)
class SweepRecord:
    p: float
    lambda_p: float
    m_p: float
    h1_dist_to_Q2: float
    pohozaev_max_rel_err: float
    nondegenerate: bool
    multistart_spread: float
    decay_gamma: float
    kernel_counts: tuple = (0, 1, 0)
    lambda_rel_error: float = np.nan
    gamma_ratio: float = np.nan
    decay_r2: float = np.nan
    power_bound_ok: bool = True
    c0_v_bound_ok: bool = True
    mu1_rel: float = np.nan
    cosine_to_Qprime: float = np.nan
    lminus_mu1_rel: float = np.nan
    unique: bool = True
    state: GroundState | None = field(default=None, repr=False, compare=False)

    def csv_row(self) -> str:
        vals = [self.p, self.lambda_p, self.m_p, self.h1_dist_to_Q2, self.pohozaev_max_rel_err]
        cells = [format(float(v), ".17g") for v in vals]
        cells.append("true" if self.nondegenerate else "false")
        cells += [format(float(self.multistart_spread), ".17g"), format(float(self.decay_gamma), ".17g")]
        return ",".join(cells)

    def passes(self, tol: Tolerances | None = None) -> bool:
        tol = tol or Tolerances()
        return bool(
            self.lambda_p > 0 and self.m_p < 0
            and self.pohozaev_max_rel_err <= tol.pohozaev
            and self.lambda_rel_error <= tol.multiplier
            and self.nondegenerate and self.unique
            and self.power_bound_ok and self.c0_v_bound_ok
            and (np.isnan(self.decay_r2) or self.decay_r2 >= tol.decay_r2)
        )


def write_sweep_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def sweep_points(p_from: float, p_to: float, steps: int) -> np.ndarray:
    if not 2.0 <= p_from <= p_to < P_GUARD:
        raise DomainError(f"sweep range must satisfy 2 <= p_from <= p_to < {P_GUARD:.4f} (7/3 guard)")
    if steps < 1 or int(steps) != steps:
        raise DomainError(f"steps must be a positive integer, got {steps}")
    if steps == 1:
        if p_from != p_to:
            raise DomainError("a single step needs p_from == p_to")
        return np.array([float(p_from)])
    if p_from == p_to:
        raise DomainError("several steps need p_from < p_to")
    return np.linspace(p_from, p_to, int(steps))


def _warm_start(prev: GroundState, p: float, N: float, grid: RadialGrid):
    s = gaussian_trial_scale(p, N) / gaussian_trial_scale(prev.p, N)
    return dilate(prev.q, s, grid)


def branch(p_values, N: float = 1.0, cfg: SolverConfig | None = None, warm: bool = True) -> list:
    """Ground states along ``p_values``, each warm-started from the previous one."""
    cfg = cfg or SolverConfig()
    out = []
    prev = None
    for p in p_values:
        grid = auto_grid(p, N, cfg)
        init = _warm_start(prev, p, N, grid) if (warm and prev is not None) else "gaussian"
        try:
            prev = solve_flow(p, N, cfg, initial=init, grid=grid)
        except ChoquardError as exc:
            raise SweepError(f"solve failed at p={p}: {exc}", out, p) from exc
        out.append(prev)
    return out


def make_record(gs: GroundState, q2: GroundState, spectral: SpectralConfig | None = None,
                n_starts: int = 5, cfg: SolverConfig | None = None, spectra: bool = True,
                multistart: bool = True) -> SweepRecord:
    """Run the full check battery on one state."""
    poh = pohozaev_report(gs)
    fit = decay_fit(gs)
    extra = {}
    nondeg, counts = True, (0, 1, 0)
    if spectra:
        nd = nondegeneracy_report(gs, spectral)
        nondeg, counts = nd.verdict, nd.counts
        lam = nd.state.lam
        extra = dict(mu1_rel=abs(float(nd.reports[1].eigenvalues[0])) / lam,
                     cosine_to_Qprime=float(nd.reports[1].cosine_to_Qprime),
                     lminus_mu1_rel=abs(float(nd.lminus.eigenvalues[0])) / lam)
    spread, unique = 0.0, True
    if multistart:
        up = uniqueness_probe(gs.p, gs.mass, n_starts, cfg)
        spread, unique = up.spread, up.unique
    return SweepRecord(
        p=gs.p, lambda_p=gs.lam, m_p=gs.energy.total, h1_dist_to_Q2=h1_distance(gs, q2),
        pohozaev_max_rel_err=max(poh.rel_errors), nondegenerate=nondeg,
        multistart_spread=spread, decay_gamma=fit.gamma, kernel_counts=tuple(counts),
        lambda_rel_error=poh.lambda_rel_error, gamma_ratio=fit.gamma_ratio, decay_r2=fit.r2,
        power_bound_ok=fit.power_bound_ok, c0_v_bound_ok=fit.c0_v_bound_ok, unique=unique,
        state=gs, **extra)


def sweep(p_from: float = 2.0, p_to: float = 2.25, steps: int = 11, N: float = 1.0,
          cfg: SolverConfig | None = None, spectral: SpectralConfig | None = None,
          n_starts: int = 5, spectra: bool = True, multistart: bool = True) -> list:
    """Warm-started continuation with a full check battery at every p.

    Raises
    ------
    SweepError
        Carrying the records completed so far and the failing p.
    """
    ps = sweep_points(p_from, p_to, steps)
    cfg = cfg or SolverConfig()
    records = []
    q2 = None
    prev = None
    for p in ps:
        try:
            grid = auto_grid(p, N, cfg)
            init = _warm_start(prev, p, N, grid) if prev is not None else "gaussian"
            gs = solve_flow(p, N, cfg, initial=init, grid=grid)
            if q2 is None:
                q2 = gs if p == 2.0 else solve_flow(2.0, N, cfg)
            records.append(make_record(gs, q2, spectral, n_starts, cfg, spectra, multistart))
        except ChoquardError as exc:
            raise SweepError(f"sweep failed at p={p}: {exc}", records, float(p)) from exc
        prev = gs
    return records


def largest_passing_p(records, tol: Tolerances | None = None) -> float | None:
    """Largest p such that every record up to it passes all checks."""
    best = None
    for rec in sorted(records, key=lambda r: r.p):
        if not rec.passes(tol):
            break
        best = rec.p
    return best


@dataclass(frozen=True)
class ConvergenceStudy:
    distances: list
    fitted_order: float
    monotone: bool


def convergence_study(records, p_values=None) -> ConvergenceStudy:
    """H¹ distances to Q₂ and the log-log slope over the four p nearest 2.

    ``p_values`` restricts the study to the records at those exponents.
    """
    recs = sorted(records, key=lambda r: r.p)
    if not recs or recs[0].p != 2.0:
        raise DomainError("convergence study needs the p = 2 anchor record")
    dist = [(r.p, r.h1_dist_to_Q2) for r in recs]
    tail = [(p, d) for p, d in dist if p > 2.0]
    if p_values is not None:
        tail = [(p, d) for p, d in tail if np.any(np.isclose(p, p_values, rtol=0, atol=1e-12))]
    monotone = all(d1 < d2 for (_, d1), (_, d2) in zip(tail, tail[1:]))
    order = np.nan
    if len(tail) >= 2:
        pts = tail[:4]
        x = np.log([p - 2.0 for p, _ in pts])
        y = np.log([d for _, d in pts])
        order = float(np.polyfit(x, y, 1)[0])
    return ConvergenceStudy(dist, order, bool(monotone))


@dataclass(frozen=True)
class KernelTracking:
    counts: dict
    constant: bool


def kernel_tracking(records) -> KernelTracking:
    """Constant iff every record has sector kernel counts (0, 1, 0)."""
    counts = {r.p: tuple(r.kernel_counts) for r in records}
    return KernelTracking(counts, all(c == (0, 1, 0) for c in counts.values()))
