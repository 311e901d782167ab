"""Normalized ground states by a preconditioned gradient flow or a fixed-point map.

Both solvers work on the mass sphere ‖u‖₂ = N of the discrete problem
``E_p(u) = K(u) - D_p(u)``. Node ``n`` (at r_max) is held at zero.
The multiplier is always extracted as ``λ = -<∇E(u), u>/N²``, which for
the discrete functional equals ``(2p D - 2K)/N²`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import jsonio
from .config import SolverConfig
from .errors import ConvergenceError, DomainError, InsufficientDecayError
from .functionals import (
    EnergyBreakdown,
    dilate,
    energy,
    energy_difference,
    gaussian_trial_scale,
)
from .grid import RadialGrid, RadialProfile, inner, interpolate, make_grid, second_difference
from .potential import _multipole_values, apply_resolvent, newton_potential

P_MIN = 2.0
P_MAX = 7.0 / 3.0

START_SHAPES = {
    "gaussian": lambda x: np.exp(-0.5 * x * x),
    "gaussian-narrow": lambda x: np.exp(-0.5 * (x / 0.5) ** 2),
    "gaussian-wide": lambda x: np.exp(-0.5 * (x / 2.0) ** 2),
    "plateau": lambda x: 1.0 / (1.0 + np.exp(np.minimum(4.0 * (x - 3.0), 700.0))),
    "two-bump": lambda x: np.exp(-((x - 4.0) ** 2)) + 0.5 * np.exp(-x * x),
}


def check_solver_range(p: float, N: float) -> None:
    if not P_MIN <= p < P_MAX:
        raise DomainError(f"p out of range [2, 7/3): {p}")
    if not (N > 0 and np.isfinite(N)):
        raise DomainError(f"mass must be positive, got {N}")


@dataclass(frozen=True, eq=False)
class GroundState:
    """Converged (Q, λ) pair on a fixed grid."""

    q: RadialProfile
    lam: float
    p: float
    mass: float
    energy: EnergyBreakdown
    eq_residual: float
    method: str
    iterations: int

    @property
    def grid(self) -> RadialGrid:
        return self.q.grid

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "p": self.p,
            "mass": self.mass,
            "lambda": self.lam,
            "energy": self.energy.to_dict(),
            "grid": {"n": g.n, "h": g.h, "r_max": g.r_max},
            "method": self.method,
            "iterations": self.iterations,
            "eq_residual": self.eq_residual,
            "q": self.q.values,
        }

    def to_json(self) -> str:
        return jsonio.dumps(self.to_dict())

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_dict(cls, d: dict) -> "GroundState":
        try:
            grid = RadialGrid(int(d["grid"]["n"]), float(d["grid"]["h"]))
            e = d["energy"]
            p = float(d["p"])
            q = RadialProfile(grid, d["q"])
            en = EnergyBreakdown(float(e["kinetic"]), float(e["coulomb"]), float(e["total"]),
                                 float(d["mass"]) ** 2, p)
            return cls(q, float(d["lambda"]), p, float(d["mass"]), en,
                       float(d["eq_residual"]), str(d["method"]), int(d["iterations"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed ground-state document: {exc}") from exc

    @classmethod
    def load(cls, path) -> "GroundState":
        return cls.from_dict(jsonio.load(path))


def euler_lagrange_gradient(u: RadialProfile, p: float) -> RadialProfile:
    """Exact gradient of the discrete E_p in the trapezoid inner product.

    Interior nodes carry ``-Δu - (|x|⁻¹∗|u|^p)|u|^{p-2}u``; the boundary
    node carries the one-sided term of its half cell.
    """
    grid = u.grid
    r = grid.r
    h = grid.h
    w = r * u.values
    lap = np.empty(grid.n)
    lap[:-1] = second_difference(w, h) / r[:-1]
    lap[-1] = 2.0 * (w[-1] - w[-2]) / (h * h * r[-1])
    a = np.abs(u.values)
    V = _multipole_values(grid, a**p, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        nl = np.where(a > 0, V * a ** (p - 1) * np.sign(u.values), 0.0)
    return u.with_values(lap - nl)


def multiplier(u: RadialProfile, g: RadialProfile, N: float) -> float:
    return -inner(g, u) / (N * N)


def relative_residual(u: RadialProfile, g: RadialProfile, lam: float) -> float:
    """sup |∇E + λu| over interior nodes, relative to |λ|·‖u‖_∞."""
    res = g.values[:-1] + lam * u.values[:-1]
    scale = abs(lam) * np.max(np.abs(u.values))
    return float(np.max(np.abs(res)) / scale) if scale > 0 else np.inf


def auto_grid(p: float, N: float, cfg: SolverConfig) -> RadialGrid:
    """Solve grid: ``cfg.r_max`` if set, else ``r_max_scale`` Gaussian widths."""
    r_max = cfg.r_max if cfg.r_max is not None else cfg.r_max_scale / gaussian_trial_scale(p, N)
    return make_grid(cfg.n, r_max)


def normalize(values: np.ndarray, grid: RadialGrid, N: float) -> RadialProfile:
    v = np.abs(np.asarray(values, dtype=float))
    v[-1] = 0.0
    m = float(np.dot(grid.weights, v * v))
    if not m > 0:
        raise DomainError("initial profile vanishes on the grid")
    return RadialProfile(grid, v * (N / np.sqrt(m)))


def initial_guess(grid: RadialGrid, p: float, N: float, shape="gaussian") -> RadialProfile:
    """Start profile of mass ``N``.

    ``shape`` is a name from :data:`START_SHAPES`, evaluated in the scaled
    variable ``x = t r`` with ``t`` the optimal Gaussian inverse width, or a
    :class:`RadialProfile` to warm-start from (resampled onto ``grid``).
    """
    if isinstance(shape, RadialProfile):
        return normalize(interpolate(shape, grid).values, grid, N)
    try:
        fn = START_SHAPES[shape]
    except KeyError:
        raise DomainError(f"unknown start shape {shape!r}; choose from {sorted(START_SHAPES)}") from None
    t = gaussian_trial_scale(p, N)
    return normalize(fn(t * grid.r), grid, N)


def _finish(u, p, N, method, iterations) -> GroundState:
    g = euler_lagrange_gradient(u, p)
    lam = multiplier(u, g, N)
    en = energy(u, p)
    return GroundState(u, float(lam), float(p), float(N), en,
                       relative_residual(u, g, lam), method, int(iterations))


def solve_flow(p: float, N: float = 1.0, cfg: SolverConfig | None = None, initial="gaussian",
               callback: Callable | None = None, grid: RadialGrid | None = None) -> GroundState:
    """Minimize E_p on the mass sphere by a preconditioned projected gradient flow.

    Each step moves along ``-(−Δ+σ)⁻¹(∇E + λu)`` projected tangent to the
    sphere, takes the absolute value and renormalizes. Steps are accepted
    by an Armijo test on ``E + (λ/2)(‖u‖² - N²)``, whose increment is formed
    without cancellation so the test stays meaningful down to residuals of
    order 1e-10.

    Parameters
    ----------
    callback : callable, optional
        Called after every accepted step as
        ``callback(iteration, u, lam, residual, energy_change)``.

    Raises
    ------
    ConvergenceError
        If the residual stays above ``cfg.flow_tol`` after ``cfg.max_iter``
        steps or backtracking is exhausted.
    """
    check_solver_range(p, N)
    cfg = cfg or SolverConfig()
    grid = grid or auto_grid(p, N, cfg)
    u = initial_guess(grid, p, N, initial)
    t = gaussian_trial_scale(p, N)
    g = euler_lagrange_gradient(u, p)
    lam = multiplier(u, g, N)
    sigma = max(lam, t * t)
    tau = cfg.tau0
    rel = relative_residual(u, g, lam)
    for it in range(cfg.max_iter):
        if rel < cfg.flow_tol:
            return _finish(u, p, N, "flow", it)
        res = g + lam * u
        d = -apply_resolvent(res, sigma).values
        d -= np.dot(grid.weights, d * u.values) / (N * N) * u.values
        slope = float(np.dot(grid.weights, g.values * d))
        for _ in range(cfg.max_halvings + 1):
            un = normalize(u.values + tau * d, grid, N)
            delta = un.values - u.values
            dL = energy_difference(u, un, p) + 0.5 * lam * float(
                np.dot(grid.weights, delta * (2.0 * u.values + delta)))
            if dL <= cfg.armijo * tau * slope:
                break
            tau *= 0.5
        else:
            raise ConvergenceError(
                f"flow backtracking exhausted at iteration {it} (residual {rel:.3e})",
                state=u, iterations=it)
        dE = energy_difference(u, un, p)
        u = un
        tau = min(2.0 * tau, cfg.tau_max)
        g = euler_lagrange_gradient(u, p)
        lam = multiplier(u, g, N)
        rel = relative_residual(u, g, lam)
        if callback is not None:
            callback(it + 1, u, lam, rel, dE)
    if rel < cfg.flow_tol:
        return _finish(u, p, N, "flow", cfg.max_iter)
    raise ConvergenceError(f"flow did not converge in {cfg.max_iter} steps (residual {rel:.3e})",
                           state=u, iterations=cfg.max_iter)


def fixpoint_map(u: RadialProfile, p: float, lam: float) -> RadialProfile:
    """(−Δ+λ)⁻¹ (V_u u^{p-1}) for a positive profile ``u``."""
    V = newton_potential(abs(u) ** p)
    return apply_resolvent(V * abs(u) ** (p - 1), lam)


def solve_fixpoint(p: float, N: float = 1.0, cfg: SolverConfig | None = None, initial="gaussian",
                   callback: Callable | None = None, grid: RadialGrid | None = None) -> GroundState:
    """Iterate u ← N·T(u)/‖T(u)‖ with T(u) = (−Δ+λ_u)⁻¹(V_u u^{p-1}).

    λ_u is the multiplier of the current iterate. Stops when successive
    iterates differ by at most ``cfg.fixpoint_tol·‖u‖_∞``.

    Raises
    ------
    ConvergenceError
        If λ leaves (0, ∞) or the iteration has not settled after
        ``cfg.max_iter`` steps.
    """
    check_solver_range(p, N)
    cfg = cfg or SolverConfig()
    grid = grid or auto_grid(p, N, cfg)
    u = initial_guess(grid, p, N, initial)
    diff = np.inf
    for it in range(1, cfg.max_iter + 1):
        lam = multiplier(u, euler_lagrange_gradient(u, p), N)
        if not (lam > 0 and np.isfinite(lam)):
            raise ConvergenceError(f"fixpoint multiplier left (0, inf): {lam}", state=u, iterations=it)
        un = normalize(fixpoint_map(u, p, lam).values, grid, N)
        diff = float(np.max(np.abs(un.values - u.values)) / np.max(un.values))
        u = un
        if callback is not None:
            callback(it, u, lam, diff, None)
        if diff <= cfg.fixpoint_tol:
            return _finish(u, p, N, "fixpoint", it)
    raise ConvergenceError(f"fixpoint did not settle in {cfg.max_iter} steps (step {diff:.3e})",
                           state=u, iterations=cfg.max_iter)


def solve(p: float, N: float = 1.0, cfg: SolverConfig | None = None, method: str = "flow",
          **kw) -> GroundState:
    if method == "flow":
        return solve_flow(p, N, cfg, **kw)
    if method == "fixpoint":
        return solve_fixpoint(p, N, cfg, **kw)
    raise DomainError(f"unknown method {method!r}; use 'flow' or 'fixpoint'")


def fixpoint_residual(gs: GroundState) -> float:
    """‖Q - (−Δ+λ)⁻¹(V_Q Q^{p-1})‖_∞ / ‖Q‖_∞."""
    T = fixpoint_map(gs.q, gs.p, gs.lam)
    return float(np.max(np.abs(T.values - gs.q.values)) / np.max(gs.q.values))


def resample(gs: GroundState, grid: RadialGrid) -> RadialProfile:
    """Ground-state profile on another grid (cubic spline in r·Q)."""
    return interpolate(gs.q, grid)


def rescale_mass(q: RadialProfile, p: float, N_from: float, N_to: float, grid=None) -> RadialProfile:
    """Map a mass-``N_from`` solution to the mass-``N_to`` solution.

    With ``k = N_to/N_from`` the map is ``k·s^{3/2} u(s x)``, a
    mass-preserving dilation by ``s = k^{2(p-1)/(7-3p)}`` times ``k``.
    """
    k = N_to / N_from
    s = k ** (2 * (p - 1) / (7 - 3 * p))
    return dilate(q, s, grid) * k


@dataclass(frozen=True)
class PohozaevReport:
    k_predicted: float
    d_predicted: float
    k_actual: float
    d_actual: float
    rel_errors: tuple[float, float]
    lambda_from_m: float
    lambda_rel_error: float

    def to_dict(self) -> dict:
        return {
            "k_predicted": self.k_predicted, "d_predicted": self.d_predicted,
            "k_actual": self.k_actual, "d_actual": self.d_actual,
            "rel_errors": list(self.rel_errors),
            "lambda_from_m": self.lambda_from_m, "lambda_rel_error": self.lambda_rel_error,
        }


def pohozaev_report(gs: GroundState) -> PohozaevReport:
    """Compare K, D and λ with their closed forms in terms of λ and m.

    Energies are divided by N², which is the same as comparing at unit
    mass after the exact mass rescaling.
    """
    p, lam, N2 = gs.p, gs.lam, gs.mass**2
    K = gs.energy.kinetic / N2
    D = gs.energy.coulomb / N2
    m = gs.energy.total / N2
    kp = (3 * p - 5) * lam / (2 * (5 - p))
    dp = lam / (5 - p)
    lam_m = -2 * (5 - p) / (7 - 3 * p) * m
    rel = (abs(K - kp) / abs(kp), abs(D - dp) / abs(dp))
    return PohozaevReport(kp, dp, K, D, rel, lam_m, abs(lam_m - lam) / abs(lam))


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    window: tuple[float, float]
    r2: float
    power_bound_ok: bool
    c0_v_bound_ok: bool
    sqrt_lambda: float
    power_constant: float = field(default=np.nan)
    v_constant: float = field(default=np.nan)

    @property
    def gamma_ratio(self) -> float:
        return self.gamma / self.sqrt_lambda

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "window": list(self.window), "r2": self.r2,
            "power_bound_ok": self.power_bound_ok, "c0_v_bound_ok": self.c0_v_bound_ok,
            "sqrt_lambda": self.sqrt_lambda, "gamma_over_sqrt_lambda": self.gamma_ratio,
        }


def _bound_holds(r, f, exponent, r_a) -> tuple[bool, float]:
    """Fit C = sup r^k f on [1, r_a] and test f ≤ C r^{-k} for r ≥ 1."""
    tail = r >= 1.0
    if not np.any(tail):
        return True, 0.0
    scaled = r[tail] ** exponent * f[tail]
    head = r[tail] <= max(r_a, r[tail][0])
    C = float(np.max(scaled[head]))
    return bool(np.all(scaled <= C * (1 + 1e-12))), C


def decay_fit(gs: GroundState, window=(0.4, 0.8)) -> DecayFit:
    """Exponential rate of the tail and the power-law envelope flags.

    ``gamma`` is minus the least-squares slope of log Q on
    ``window·r_max``. The r⁻⁴ and r^{-3/4} envelopes take their constant
    as the largest value of r^k·f between r = 1 and the start of the fit
    window, then must hold on all of r ≥ 1.

    Raises
    ------
    InsufficientDecayError
        If Q falls by less than a factor 100 across the window.
    """
    grid = gs.grid
    r = grid.r
    q = gs.q.values
    ra, rb = window[0] * grid.r_max, window[1] * grid.r_max
    ia, ib = int(round(ra / grid.h)) - 1, int(round(rb / grid.h)) - 1
    if not (q[ia] > 0 and q[ib] > 0) or q[ib] / q[ia] >= 1e-2:
        raise InsufficientDecayError(
            f"Q drops only by {q[ib] / q[ia] if q[ia] > 0 else np.nan:.3e} over the fit window; "
            "increase r_max")
    sel = slice(ia, ib + 1)
    x, y = r[sel], np.log(q[sel])
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    r2 = 1.0 - float(np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2))
    power_ok, Cq = _bound_holds(r, q, 4.0, ra)
    V = newton_potential(gs.q ** gs.p).values
    v_ok, Cv = _bound_holds(r, V, 0.75, ra)
    return DecayFit(float(-slope), (float(x[0]), float(x[-1])), r2, power_ok, v_ok,
                    float(np.sqrt(gs.lam)), Cq, Cv)
