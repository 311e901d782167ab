"""Energy functionals, the scaling orbit and the a-priori constants.

``K(u) = ½∫|∇u|²`` is evaluated with forward differences of ``w = r u``
on cell midpoints, which keeps it nonnegative and makes its exact
gradient the three-point Laplacian used by the solvers. ``D_p`` is the
Coulomb self-energy of ``|u|^p``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .errors import DomainError
from .grid import RadialProfile, norm_Lq
from .potential import _multipole_values, coulomb_energy

P_LOW = 5.0 / 3.0
P_HIGH = 7.0 / 3.0


def check_subcritical(p: float) -> None:
    if not P_LOW < p < P_HIGH:
        raise DomainError(f"p must lie in (5/3, 7/3), got {p}")


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    coulomb: float
    total: float
    mass: float
    p: float

    def to_dict(self) -> dict:
        return {"kinetic": self.kinetic, "coulomb": self.coulomb, "total": self.total}


def kinetic_energy(u: RadialProfile) -> float:
    """K(u) = 2π ∫ (w')² dr with w = r u and w(0) = 0."""
    h = u.grid.h
    w = u.grid.r * u.values
    dw = np.diff(w, prepend=0.0)
    return float(2.0 * np.pi / h * np.dot(dw, dw))


def mass(u: RadialProfile) -> float:
    """‖u‖₂² in the trapezoid measure used by the solvers."""
    return float(np.dot(u.grid.weights, u.values * u.values))


def energy(u: RadialProfile, p: float) -> EnergyBreakdown:
    """E_p(u) = K(u) - D_p(u) together with its parts."""
    check_subcritical(p)
    K = kinetic_energy(u)
    D = coulomb_energy(u, p)
    return EnergyBreakdown(K, D, K - D, mass(u), float(p))


def energy_difference(u: RadialProfile, v: RadialProfile, p: float) -> float:
    """E_p(v) - E_p(u) without subtracting two large energies.

    The kinetic part is expanded exactly as a quadratic form. For the
    Coulomb part, ``|v|^p - |u|^p`` is formed as ``|u|^p expm1(p log1p(δ/u))``
    wherever the relative change is small, and the bilinear identity
    ``D(v) - D(u) = <f_v - f_u, V(f_v + f_u)>/(2p)`` avoids a second
    cancellation.
    """
    grid = u.grid
    h = grid.h
    r = grid.r
    d = v.values - u.values
    w = r * u.values
    dw = r * d
    a = np.diff(w, prepend=0.0)
    b = np.diff(dw, prepend=0.0)
    dK = 2.0 * np.pi / h * (2.0 * np.dot(a, b) + np.dot(b, b))
    au = np.abs(u.values)
    f = au**p
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.abs(v.values) / au - 1.0
        safe = (au > 0) & (np.abs(q) < 0.5)
        small = f * np.expm1(p * np.log1p(np.where(safe, q, 0.0)))
    df = np.where(safe, small, np.abs(v.values) ** p - f)
    Vs = _multipole_values(grid, 2.0 * f + df, 0)
    dD = float(np.dot(grid.weights, df * Vs)) / (2.0 * p)
    return dK - dD


def c1(p: float) -> float:
    """Constant of the scaling characterization of the minimal energy."""
    check_subcritical(p)
    a = 3 * p - 5
    return (7 - 3 * p) / a * (a / 2) ** (2 / (7 - 3 * p))


def scale_minimum(K: float, D: float, p: float) -> tuple[float, float]:
    """Minimize t²K - t^{3p-5}D over t > 0; returns (t_star, minimum)."""
    check_subcritical(p)
    if not (K > 0 and D > 0):
        raise DomainError("scale minimization needs K > 0 and D > 0")
    a = 3 * p - 5
    e = 1.0 / (7 - 3 * p)
    t = (a * D / (2 * K)) ** e
    value = -c1(p) * (D * D / K**a) ** e
    return t, value


def scale_minimize(u: RadialProfile, p: float) -> tuple[float, float]:
    """Best L²-preserving dilation ``t^{3/2}u(t·)`` of ``u`` and its energy."""
    return scale_minimum(kinetic_energy(u), coulomb_energy(u, p), p)


def dilate(u: RadialProfile, t: float, grid=None) -> RadialProfile:
    """Mass-preserving dilation ``t^{3/2} u(t r)`` resampled on ``grid``.

    Values are reconstructed from a cubic spline of ``w = r u`` pinned at
    the origin; points mapped beyond the source radius receive zero.
    """
    if not t > 0:
        raise DomainError(f"dilation factor must be positive, got {t}")
    grid = u.grid if grid is None else grid
    src = u.grid
    spline = CubicSpline(np.concatenate(([0.0], src.r)),
                         np.concatenate(([0.0], src.r * u.values)))
    x = t * grid.r
    inside = x <= src.r_max
    w = np.where(inside, spline(np.minimum(x, src.r_max)), 0.0)
    return RadialProfile(grid, t**1.5 * w / x)


def mass_scaling_exponent(p: float) -> float:
    """Exponent of m(N, p) = m(1, p) N^k."""
    check_subcritical(p)
    return (10 - 2 * p) / (7 - 3 * p)


def gaussian_trial_scale(p: float, N: float = 1.0) -> float:
    """Energy-optimal inverse width ``t`` of ``c e^{-(t r)²/2}`` at mass ``N``.

    Closed form from K = (3/4)π^{3/2}c² and the Gaussian Coulomb integral
    D = c^{2p} √2 π^{5/2} (p/2)^{-5/2} / (2p) at unit width.
    """
    check_subcritical(p)
    if not N > 0:
        raise DomainError(f"mass must be positive, got {N}")
    c2 = N * N / np.pi**1.5
    K = 0.75 * np.pi**1.5 * c2
    D = c2**p * np.sqrt(2.0) * np.pi**2.5 * (p / 2) ** -2.5 / (2 * p)
    return float(((3 * p - 5) * D / (2 * K)) ** (1 / (7 - 3 * p)))


@dataclass(frozen=True)
class DiagnosticConstants:
    """Constants A (HLS) and B (Sobolev) entering the lower bound on m(p)."""

    A: float
    B: float

    def __post_init__(self):
        if not (self.A > 0 and self.B > 0):
            raise DomainError("diagnostic constants must be positive")


def c2_lower_bound(p: float, consts: DiagnosticConstants) -> float:
    """C₂(p) such that m(p) ≥ -C₂(p) given valid A and B."""
    check_subcritical(p)
    a = 3 * p - 5
    base = a * consts.A * (np.sqrt(2.0) * consts.B) ** a / (4 * p)
    return (7 - 3 * p) / a * base ** (2 / (7 - 3 * p))


def hls_quotient(u: RadialProfile, p: float) -> float:
    """∬|u|^p|u|^p/|x-y| divided by ‖u‖_{6p/5}^{2p}."""
    num = 2 * p * coulomb_energy(u, p)
    den = norm_Lq(u, 6 * p / 5) ** (2 * p)
    return num / den


def sobolev_quotient(u: RadialProfile) -> float:
    """‖u‖₆ / ‖∇u‖₂."""
    return norm_Lq(u, 6) / np.sqrt(2 * kinetic_energy(u))


def sharp_sobolev_constant() -> float:
    """‖u‖₆/‖∇u‖₂ at the Aubin-Talenti profile (1 + r²)^{-1/2}, by quadrature."""
    l6 = 4 * np.pi * quad(lambda r: r * r * (1 + r * r) ** -3, 0, np.inf)[0]
    grad = 4 * np.pi * quad(lambda r: r**4 * (1 + r * r) ** -3, 0, np.inf)[0]
    return l6 ** (1 / 6) / np.sqrt(grad)


def gaussian_hls_quotient() -> float:
    """HLS quotient of any Gaussian density; it is dilation invariant.

    ∬e^{-|x|²-|y|²}/|x-y| = √2 π^{5/2} and ‖e^{-|x|²}‖_{6/5}² = (5π/6)^{5/2}.
    """
    return np.sqrt(2.0) * np.pi**2.5 / (5 * np.pi / 6) ** 2.5


def calibrate_constants(states=(), p: float = 2.0, inflate: float = 1.5) -> DiagnosticConstants:
    """Empirical A and sharp B for the lower-bound diagnostic.

    A is the largest HLS quotient seen over Gaussians and the supplied
    profiles, multiplied by ``inflate``. It is an estimate, not a proven
    upper bound. B is the sharp Sobolev constant.
    """
    best = gaussian_hls_quotient()
    for s in states:
        q = getattr(s, "q", s)
        best = max(best, hls_quotient(q, getattr(s, "p", p)))
    return DiagnosticConstants(A=inflate * best, B=sharp_sobolev_constant())


def gagliardo_bound(u: RadialProfile, p: float, consts: DiagnosticConstants) -> tuple[float, float]:
    """Left and right sides of 2p D_p(u) ≤ A B^{3p-5} ‖u‖₂^{5-p} ‖∇u‖₂^{3p-5}."""
    lhs = 2 * p * coulomb_energy(u, p)
    l2 = np.sqrt(mass(u))
    g2 = np.sqrt(2 * kinetic_energy(u))
    rhs = consts.A * consts.B ** (3 * p - 5) * l2 ** (5 - p) * g2 ** (3 * p - 5)
    return lhs, rhs
