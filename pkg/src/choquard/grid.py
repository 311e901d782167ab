"""Radial grids, quadrature, differentiation and the sector Laplacian.

Every field lives on a uniform mesh ``r_i = i*h`` (i = 1..n) that excludes
the origin. Boundary-value problems are posed for ``w = r*f`` with
``w(0) = 0`` and a Dirichlet condition at ``r_max = n*h``, so node ``n``
is the boundary node and operators act on the ``n - 1`` interior nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DomainError

MIN_NODES = 16


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial mesh with ``n`` nodes and spacing ``h``."""

    n: int
    h: float

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise DomainError(f"grid needs at least {MIN_NODES} nodes, got {self.n}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise DomainError(f"grid spacing must be positive, got {self.h}")

    @property
    def r_max(self) -> float:
        return self.n * self.h

    @cached_property
    def r(self) -> np.ndarray:
        nodes = np.arange(1, self.n + 1) * self.h
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid measure 4πr²·h per node (half weight at the boundary node).

        This is the inner product under which the discrete Laplacian,
        Newton kernel and linearized operators are symmetric.
        """
        return quadrature(self, "trapezoid").weights

    def profile(self, values) -> "RadialProfile":
        return RadialProfile(self, values)

    def sample(self, fn) -> "RadialProfile":
        return RadialProfile(self, fn(self.r))


def make_grid(n: int, r_max: float) -> RadialGrid:
    """Grid of ``n`` nodes on (0, r_max] with spacing ``r_max / n``."""
    if int(n) != n or n < MIN_NODES:
        raise DomainError(f"grid needs an integer n >= {MIN_NODES}, got {n}")
    if not (r_max > 0 and np.isfinite(r_max)):
        raise DomainError(f"r_max must be positive and finite, got {r_max}")
    return RadialGrid(int(n), float(r_max) / int(n))


class RadialProfile:
    """A real radial function sampled on a :class:`RadialGrid`.

    Values are stored read-only. Arithmetic with scalars or with profiles on
    the same grid returns new profiles.
    """

    __slots__ = ("grid", "values")
    # make ndarray * profile dispatch to the reflected profile operators
    __array_ufunc__ = None

    def __init__(self, grid: RadialGrid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.n,):
            raise DomainError(f"expected {grid.n} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("profile values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile(self.grid, values)

    def __repr__(self):
        return f"RadialProfile(n={self.grid.n}, r_max={self.grid.r_max:g})"

    def __len__(self):
        return self.grid.n

    def _other(self, other):
        if isinstance(other, RadialProfile):
            if other.grid != self.grid:
                raise DomainError("profiles live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __abs__(self):
        return self.with_values(np.abs(self.values))

    def __pow__(self, q):
        return self.with_values(self.values**q)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Node weights for ∫_{R³} f dx = 4π ∫ r² f dr, the 4πr² factor folded in."""

    kind: str
    weights: np.ndarray


@lru_cache(maxsize=64)
def _rule(n: int, h: float, kind: str) -> QuadratureRule:
    r = np.arange(1, n + 1) * h
    if kind == "trapezoid":
        s = np.ones(n)
        s[-1] = 0.5
    elif kind == "simpson":
        # nodes 0..n including the origin, whose r² weight vanishes
        s = np.zeros(n + 1)
        m = n if n % 2 == 0 else n - 3
        s[0:m + 1:2] += 2.0 / 3.0
        s[1:m:2] += 4.0 / 3.0
        s[0] -= 1.0 / 3.0
        s[m] -= 1.0 / 3.0
        if m < n:
            s[m:n + 1] += np.array([3, 9, 9, 3]) / 8.0
        s = s[1:]
    else:
        raise DomainError(f"unknown quadrature kind {kind!r}")
    w = 4.0 * np.pi * r * r * h * s
    w.setflags(write=False)
    return QuadratureRule(kind, w)


def quadrature(grid: RadialGrid, kind: str = "simpson") -> QuadratureRule:
    return _rule(grid.n, grid.h, kind)


def integrate(f: RadialProfile, rule: QuadratureRule | str = "simpson") -> float:
    """Approximate ∫_{|x|<r_max} f(|x|) dx."""
    if isinstance(rule, str):
        rule = quadrature(f.grid, rule)
    return float(np.dot(rule.weights, f.values))


def inner(f: RadialProfile, g: RadialProfile) -> float:
    """Discrete L² pairing with the trapezoid measure."""
    if f.grid != g.grid:
        raise DomainError("profiles live on different grids")
    return float(np.dot(f.grid.weights, f.values * g.values))


def norm_Lq(f: RadialProfile, q: float, rule: QuadratureRule | str = "simpson") -> float:
    """‖f‖_q; ``q = inf`` gives the maximum over the nodes."""
    if not q >= 1:
        raise DomainError(f"norm exponent must be >= 1, got {q}")
    a = np.abs(f.values)
    if np.isinf(q):
        return float(a.max())
    return integrate(f.with_values(a**q), rule) ** (1.0 / q)


def derivative(f: RadialProfile, even: bool = False) -> RadialProfile:
    """d f / d r by centered differences.

    With ``even=False`` the end nodes use one-sided differences. With
    ``even=True`` the value at the origin is extrapolated from the even
    expansion a + b r² + c r⁴, so that node 1 also gets a centered
    stencil; use this for smooth radial fields that are later
    differentiated again.
    """
    v = f.values
    h = f.grid.h
    if not even:
        return f.with_values(np.gradient(v, h, edge_order=1))
    # even extrapolation through nodes 1,2,3 (r = h, 2h, 3h)
    f0 = 1.5 * v[0] - 0.6 * v[1] + 0.1 * v[2]
    ext = np.concatenate(([f0], v))
    d = np.empty_like(v)
    d[:-1] = (ext[2:] - ext[:-2]) / (2 * h)
    d[-1] = (v[-1] - v[-2]) / h
    return f.with_values(d)


def norm_H1(f: RadialProfile, rule: QuadratureRule | str = "simpson") -> float:
    """‖f‖₂ + ‖∇f‖₂."""
    return norm_Lq(f, 2, rule) + norm_Lq(derivative(f), 2, rule)


def sector_laplacian(grid: RadialGrid, ell: int = 0) -> sp.csr_matrix:
    """Tridiagonal matrix of -w'' + ℓ(ℓ+1)w/r² on the interior nodes.

    Acts on ``w = r*f`` with w(0) = 0 and w(r_max) = 0; shape (n-1, n-1).
    """
    if ell < 0 or int(ell) != ell:
        raise DomainError(f"sector index must be a non-negative integer, got {ell}")
    m = grid.n - 1
    r = grid.r[:m]
    h2 = grid.h**2
    main = 2.0 / h2 + ell * (ell + 1) / r**2
    off = np.full(m - 1, -1.0 / h2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def second_difference(w: np.ndarray, h: float) -> np.ndarray:
    """-w'' at the interior nodes for a full-length ``w`` with w(0) = 0.

    The last entry of ``w`` supplies the boundary value.
    """
    out = 2.0 * w[:-1]
    out[1:] -= w[:-2]
    out -= w[1:]
    return out / (h * h)


def neg_laplacian(f: RadialProfile, ell: int = 0) -> RadialProfile:
    """-Δ_ℓ f at the interior nodes; the boundary node is set to zero."""
    r = f.grid.r
    w = r * f.values
    out = np.zeros(f.grid.n)
    out[:-1] = second_difference(w, f.grid.h) / r[:-1]
    if ell:
        out[:-1] += ell * (ell + 1) * f.values[:-1] / r[:-1] ** 2
    return f.with_values(out)


def interpolate(f: RadialProfile, grid: RadialGrid) -> RadialProfile:
    """Resample ``f`` onto ``grid`` with a cubic spline in ``w = r*f``.

    The spline is pinned at w(0) = 0; points beyond the source radius
    receive zero.
    """
    from scipy.interpolate import CubicSpline

    if grid == f.grid:
        return f
    src = np.concatenate(([0.0], f.grid.r))
    spline = CubicSpline(src, np.concatenate(([0.0], f.grid.r * f.values)))
    x = grid.r
    w = np.where(x <= f.grid.r_max, spline(np.minimum(x, f.grid.r_max)), 0.0)
    return RadialProfile(grid, w / x)


def write_profile_csv(f: RadialProfile, path) -> None:
    """Write ``r,value`` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write("r,value\n")
        for r, v in zip(f.grid.r, f.values):
            fh.write(f"{r:.17g},{v:.17g}\n")


def read_profile_csv(path) -> RadialProfile:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip() for c in header] != ["r", "value"]:
            raise DomainError(f"expected header 'r,value', got {','.join(header)!r}")
        rows = [(float(a), float(b)) for a, b in reader]
    r = np.array([a for a, _ in rows])
    values = np.array([b for _, b in rows])
    grid = RadialGrid(len(r), float(r[0]))
    if not np.allclose(r, grid.r, rtol=1e-12, atol=0):
        raise DomainError("CSV radii are not a uniform grid starting at h")
    return RadialProfile(grid, values)
