"""Linearized operators L₊ and L₋ at a ground state, sector by sector.

Perturbations ``ξ = f(r) Y_ℓm`` reduce both operators to radial ones.
They are discretized on the interior nodes in the variable ``w = r f``,
where the trapezoid inner product becomes ``4πh`` times the Euclidean
one, so the matrices are symmetric and ``eigh`` applies directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import LinAlgError, eigh, null_space
from scipy.sparse.linalg import LinearOperator, gmres

from .config import SolverConfig, SpectralConfig
from .errors import DomainError, SpectralError
from .grid import RadialProfile, derivative, inner, neg_laplacian, sector_laplacian
from .potential import apply_resolvent, kink_correction, multipole_potential, newton_potential
from .solver import GroundState, solve_flow

SECTORS = (0, 1, 2)
KINDS = ("Lplus", "Lminus")
MAX_DENSE = 4000


def _check(ell, kind):
    if ell not in SECTORS:
        raise DomainError(f"sector out of verified scope: ell={ell} (supported: 0, 1, 2)")
    if kind not in KINDS:
        raise DomainError(f"unknown operator kind {kind!r}; use 'Lplus' or 'Lminus'")


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """Dense symmetric matrix of L₊ or L₋ in sector ℓ (w-coordinates)."""

    ell: int
    kind: str
    matrix: np.ndarray
    gs: GroundState | None
    lam: float
    p: float


def local_potential(gs: GroundState) -> np.ndarray:
    """V_Q Q^{p-2} at every node."""
    V = newton_potential(gs.q ** gs.p).values
    return V * gs.q.values ** (gs.p - 2)


def assemble(gs: GroundState, ell: int, kind: str = "Lplus") -> SectorOperator:
    """Matrix of the sector-ℓ operator on the interior nodes of ``gs.grid``.

    The nonlocal part of L₊ is ``p·(4πh a_i G^ℓ_ij a_j + κ Q_i^{2p-2} δ_ij)``
    with ``a = r Q^{p-1}``, the multipole kernel ``G^ℓ`` and the diagonal
    quadrature correction ``κ``, i.e. exactly the discrete map
    ``ξ ↦ p W_ℓ[Q^{p-1}ξ] Q^{p-1}``.
    """
    _check(ell, kind)
    grid = gs.grid
    m = grid.n - 1
    if m > MAX_DENSE:
        raise DomainError(f"dense assembly limited to {MAX_DENSE + 1} nodes, grid has {grid.n}; "
                          "re-solve on a coarser spectral grid first")
    p, lam = gs.p, gs.lam
    r = grid.r[:m]
    q = gs.q.values[:m]
    M = sector_laplacian(grid, ell).toarray()
    U = local_potential(gs)[:m]
    if kind == "Lminus":
        M[np.diag_indices(m)] += lam - U
        return SectorOperator(ell, kind, M, gs, lam, p)
    M[np.diag_indices(m)] += lam - (p - 1) * U
    a = r * q ** (p - 1)
    lo = np.minimum.outer(r, r)
    hi = np.maximum.outer(r, r)
    G = lo**ell / hi ** (ell + 1) / (2 * ell + 1) if ell else 1.0 / hi
    B = 4 * np.pi * grid.h * (a[:, None] * G * a[None, :])
    B[np.diag_indices(m)] += kink_correction(grid) * q ** (2 * p - 2)
    M -= p * B
    M = 0.5 * (M + M.T)
    return SectorOperator(ell, kind, M, gs, lam, p)


def apply_linearized(gs: GroundState, xi: RadialProfile, ell: int = 0, kind: str = "Lplus") -> RadialProfile:
    """Matrix-free action of L₊ or L₋ on ``ξ`` (boundary node returned as 0)."""
    _check(ell, kind)
    p, lam = gs.p, gs.lam
    U = local_potential(gs)
    coef = (p - 1) if kind == "Lplus" else 1.0
    out = neg_laplacian(xi, ell).values + (lam - coef * U) * xi.values
    if kind == "Lplus":
        qp = gs.q.values ** (p - 1)
        out = out - p * multipole_potential(xi * qp, ell).values * qp
    out[-1] = 0.0
    return xi.with_values(out)


def _to_profile(grid, w: np.ndarray) -> RadialProfile:
    """Euclidean-unit vector in w-space to an L²-unit radial profile."""
    f = np.zeros(grid.n)
    f[:-1] = w / grid.r[:-1] / np.sqrt(4 * np.pi * grid.h)
    return RadialProfile(grid, f)


def _orient(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: list
    kernel_count: int
    gap: float
    ell: int
    kind: str
    p: float
    lam: float
    threshold: float
    cosine_to_Qprime: float | None = None

    def to_dict(self) -> dict:
        d = {
            "p": self.p, "lambda": self.lam, "ell": self.ell, "kind": self.kind,
            "eigenvalues": list(self.eigenvalues), "kernel_count": self.kernel_count,
            "gap": self.gap, "kernel_threshold": self.threshold,
        }
        if self.ell == 1:
            d["cosine_to_Qprime"] = self.cosine_to_Qprime
        return d


def _lowest(M: np.ndarray, k: int):
    k = min(k, M.shape[0])
    try:
        return eigh(M, subset_by_index=[0, k - 1])
    except (LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolve failed: {exc}") from exc


def q_prime(q: RadialProfile) -> RadialProfile:
    return derivative(q, even=True)


def cosine(f: RadialProfile, g: RadialProfile) -> float:
    return abs(inner(f, g)) / np.sqrt(inner(f, f) * inner(g, g))


def low_spectrum(op: SectorOperator, k: int = 6, threshold: float | None = None) -> SpectrumReport:
    """The ``k`` lowest eigenpairs and the kernel classification.

    Eigenvectors are returned as L²-normalized profiles when the matrix
    was assembled on ``op.gs.grid``, else as raw unit vectors.

    ``threshold`` is an absolute bound on |μ| for kernel membership;
    the default is 10⁻³·λ.
    """
    if not 1 <= k:
        raise DomainError(f"k must be positive, got {k}")
    if k > op.matrix.shape[0]:
        raise DomainError(f"k={k} exceeds the operator dimension {op.matrix.shape[0]}")
    ev, vecs = _lowest(op.matrix, k)
    if not np.all(np.isfinite(ev)):
        raise SpectralError("eigensolve returned non-finite eigenvalues")
    thr = 1e-3 * op.lam if threshold is None else float(threshold)
    on_grid = op.gs is not None and op.matrix.shape[0] == op.gs.grid.n - 1
    vecs = [_orient(vecs[:, j]) for j in range(vecs.shape[1])]
    profiles = [_to_profile(op.gs.grid, v) for v in vecs] if on_grid else vecs
    kernel = np.abs(ev) <= thr
    rest = np.abs(ev[~kernel])
    gap = float(rest.min()) if rest.size else float("inf")
    cos = None
    if op.ell == 1 and on_grid:
        cos = cosine(profiles[0], q_prime(op.gs.q))
    return SpectrumReport(ev, profiles, int(kernel.sum()), gap, op.ell, op.kind,
                          op.p, op.lam, thr, cos)


def spectral_state(gs: GroundState, n: int) -> GroundState:
    """Re-solve the ground state on an ``n``-node grid with the same r_max."""
    if n == gs.grid.n:
        return gs
    cfg = SolverConfig(n=n, r_max=gs.grid.r_max)
    return solve_flow(gs.p, gs.mass, cfg, initial=gs.q)


def kernel_threshold(gs: GroundState, cfg: SpectralConfig | None = None) -> tuple[float, float]:
    """Kernel bound max(kernel_rel·λ, 10·shift) and the shift itself.

    ``shift`` is the change of the ℓ=1 near-zero eigenvalue when the
    spectral grid is doubled; it is 0 when refinement is disabled.
    """
    cfg = cfg or SpectralConfig()
    coarse = spectral_state(gs, cfg.spectral_n)
    floor = cfg.kernel_rel * coarse.lam
    if not cfg.refine:
        return floor, 0.0
    mu = _lowest(assemble(coarse, 1).matrix, 1)[0][0]
    fine = spectral_state(gs, 2 * cfg.spectral_n)
    mu2 = _lowest(assemble(fine, 1).matrix, 1)[0][0]
    shift = abs(mu - mu2)
    return max(floor, 10 * shift), shift


@dataclass(frozen=True, eq=False)
class NondegeneracyReport:
    reports: dict
    lminus: SpectrumReport
    threshold: float
    refinement_shift: float
    state: GroundState
    verdict: bool = field(default=False)

    @property
    def counts(self) -> tuple:
        return tuple(self.reports[ell].kernel_count for ell in SECTORS)

    def to_dict(self) -> dict:
        return {
            "p": self.state.p, "lambda": self.state.lam, "verdict": self.verdict,
            "kernel_counts": list(self.counts), "kernel_threshold": self.threshold,
            "gaps": [self.reports[ell].gap for ell in SECTORS],
        }


def nondegeneracy_report(gs: GroundState, cfg: SpectralConfig | None = None,
                         sectors=SECTORS) -> NondegeneracyReport:
    """Kernel counts of L₊ per sector; the verdict requires counts (0, 1, 0)."""
    cfg = cfg or SpectralConfig()
    for ell in sectors:
        _check(ell, "Lplus")
    thr, shift = kernel_threshold(gs, cfg)
    st = spectral_state(gs, cfg.spectral_n)
    reports = {ell: low_spectrum(assemble(st, ell, "Lplus"), cfg.k, thr) for ell in sectors}
    lminus = low_spectrum(assemble(st, 0, "Lminus"), cfg.k, thr)
    rep = NondegeneracyReport(reports, lminus, thr, shift, st)
    expected = {0: 0, 1: 1, 2: 0}
    ok = set(sectors) == set(SECTORS) and all(reports[e].kernel_count == expected[e] for e in SECTORS)
    return replace(rep, verdict=bool(ok))


def h1_form(grid, ell: int) -> np.ndarray:
    """Matrix of ‖f‖₂² + ‖∇(f Y_ℓm)‖₂² in w-coordinates, divided by 4πh."""
    H = sector_laplacian(grid, ell).toarray()
    H[np.diag_indices(grid.n - 1)] += 1.0
    return H


def deflation_space(st: GroundState, ell: int) -> np.ndarray | None:
    """w-coordinates of the directions excluded in sector ℓ.

    The ℓ=0 ground mode φ of L₊ and the translation mode Q' for ℓ=1;
    nothing for ℓ=2.
    """
    m = st.grid.n - 1
    if ell == 0:
        return _lowest(assemble(st, 0).matrix, 1)[1][:, 0]
    if ell == 1:
        return (st.grid.r * q_prime(st.q).values)[:m]
    return None


def coercivity_constant(gs: GroundState, cfg: SpectralConfig | None = None,
                        return_details: bool = False):
    """Largest c with <L₊η, η> ≥ c(‖η‖₂² + ‖∇η‖₂²) for η ⊥ span{φ, Q'}.

    Solved per sector as a generalized eigenproblem on the orthogonal
    complement of the deflated directions.

    Raises
    ------
    SpectralError
        If some deflated sector still has a nonpositive eigenvalue.
    """
    cfg = cfg or SpectralConfig()
    st = spectral_state(gs, cfg.spectral_n)
    values = {}
    bases = {}
    for ell in SECTORS:
        M = assemble(st, ell).matrix
        H = h1_form(st.grid, ell)
        v = deflation_space(st, ell)
        P = np.eye(M.shape[0]) if v is None else null_space(v[None, :])
        try:
            c = eigh(P.T @ M @ P, P.T @ H @ P, subset_by_index=[0, 0], eigvals_only=True)[0]
        except (LinAlgError, ValueError) as exc:
            raise SpectralError(f"coercivity eigensolve failed in sector {ell}: {exc}") from exc
        values[ell] = float(c)
        bases[ell] = P
    c = min(values.values())
    if c <= 0:
        raise SpectralError(f"deflated L+ is not coercive: sector constants {values}")
    if return_details:
        return c, {"sectors": values, "state": st, "bases": bases}
    return c


@dataclass(frozen=True)
class IFTReport:
    factorization: float
    w2_residual: float
    scalar: float
    scalar_expected: float
    scalar_rel_error: float
    virial_residual: float

    def to_dict(self) -> dict:
        return {
            "factorization": self.factorization, "w2_residual": self.w2_residual,
            "scalar": self.scalar, "scalar_expected": self.scalar_expected,
            "scalar_rel_error": self.scalar_rel_error, "virial_residual": self.virial_residual,
        }


def id_plus_k(gs: GroundState, xi: RadialProfile) -> RadialProfile:
    """(Id + K_p)ξ = ξ - (−Δ+λ)⁻¹[(p-1)V Q^{p-2}ξ + p (|x|⁻¹∗(Q^{p-1}ξ)) Q^{p-1}]."""
    p = gs.p
    qp = gs.q ** (p - 1)
    src = xi * ((p - 1) * local_potential(gs)) + p * newton_potential(qp * xi) * qp
    out = xi.values - apply_resolvent(src, gs.lam).values
    out[-1] = 0.0
    return xi.with_values(out)


def w_operator(gs: GroundState) -> RadialProfile:
    """W_p = (−Δ+λ)⁻² (V Q^{p-1})."""
    V = newton_potential(gs.q ** gs.p)
    return apply_resolvent(apply_resolvent(V * gs.q ** (gs.p - 1), gs.lam), gs.lam)


def virial_profile(gs: GroundState) -> RadialProfile:
    """R = 2Q + r Q'."""
    return 2.0 * gs.q + gs.q.r * q_prime(gs.q)


def random_radial(grid, rng, count: int = 4) -> RadialProfile:
    """Random smooth profile vanishing at r_max (sum of shifted Gaussians)."""
    R = grid.r_max
    f = np.zeros(grid.n)
    for _ in range(count):
        c, s, a = rng.uniform(0, 0.5 * R), rng.uniform(0.05 * R, 0.3 * R), rng.normal()
        f += a * np.exp(-0.5 * ((grid.r - c) / s) ** 2)
    f[-1] = 0.0
    return RadialProfile(grid, f)


def solve_id_plus_k(gs: GroundState, rhs: RadialProfile, tol: float = 1e-13) -> RadialProfile:
    """(Id + K_p)⁻¹ rhs by GMRES on the interior nodes."""
    grid = gs.grid
    m = grid.n - 1

    def mv(x):
        f = np.zeros(grid.n)
        f[:-1] = x
        return np.array(id_plus_k(gs, RadialProfile(grid, f)).values[:-1])

    A = LinearOperator((m, m), matvec=mv, dtype=float)
    x, info = gmres(A, np.array(rhs.values[:-1]), rtol=tol, atol=0.0, restart=200, maxiter=50)
    if info != 0:
        raise SpectralError(f"GMRES for Id + K did not converge (info={info}); Id + K may be singular")
    out = np.zeros(grid.n)
    out[:-1] = x
    return RadialProfile(grid, out)


def ift_operators_check(gs2: GroundState, samples: int = 20, seed: int = 0) -> IFTReport:
    """Residuals of the p=2 operator identities behind the implicit-function argument.

    factorization: max over random ξ of ‖(Id+K)ξ - (−Δ+λ)⁻¹L₊ξ‖_∞/‖(Id+K)ξ‖_∞.
    w2_residual: ‖(−Δ+λ)W - Q‖_∞/‖Q‖_∞.
    scalar: the constraint pairing 2<Q, (Id+K)⁻¹W>, expected -‖Q‖²/(2λ).
    virial_residual: ‖L₊R + 2λQ‖_∞/(2λ‖Q‖_∞) with R = 2Q + rQ'.
    """
    if abs(gs2.p - 2.0) > 1e-12:
        raise DomainError(f"operator identities are checked at p = 2, got p = {gs2.p}")
    grid = gs2.grid
    rng = np.random.default_rng(seed)
    fac = 0.0
    for _ in range(samples):
        xi = random_radial(grid, rng)
        a = id_plus_k(gs2, xi).values
        b = apply_resolvent(apply_linearized(gs2, xi, 0, "Lplus"), gs2.lam).values
        fac = max(fac, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    W = w_operator(gs2)
    lhs = neg_laplacian(W).values + gs2.lam * W.values
    qmax = np.max(gs2.q.values)
    w2 = float(np.max(np.abs(lhs[:-1] - gs2.q.values[:-1])) / qmax)
    y = solve_id_plus_k(gs2, W)
    s = 2.0 * inner(gs2.q, y)
    expected = -inner(gs2.q, gs2.q) / (2.0 * gs2.lam)
    LR = apply_linearized(gs2, virial_profile(gs2), 0, "Lplus").values
    vir = float(np.max(np.abs(LR[:-1] + 2 * gs2.lam * gs2.q.values[:-1])) / (2 * gs2.lam * qmax))
    return IFTReport(fac, w2, s, expected, abs(s - expected) / abs(expected), vir)
