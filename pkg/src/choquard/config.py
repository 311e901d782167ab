"""Solver, spectral and verification settings.

All knobs live here so the CLI can layer defaults < JSON config < flags.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .errors import DomainError


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and iteration controls for a ground-state solve.

    Attributes
    ----------
    n : int
        Node count of the solve grid.
    r_max : float or None
        Truncation radius. ``None`` picks ``r_max_scale / t`` where ``t`` is
        the energy-optimal inverse width of a Gaussian trial state, so that
        the grid follows the natural length scale of each ``(p, N)``.
    flow_tol, fixpoint_tol : float
        Stopping thresholds. The flow stops on the relative sup-norm of
        the Euler-Lagrange residual, the fixpoint on the relative sup-norm
        difference of successive iterates.
    """

    n: int = 8000
    r_max: float | None = None
    r_max_scale: float = 16.0
    flow_tol: float = 1e-8
    fixpoint_tol: float = 1e-9
    max_iter: int = 20000
    armijo: float = 1e-4
    max_halvings: int = 30
    tau0: float = 1.0
    tau_max: float = 4.0

    def __post_init__(self):
        if self.n < 16:
            raise DomainError(f"grid needs at least 16 nodes, got {self.n}")
        if self.r_max is not None and not self.r_max > 0:
            raise DomainError(f"r_max must be positive, got {self.r_max}")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise DomainError("iteration limits must be positive")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(frozen=True)
class SpectralConfig:
    """Controls for the linearized-operator eigenproblems.

    ``kernel_rel`` is the floor of the kernel threshold in units of λ; with
    ``refine`` the ℓ=1 near-zero mode is recomputed on a doubled spectral
    grid and ten times its shift raises the threshold if larger.
    """

    spectral_n: int = 800
    k: int = 6
    kernel_rel: float = 1e-3
    refine: bool = True

    def __post_init__(self):
        if self.spectral_n < 16 or self.k < 1:
            raise DomainError("spectral grid needs >= 16 nodes and k >= 1")


@dataclass(frozen=True)
class Tolerances:
    """Pass/fail thresholds used by the verification battery."""

    pohozaev: float = 1e-5
    multiplier: float = 1e-5
    scaling: float = 1e-5
    eq_residual: float = 1e-6
    decay_r2: float = 0.999
    lminus_residual: float = 1e-6
    anchor_virial: float = 1e-3
    anchor_w2: float = 1e-6
    anchor_scalar: float = 1e-4
    factorization: float = 1e-6
    rearrangement_norm: float = 1e-4
    rearrangement_slack: float = 1e-6
    uniqueness: float = 1e-4


@dataclass(frozen=True)
class Config:
    """Bundle of all settings, loadable from a JSON mapping."""

    solver: SolverConfig = field(default_factory=SolverConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_mapping(cls, data: dict) -> "Config":
        parts = {}
        for name, kind in (("solver", SolverConfig), ("spectral", SpectralConfig),
                           ("tolerances", Tolerances)):
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise DomainError(f"config section {name!r} must be an object")
            known = {f.name for f in fields(kind)}
            unknown = set(section) - known
            if unknown:
                raise DomainError(f"unknown {name} keys: {sorted(unknown)}")
            parts[name] = kind(**section)
        extra = set(data) - {"solver", "spectral", "tolerances"}
        if extra:
            raise DomainError(f"unknown config sections: {sorted(extra)}")
        return cls(**parts)

    def to_mapping(self) -> dict:
        return asdict(self)
