"""Normalized ground states of the Choquard equation on radial grids.

The package solves

    -Δu + λu = (|x|⁻¹ ∗ |u|ᵖ) |u|^{p-2} u   in R³,   ‖u‖₂ = N,

for radial profiles, and checks the variational identities, decay
properties and linearized spectra of the resulting ground states.
"""

from .errors import (
    ChoquardError,
    ConvergenceError,
    DomainError,
    InsufficientDecayError,
    SpectralError,
    SweepError,
)
from .grid import (
    QuadratureRule,
    RadialGrid,
    RadialProfile,
    derivative,
    inner,
    integrate,
    make_grid,
    norm_H1,
    norm_Lq,
    quadrature,
    sector_laplacian,
)
from .potential import (
    apply_resolvent,
    coulomb_energy,
    multipole_potential,
    newton_potential,
)
from .functionals import (
    DiagnosticConstants,
    EnergyBreakdown,
    c1,
    c2_lower_bound,
    calibrate_constants,
    dilate,
    energy,
    kinetic_energy,
    mass,
    mass_scaling_exponent,
    scale_minimize,
)
from .config import Config, SolverConfig, SpectralConfig, Tolerances
from .solver import (
    DecayFit,
    GroundState,
    PohozaevReport,
    decay_fit,
    euler_lagrange_gradient,
    pohozaev_report,
    resample,
    rescale_mass,
    solve,
    solve_fixpoint,
    solve_flow,
)
from .spectrum import (
    SectorOperator,
    SpectrumReport,
    apply_linearized,
    assemble,
    coercivity_constant,
    ift_operators_check,
    low_spectrum,
    nondegeneracy_report,
)
from .continuation import (
    SweepRecord,
    convergence_study,
    h1_distance,
    kernel_tracking,
    largest_passing_p,
    sweep,
    uniqueness_probe,
)
from .rearrangement import rearrange, rearrangement_inequalities

__version__ = "0.1.0"

__all__ = [
    "ChoquardError",
    "Config",
    "ConvergenceError",
    "DecayFit",
    "DiagnosticConstants",
    "DomainError",
    "EnergyBreakdown",
    "GroundState",
    "InsufficientDecayError",
    "PohozaevReport",
    "QuadratureRule",
    "RadialGrid",
    "RadialProfile",
    "SectorOperator",
    "SolverConfig",
    "SpectralConfig",
    "SpectralError",
    "SpectrumReport",
    "SweepError",
    "SweepRecord",
    "Tolerances",
    "apply_linearized",
    "apply_resolvent",
    "assemble",
    "c1",
    "c2_lower_bound",
    "calibrate_constants",
    "coercivity_constant",
    "convergence_study",
    "coulomb_energy",
    "decay_fit",
    "derivative",
    "dilate",
    "energy",
    "euler_lagrange_gradient",
    "h1_distance",
    "ift_operators_check",
    "inner",
    "integrate",
    "kernel_tracking",
    "kinetic_energy",
    "largest_passing_p",
    "low_spectrum",
    "make_grid",
    "mass",
    "mass_scaling_exponent",
    "multipole_potential",
    "newton_potential",
    "nondegeneracy_report",
    "norm_H1",
    "norm_Lq",
    "pohozaev_report",
    "quadrature",
    "rearrange",
    "rearrangement_inequalities",
    "resample",
    "rescale_mass",
    "scale_minimize",
    "sector_laplacian",
    "solve",
    "solve_fixpoint",
    "solve_flow",
    "sweep",
    "uniqueness_probe",
]
