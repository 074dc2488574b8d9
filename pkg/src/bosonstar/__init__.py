"""Fourier-spectral solvers for the pseudo-relativistic Hartree equation.

The model is i d/dt psi = (sqrt(-Delta + m^2) - m) psi - (|x|^-1 * |psi|^2) psi
on a periodic box, with a boosted energy whose constrained minimizers are
travelling solitary waves.  The package provides the spectral foundation
(grids, transforms, multiplier operators), the conserved functionals and
their gradient, two ground-state solvers, a Strang-split time stepper with
blow-up guards, and verification experiments (decay fits, energy-curve
structure, sharp constants, stability runs), plus a CLI and a binary
snapshot format.
"""

__version__ = "0.1.0"

from .analysis import (
    BestConstantResult,
    BisectionEstimate,
    DecayFit,
    EnergyCurve,
    axial_asymmetry,
    best_constant,
    centroid_velocity,
    critical_charge_bisection,
    decay_fit,
    directional_variation,
    embed_field,
    energy_curve,
    fit_exponential_tail,
    green_function_probe,
    mass_zero_scaling_defect,
    radial_shell_maxima,
    restrict_field,
    scaling_probe_field,
    stability_experiment,
)
from .dynamics import (
    EvolutionConfig,
    EvolutionTrace,
    OrbitAlignment,
    blowup_probe,
    collapse_candidate,
    evolve,
    orbit_distance,
    strang_step,
)
from .functionals import (
    EnergyReport,
    PhysicalParams,
    boosted_energy,
    charge,
    density_centroid,
    energy_gradient,
    hartree_potential,
    massless_free_form,
    nonrelativistic_energy,
    sobolev_half_norm,
)
from .groundstate import (
    GroundStateProblem,
    GroundStateResult,
    SupercriticalError,
    canonicalize,
    euler_lagrange_residual,
    init_boosted_gaussian,
    lagrange_multiplier,
    renormalize,
    solve_fixed_point,
    solve_gradient_flow,
)
from .io import SnapshotError, load_field, save_field
from .spectral import (
    ComplexField,
    GridSpec,
    SpectralMultiplier,
    apply_multiplier,
    boost_symbol,
    coulomb_symbol,
    free_symbol,
    free_symbol_minimum,
    dilate_field,
    gaussian_field,
    kinetic_symbol,
    random_band_limited,
    resolvent_symbol,
    shift_field,
    to_fourier,
    to_position,
)

__all__ = [
    "__version__",
    # spectral
    "GridSpec",
    "ComplexField",
    "SpectralMultiplier",
    "to_fourier",
    "to_position",
    "apply_multiplier",
    "kinetic_symbol",
    "boost_symbol",
    "free_symbol",
    "free_symbol_minimum",
    "coulomb_symbol",
    "resolvent_symbol",
    "shift_field",
    "dilate_field",
    "gaussian_field",
    "random_band_limited",
    # functionals
    "PhysicalParams",
    "EnergyReport",
    "charge",
    "boosted_energy",
    "nonrelativistic_energy",
    "hartree_potential",
    "massless_free_form",
    "sobolev_half_norm",
    "density_centroid",
    "energy_gradient",
    # ground states
    "GroundStateProblem",
    "GroundStateResult",
    "SupercriticalError",
    "solve_gradient_flow",
    "solve_fixed_point",
    "lagrange_multiplier",
    "euler_lagrange_residual",
    "init_boosted_gaussian",
    "renormalize",
    "canonicalize",
    # dynamics
    "EvolutionConfig",
    "EvolutionTrace",
    "OrbitAlignment",
    "strang_step",
    "evolve",
    "orbit_distance",
    "collapse_candidate",
    "blowup_probe",
    # analysis
    "DecayFit",
    "EnergyCurve",
    "BestConstantResult",
    "BisectionEstimate",
    "decay_fit",
    "radial_shell_maxima",
    "fit_exponential_tail",
    "green_function_probe",
    "directional_variation",
    "mass_zero_scaling_defect",
    "scaling_probe_field",
    "energy_curve",
    "best_constant",
    "stability_experiment",
    "critical_charge_bisection",
    "embed_field",
    "restrict_field",
    "axial_asymmetry",
    "centroid_velocity",
    # io
    "save_field",
    "load_field",
    "SnapshotError",
]
