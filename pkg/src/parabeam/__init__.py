"""parabeam: nonlinear paraxial beam propagation for optical and atomic beams.

A split-step spectral solver for the generic transverse equation
2ik dpsi/du = -eps Lap psi + gamma |psi|^2 psi + eps k^2 alpha^2(u) r^2 psi,
together with the exact moment laws, the interaction-aware quality factor,
and the ABCD transport of the generalized complex curvature, so that every
analytic claim can be checked against direct numerical propagation.
"""

__version__ = "0.1.0"

from .core import (
    AtomicBeamSpec,
    Axis,
    LongitudinalPotential,
    OpticalBeamSpec,
    ParaxialParams,
    gravitational_sag,
    map_atomic,
    map_optical,
    tau_of_z,
    wkb_longitudinal,
    wkb_validity,
)
from .moments import (
    MomentSet,
    MomentTrajectory,
    compute_moments,
    ehrenfest_derivatives,
    free_expansion_r2,
    moment_ode_solve,
    quality_factor,
    self_trapping_threshold,
    tof_width,
    velocity_dispersion_error,
)
from .abcd import (
    InverseCurvature,
    RayMatrix,
    compose,
    free_matrix,
    harmonic_matrix,
    linear_gaussian_propagate,
    matrix_ode,
    propagate_q,
    propagator_kernel,
    q_from_moments,
)
from .solver import (
    GridSpec,
    PropagationRecord,
    TransverseField,
    effective_energy,
    make_gaussian,
    split_step_propagate,
)

__all__ = [
    "AtomicBeamSpec",
    "Axis",
    "GridSpec",
    "InverseCurvature",
    "LongitudinalPotential",
    "MomentSet",
    "MomentTrajectory",
    "OpticalBeamSpec",
    "ParaxialParams",
    "PropagationRecord",
    "RayMatrix",
    "TransverseField",
    "compose",
    "compute_moments",
    "effective_energy",
    "ehrenfest_derivatives",
    "free_expansion_r2",
    "free_matrix",
    "gravitational_sag",
    "harmonic_matrix",
    "linear_gaussian_propagate",
    "make_gaussian",
    "map_atomic",
    "map_optical",
    "matrix_ode",
    "moment_ode_solve",
    "propagate_q",
    "propagator_kernel",
    "q_from_moments",
    "quality_factor",
    "self_trapping_threshold",
    "split_step_propagate",
    "tau_of_z",
    "tof_width",
    "velocity_dispersion_error",
    "wkb_longitudinal",
    "wkb_validity",
]
