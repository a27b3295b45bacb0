"""Certified exponential relaxation for a kinetic transport-relaxation equation.

The package assembles structure-preserving discrete operators for the
conjugated evolution du/dt + K u = 0 of a collisional kinetic model in a
confining potential, computes an explicit exponential-decay certificate
(rate and prefactor) from ladder-operator commutation identities and the
spectral gap of the associated Schroedinger-type operator, verifies the
underlying coercivity inequality directly as a matrix positivity
statement, and confirms the certified envelope by time integration and
relative-entropy tracking.
"""

from .potential import Potential, make_potential, derivative_bounds, confinement_mass
from .velocity_ladder import LadderSet, build_ladder, velocity_multiplication
from .spatial_ops import (SpatialGrid, SpatialOps, make_grid, build_spatial_ops,
                          discrete_ground_state, witten_eigs, witten_gap)
from .phase_assembly import (PhaseOperator, DENSE_CAP, steady_vector,
                             lift_position, lift_velocity,
                             assemble_transport, assemble_transport_direct,
                             assemble_K, assemble_lambda2, apply_inverse_lambda2,
                             assemble_L, assemble_A_operator,
                             projector_pi0, projector_pi1,
                             commutator_residuals, export_matrix_market)
from .spectral import (SpectralReport, spectral_gaps, operator_norm, spectrum_K,
                       generalized_max_eig, kernel_vector)
from .certificate import (Certificate, analytic_norm_bounds, choose_epsilon,
                          verify_coercivity, decay_envelope, make_certificate)
from .evolution import (State, DecayTrace, make_initial, evolve, fit_decay_rate,
                        relative_entropy, entropy_function,
                        hermite_xpoly_matrix, gauss_hermite_weights)
from .cli_report import (ConfigError, RunConfig, RunReport, default_config,
                         validate_config, run, sweep)
from .selftest import run_selftest

__version__ = "0.1.0"

__all__ = [
    "Potential", "make_potential", "derivative_bounds", "confinement_mass",
    "LadderSet", "build_ladder", "velocity_multiplication",
    "SpatialGrid", "SpatialOps", "make_grid", "build_spatial_ops",
    "discrete_ground_state", "witten_eigs", "witten_gap",
    "PhaseOperator", "DENSE_CAP", "steady_vector", "lift_position", "lift_velocity",
    "assemble_transport", "assemble_transport_direct", "assemble_K",
    "assemble_lambda2", "apply_inverse_lambda2", "assemble_L",
    "assemble_A_operator", "projector_pi0", "projector_pi1",
    "commutator_residuals", "export_matrix_market",
    "SpectralReport", "spectral_gaps", "operator_norm", "spectrum_K",
    "generalized_max_eig", "kernel_vector",
    "Certificate", "analytic_norm_bounds", "choose_epsilon", "verify_coercivity",
    "decay_envelope", "make_certificate",
    "State", "DecayTrace", "make_initial", "evolve", "fit_decay_rate",
    "relative_entropy", "entropy_function", "hermite_xpoly_matrix",
    "gauss_hermite_weights",
    "ConfigError", "RunConfig", "RunReport", "default_config", "validate_config",
    "run", "sweep", "run_selftest",
]
