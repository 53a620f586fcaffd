"""Unconditional spin squeezing by continuous QND measurement and feedback.

Simulators for the collective-spin master equation with a Markovian feedback
drive, homodyne-conditioned stochastic trajectories, squeezing observables and
their closed-form approximations, and experimental feasibility calculators.
"""

from .design import (C_LIGHT, HBAR, ExperimentalParams, LaserConstraints,
                     LossBudget, SingleShotFloor, SqueezingOutlook, alpha,
                     attainable_squeezing, cesium_preset, laser_constraints,
                     loss_rate_and_budget, single_atom_phase_shift,
                     single_shot_floor)
from .dynamics import (EffectiveHamiltonian, InvariantViolation, MeParams,
                       default_step, effective_hamiltonian, integrate_me,
                       m_from_cavity, m_from_freespace, me_rhs, me_rhs_lindblad)
from .feedback import (FeedbackLaw, MeanSpinCollapse, analytic_lambda,
                       conditional_lambda, feedback_generator)
from .observables import (ObservableSeries, ScalingFit, analytic_predictions,
                          find_minimum, fit_inverse_scaling,
                          stop_time_for_target, xi2_general, xi2_z,
                          xi2_z_from_moments)
from .spin import (SpinOperators, SpinSystem, build_spin_operators, css_x,
                   expect_real, expectation, is_hermitian, operators_for_dim,
                   purity, rotate, rotation_matrix, validate_density_matrix)
from .trajectories import (EnsembleResult, TrajectoryRecord, ensemble_average,
                           simulate_trajectory, sme_step, trajectory_noise)

__version__ = "0.1.0"

__all__ = [
    "C_LIGHT", "HBAR", "EffectiveHamiltonian", "EnsembleResult",
    "ExperimentalParams", "FeedbackLaw", "InvariantViolation",
    "LaserConstraints", "LossBudget", "MeParams", "MeanSpinCollapse",
    "ObservableSeries", "ScalingFit", "SingleShotFloor", "SpinOperators",
    "SpinSystem", "SqueezingOutlook", "TrajectoryRecord", "alpha",
    "analytic_lambda", "analytic_predictions", "attainable_squeezing",
    "build_spin_operators", "cesium_preset", "conditional_lambda", "css_x",
    "default_step", "effective_hamiltonian", "ensemble_average",
    "expect_real", "expectation", "feedback_generator", "find_minimum",
    "fit_inverse_scaling", "integrate_me", "is_hermitian",
    "laser_constraints", "loss_rate_and_budget", "m_from_cavity",
    "m_from_freespace", "me_rhs", "me_rhs_lindblad", "operators_for_dim",
    "purity", "rotate", "rotation_matrix", "simulate_trajectory",
    "single_atom_phase_shift", "single_shot_floor", "sme_step",
    "stop_time_for_target", "trajectory_noise", "validate_density_matrix",
    "xi2_general", "xi2_z", "xi2_z_from_moments",
]
