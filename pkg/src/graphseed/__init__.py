"""Sparse seeding schedules and graph filters that produce a target bandlimited graph signal."""

from .errors import *  # noqa: F401,F403
from .spectral import (
    DEFAULT_TOL, Graph, ShiftKind, ShiftOperator, SpectralBasis, Tolerances,
    build_shift, decompose, gft, igft, spectrum_census, vandermonde,
)
from .filters import (
    FilterDesign, apply_diffusion_rate_filter, apply_filter_polynomial,
    design_annihilating_product, design_lowpass_kernel,
)
from .seeding import (
    ReconstructionPlan, SeedingSchedule, SelectionPattern, adjust_for_initial_state,
    degree_reduced_design, design_exact, identity_seeding_check, mnmt_design,
    mnst_design, reconstruct, simulate_seeding, snmt_design,
)
from .imperfect import (
    NoiseModel, ReconstructionOperator, error_covariance, joint_seed_filter,
    ls_seed_values, select_constant_snr, select_fixed_noise, sparse_location_design,
)
from .graphs import gen_cycle, gen_er, karate, random_bandlimited
from .experiments import ExperimentConfig, run_experiment

__version__ = "0.1.0"
