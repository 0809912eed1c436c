"""Simulation toolkit for mean-field quantum dynamics and chaoticity metrics.

Dense tensor-power operator algebra, mean-field Hamiltonians and Kraus
channels, the nonlinear one-body limit, POVM read/encode maps with their
derived Markov chains, and a config-driven experiment harness.
"""

from .chaos import (
    ChaosProfile,
    DiscreteMeasure,
    chaos_profile_classical,
    chaos_profile_quantum,
    classical_marginal,
    is_symmetric_measure,
    measure_power,
    product_measure,
    scaling_exponent,
    total_variation,
)
from .dynamics import (
    KrausMap,
    MeanFieldSystem,
    TwoBodyPotential,
    apply_heisenberg,
    apply_predual,
    check_permutation_covariance,
    dephasing_map,
    evolve_state,
    hamiltonian_kraus,
    kraus_from_spec,
    lift_pair_potential,
    mean_field_hamiltonian,
    two_body_potential,
    unitary_to_kraus,
)
from .errors import ConfigError, MemoryGuardError, NumericalInvariantError
from .harness import ExperimentConfig, default_config, load_config, run_experiment
from .hartree import (
    HartreeState,
    IntegratorConfig,
    effective_hamiltonian,
    hartree_evolve,
    hartree_rhs,
    hartree_trajectory,
)
from .measurement import (
    MeasurementBasis,
    Povm,
    StatePreparation,
    TransitionKernel,
    apply_kernel,
    compose_kernels,
    derived_kernel_n,
    derived_kernel_single,
    encode_discrete,
    encode_weighted_samples,
    general_kernel,
    projective_povm,
    read_joint,
    read_probability,
    sample_chain,
)
from .operators import (
    SiteSpace,
    check_density,
    herm_expm,
    kron_power,
    partial_trace,
    permutation_unitary,
    pure_state_projector,
    symmetry_class,
    tensor,
    trace_norm,
)

__version__ = "0.1.0"
