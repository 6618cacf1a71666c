"""Desk-scale simulator of spontaneous-collapse dynamics over a mass-density ontology.

Quantum states (exact small-N wavefunctions or macroscopic branch states)
evolve under unitary, jump-localization, or continuous noise-coupled
dynamics; the mass-density field, its variance, and the accessibility ratio
classify where the mass is experimentally detectable, and degree profiles
grade how determinately located it is.
"""

from ._version import __version__
from .errors import (
    EmptyEnsembleError,
    EmptyProductError,
    GrwSimError,
    IncompatibleStateError,
    ParameterError,
    PartitionError,
    StepTooLargeError,
    ZeroStateError,
)
from .states import (
    Branch,
    BranchState,
    MassObservablePartition,
    ParticleSpec,
    Region,
    SpatialGrid,
    WaveFunction,
    collective_superposition,
    gaussian_packet,
    marble_state,
    marginal_density,
    normalize,
    nucleon,
    point_state,
    product_state,
    split_product,
    state_from_json,
    state_to_json,
    superpose,
    two_bump_state,
)
from .massdensity import (
    DEFAULT_THRESHOLD,
    DegreeProfile,
    IndeterminacyReport,
    MassDensityField,
    accessibility_ratio,
    analyze_state,
    classify_accessible,
    degree_of,
    indeterminacy_report,
    mass_density,
    mass_variance,
    smear_density,
)
from .dynamics import (
    CollapseParameters,
    Hamiltonian,
    JumpEvent,
    NoiseField,
    TrajectoryRecord,
    apply_localization,
    branch_csl_step,
    branch_jump,
    child_rng,
    csl_step,
    effective_rate,
    evolve_trajectory,
    sample_jumps,
    two_branch_weight_ensemble,
    unitary_step,
)
from .ensemble import EnsembleManifest, aggregate, run_ensemble, wilson_interval
from .experiments import (
    EXPERIMENTS,
    ExperimentReport,
    ExperimentSpec,
    run_born_statistics,
    run_collapse_rate_scaling,
    run_counting_anomaly,
    run_superposition_vs_product,
    run_tails_demo,
    run_test_particle_deflection,
    run_threshold_sweep,
    standard_suite,
    superposition_and_product,
)

__all__ = [name for name in dir() if not name.startswith("_")]
