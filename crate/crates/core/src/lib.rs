//! Exact simulation and analysis of globally coupled degrade-and-fire
//! oscillators.
//!
//! A population is a step profile: clusters of cells with lengths summing to
//! 1 and strictly increasing expression levels, the top one at 1. Levels decay
//! at unit rate; a cluster fires (resets to 1) when its repressor level
//! `(1 - epsilon eta) u + epsilon eta ∫u` reaches `eta`.
//!
//! * [`profile`]: profiles, validation, traces and `L¹` distances.
//! * [`engine`]: closed-form firings, cycles and long runs.
//! * [`oracle`]: brute-force time stepping for cross-checks.
//! * [`periodic`]: periodic orbits and their existence threshold.
//! * [`spectral`]: companion matrices and contraction bounds.
//! * [`weak`]: the weak-coupling affine equation and contraction constant.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod oracle;
pub mod periodic;
pub mod profile;
pub mod rng;
pub mod spectral;
pub mod weak;

pub use engine::{
    evaluate_solution, first_firing, full_cycle, full_cycle_with, plateau_extent, repressor_at,
    repressor_level, s_value, simulate, simulate_with, Branch, CycleResult, EngineConfig,
    FiringEvent, FiringOutcome, FiringSchedule, Merge, SharedFiring, Simulation,
};
pub use error::{DefireError, Result};
pub use oracle::{oracle_firing_time, DEFAULT_DT};
pub use periodic::{
    construct_periodic, existence_bound, scan_epsilon, verify_fixed_point, ExistenceBound,
    OrbitBranch, PeriodicOrbit, ScanReport, ScanRow,
};
pub use profile::{
    compute_traces, l1_distance, rotate_profile, trace_integral, validate_profile, Params,
    StepProfile, Trace, ValidationReport, Violation,
};
pub use spectral::{
    branch_coeffs, companion_family, companion_matrix, empirical_contraction, estimate_contraction,
    jsr_ratio_bound, sample_product_radius, spectral_radius, word_product, BranchSet,
    CompanionSpec, ContractionEstimate, EmpiricalRate, Matrix, ProductSamples, RatioBound,
};
pub use weak::{
    apply_l, contraction_constant, discontinuity_limit, mu_critical, solve_t1_neumann,
    verify_cycle_contraction, DiscontinuityReport, FiringProfile, NeumannSolution,
};
