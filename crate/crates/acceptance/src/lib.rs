//! Tolerances and sample sizes for the acceptance suite in `tests/acceptance.rs`.
//! They are fixed here so that no test can loosen them locally.

/// |IC² + F² − purity|
pub const RESIDUAL_TOL: f64 = 1e-10;
/// C − IC
pub const LOWER_BOUND_TOL: f64 = 1e-12;
/// Minimum excess IC − √((1 + C²)/2) that counts as a falsifying point.
pub const UPPER_FALSIFY_MIN: f64 = 1e-6;
pub const RANK_VIOLATION_THRESHOLD: f64 = 1e-9;
/// |C² + F² − 1| for pure states
pub const PURE_COMPLEMENTARITY_TOL: f64 = 1e-10;
/// |C_pure − C_spectral|
pub const PURE_ROUTE_TOL: f64 = 1e-9;
pub const SEPARABLE_C_TOL: f64 = 1e-12;
pub const BELL_C_IC_TOL: f64 = 1e-9;
/// |min_t C − u| on the Bell line
pub const BELL_MIN_TOL: f64 = 1e-6;
/// Element deviation between evolution routes at γ = 0.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-8;
pub const DAMPED_TRACE_TOL: f64 = 1e-10;
pub const DAMPED_MIN_EIG: f64 = -1e-9;
pub const DEATH_THRESHOLD: f64 = 1e-9;

pub const SAMPLES: usize = 10_000;
pub const SEED: u64 = 20_241_015;
pub const DT: f64 = 1e-3;
/// Time nodes on [0, 10] for the brute-force minimum of C on the Bell line.
pub const BELL_DENSE_NODES: usize = 200_001;
