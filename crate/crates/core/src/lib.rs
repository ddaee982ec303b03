//! Two-qubit XYZ Heisenberg model with a z-axis Dzyaloshinsky–Moriya term
//! under phase damping.
//!
//! The crate evolves the Horodecki initial state along three independent
//! routes (closed form, unitary propagator, RK4 integration of the master
//! equation) and evaluates concurrence, intrinsic concurrence, first-order
//! coherence and purity along the way, together with the conservation
//! identity IC² + F² = tr ρ² and the bounds C ≤ IC ≤ √((1 + C²)/2).

pub mod analysis;
pub mod cli;
pub mod lindblad;
pub mod matcore;
pub mod measures;
pub mod model;
pub mod states;

pub use lindblad::{Route, Trajectory};
pub use matcore::{ComplexMatrix, EigenDecomposition};
pub use measures::MeasureRecord;
pub use model::ModelParams;
pub use states::{DensityMatrix, PureState};
